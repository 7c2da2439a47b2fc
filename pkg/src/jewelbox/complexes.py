"""Flag complexes of ideal edges and their reduced homology.

Homology ranks are computed modulo a large prime; when the boundary matrices
are small the integer Smith normal form is also computed so torsion shows up.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Hashable, Sequence

import networkx as nx
import numpy as np

from .stars import (
    DotSource,
    IdealEdge,
    InsufficientWords,
    compatible,
    compare_sets,
    dirs_of,
    full_mask,
    is_ascending,
    is_ascending_for,
    petal_of,
)

PRIME = 2**31 - 1
SNF_LIMIT = 400  # largest matrix side handled by the integer Smith form


class TooLarge(RuntimeError):
    pass


class InvalidDecomposition(ValueError):
    pass


@dataclass
class FlagComplex:
    labels: list
    adjacency: set[tuple[int, int]]  # pairs i < j

    @classmethod
    def from_relation(cls, labels: Sequence, related: Callable) -> "FlagComplex":
        adj = set()
        for i, j in combinations(range(len(labels)), 2):
            if related(labels[i], labels[j]):
                adj.add((i, j))
        return cls(list(labels), adj)

    @property
    def num_vertices(self) -> int:
        return len(self.labels)

    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(len(self.labels)))
        g.add_edges_from(self.adjacency)
        return g

    def simplices(self, limit: int = 1_000_000) -> list[list[tuple[int, ...]]]:
        """Simplices grouped by dimension, each a sorted vertex tuple."""
        out: list[list[tuple[int, ...]]] = []
        count = 0
        for clique in nx.enumerate_all_cliques(self.graph()):
            d = len(clique) - 1
            while len(out) <= d:
                out.append([])
            out[d].append(tuple(sorted(clique)))
            count += 1
            if count > limit:
                raise TooLarge(f"more than {limit} simplices")
        for lst in out:
            lst.sort()
        return out

    def dim(self) -> int:
        if not self.labels:
            return -1
        return max(len(c) for c in nx.find_cliques(self.graph())) - 1

    def induced(self, keep: Sequence[int]) -> "FlagComplex":
        idx = {v: i for i, v in enumerate(keep)}
        adj = {(idx[a], idx[b]) for a, b in self.adjacency if a in idx and b in idx}
        adj = {(min(a, b), max(a, b)) for a, b in adj}
        return FlagComplex([self.labels[v] for v in keep], adj)

    def strong_collapse(self) -> "FlagComplex":
        """Repeatedly delete vertices whose closed neighbourhood sits inside another's.

        Deleting a dominated vertex is a deformation retraction, so the
        homotopy type is unchanged.
        """
        g = self.graph()
        changed = True
        while changed:
            changed = False
            for v in sorted(g.nodes):
                nv = set(g[v]) | {v}
                for w in sorted(g[v]):
                    if nv <= set(g[w]) | {w}:
                        g.remove_node(v)
                        changed = True
                        break
        return self.induced(sorted(g.nodes))

    def to_json(self) -> dict:
        return {"vertices": [str(x) for x in self.labels], "edges": sorted([list(e) for e in self.adjacency])}


def join(k: FlagComplex, l: FlagComplex) -> FlagComplex:
    off = k.num_vertices
    adj = set(k.adjacency) | {(a + off, b + off) for a, b in l.adjacency}
    adj |= {(i, off + j) for i in range(k.num_vertices) for j in range(l.num_vertices)}
    return FlagComplex([("L", x) for x in k.labels] + [("R", x) for x in l.labels], adj)


# ---- homology ----------------------------------------------------------------


def _rank_mod_p(rows: list[tuple[int, ...]], ncols: int, entries) -> int:
    if not rows or ncols == 0:
        return 0
    m = np.zeros((len(rows), ncols), dtype=np.int64)
    for r, row in enumerate(entries):
        for c, v in row:
            m[r, c] = v % PRIME
    rank = 0
    nrows = m.shape[0]
    for col in range(ncols):
        piv = None
        for r in range(rank, nrows):
            if m[r, col]:
                piv = r
                break
        if piv is None:
            continue
        m[[rank, piv]] = m[[piv, rank]]
        inv = pow(int(m[rank, col]), PRIME - 2, PRIME)
        m[rank] = (m[rank] * inv) % PRIME
        below = np.nonzero(m[:, col])[0]
        below = below[below != rank]
        if len(below):
            f = m[below, col][:, None]
            m[below] = (m[below] - f * m[rank][None, :]) % PRIME
        rank += 1
        if rank == nrows:
            break
    return rank


def smith_diagonal(mat: list[list[int]]) -> list[int]:
    """Nonzero invariant factors of an integer matrix."""
    a = [list(r) for r in mat]
    nr = len(a)
    nc = len(a[0]) if nr else 0
    diag = []
    t = 0
    while t < min(nr, nc):
        # pick the nonzero entry of least absolute value in the remaining block
        best = None
        for i in range(t, nr):
            for j in range(t, nc):
                if a[i][j] and (best is None or abs(a[i][j]) < abs(a[best[0]][best[1]])):
                    best = (i, j)
                    if abs(a[i][j]) == 1:
                        break
            if best and abs(a[best[0]][best[1]]) == 1:
                break
        if best is None:
            break
        i, j = best
        a[t], a[i] = a[i], a[t]
        for r in a:
            r[t], r[j] = r[j], r[t]
        while True:
            p = a[t][t]
            done = True
            for i in range(t + 1, nr):
                if a[i][t]:
                    q = a[i][t] // p
                    a[i] = [x - q * y for x, y in zip(a[i], a[t])]
                    if a[i][t]:
                        done = False
            for j in range(t + 1, nc):
                if a[t][j]:
                    q = a[t][j] // p
                    for r in a:
                        r[j] -= q * r[t]
                    if a[t][j]:
                        done = False
            if done:
                # divisibility of the rest of the block
                bad = next(((i, j) for i in range(t + 1, nr) for j in range(t + 1, nc) if a[i][j] % p), None)
                if bad is None:
                    break
                a[t] = [x + y for x, y in zip(a[t], a[bad[0]])]
                continue
            # move the smallest entry of row/column t into the pivot
            cand = [(abs(a[i][t]), i, t) for i in range(t, nr) if a[i][t]]
            cand += [(abs(a[t][j]), t, j) for j in range(t, nc) if a[t][j]]
            _, i, j = min(cand)
            a[t], a[i] = a[i], a[t]
            for r in a:
                r[t], r[j] = r[j], r[t]
        diag.append(abs(a[t][t]))
        t += 1
    return diag


@dataclass
class HomologyReport:
    betti: dict[int, int]  # reduced Betti numbers by degree, including -1
    torsion: dict[int, list[int]] | None  # None when the Smith form was skipped
    dim: int
    f_vector: list[int]

    def nonzero_degrees(self) -> list[int]:
        return sorted(d for d, b in self.betti.items() if b)

    def csv(self) -> str:
        rows = ["degree,betti,torsion"]
        for d in sorted(self.betti):
            tor = "" if self.torsion is None else " ".join(map(str, self.torsion.get(d, [])))
            if self.torsion is None:
                tor = "not computed"
            rows.append(f"{d},{self.betti[d]},{tor}")
        return "\n".join(rows) + "\n"

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "f_vector": self.f_vector,
            "reduced_betti": {str(d): b for d, b in sorted(self.betti.items())},
            "torsion": None if self.torsion is None else {str(d): t for d, t in sorted(self.torsion.items())},
        }


def _boundary(faces_lo, faces_hi):
    index = {s: i for i, s in enumerate(faces_lo)}
    entries = []
    for s in faces_hi:
        row = []
        for k in range(len(s)):
            row.append((index[s[:k] + s[k + 1:]], -1 if k % 2 else 1))
        entries.append(row)
    return entries


def homology_of_simplices(simp: list[list[tuple[int, ...]]]) -> HomologyReport:
    dim = len(simp) - 1
    f = [len(s) for s in simp]
    if dim < 0:
        return HomologyReport({-1: 1}, {}, -1, [])
    # ranks[d] = rank of boundary C_d -> C_{d-1}; the augmentation is d = 0
    ranks = {0: 1}
    small = all(len(simp[d]) <= SNF_LIMIT for d in range(len(simp)))
    torsion: dict[int, list[int]] | None = {} if small else None
    for d in range(1, dim + 1):
        entries = _boundary(simp[d - 1], simp[d])
        if small:
            mat = [[0] * len(simp[d - 1]) for _ in simp[d]]
            for r, row in enumerate(entries):
                for c, v in row:
                    mat[r][c] = v
            diag = smith_diagonal(mat)
            ranks[d] = len(diag)
            tors = [x for x in diag if x > 1]
            if tors:
                torsion[d - 1] = tors
        else:
            ranks[d] = _rank_mod_p(simp[d], len(simp[d - 1]), entries)
    betti = {-1: 0}
    for d in range(dim + 1):
        betti[d] = f[d] - ranks[d] - ranks.get(d + 1, 0)
    return HomologyReport(betti, torsion, dim, f)


def homology(c: FlagComplex, limit: int = 1_000_000) -> HomologyReport:
    return homology_of_simplices(c.simplices(limit))


# ---- fundamental group ---------------------------------------------------------


def _tietze_trivial(ngens: int, relators: list[list[int]], max_rounds: int = 10_000) -> bool | None:
    """True if the presentation simplifies to the trivial group, False if a
    free generator is left over, None if stuck.

    Generators are 1..ngens, inverses negative.  Only eliminations by
    relators in which a generator occurs exactly once are used.
    """
    alive = set(range(1, ngens + 1))
    rels = [r for r in (_freered(r) for r in relators) if r]
    for _ in range(max_rounds):
        if not alive:
            return True
        progress = False
        rels.sort(key=len)
        for r in rels:
            counts: dict[int, int] = {}
            for x in r:
                counts[abs(x)] = counts.get(abs(x), 0) + 1
            once = [g for g, c in counts.items() if c == 1]
            if not once:
                continue
            g = min(once, key=lambda g: g)
            # solve r = u g^e v for g: g^e = u^-1 v^-1
            pos = next(i for i, x in enumerate(r) if abs(x) == g)
            e = 1 if r[pos] > 0 else -1
            u, v = r[:pos], r[pos + 1:]
            # r = u g^e v is conjugate to g^e v u, so g^e = (v u)^-1
            sol = _inv(v + u)
            if e == -1:
                sol = _inv(sol)
            new_rels = []
            for s in rels:
                if s is r:
                    continue
                out = []
                for x in s:
                    if abs(x) == g:
                        out.extend(sol if x > 0 else _inv(sol))
                    else:
                        out.append(x)
                out = _cyc(_freered(out))
                if out:
                    new_rels.append(out)
            rels = new_rels
            alive.discard(g)
            progress = True
            break
        if not progress:
            if not alive:
                return True
            # a generator in no relator survives as a free factor
            return False if not rels else None
    return None


def _freered(w):
    out = []
    for x in w:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return out


def _cyc(w):
    while len(w) >= 2 and w[0] == -w[-1]:
        w = w[1:-1]
    return w


def _inv(w):
    return [-x for x in reversed(w)]


def fundamental_group_trivial(simp: list[list[tuple[int, ...]]], max_gens: int = 2000) -> bool | None:
    """Edge-path presentation of pi_1 (of a connected complex), simplified."""
    if len(simp) < 2:
        return True
    verts = [s[0] for s in simp[0]]
    g = nx.Graph()
    g.add_nodes_from(verts)
    g.add_edges_from(simp[1])
    tree = nx.minimum_spanning_tree(g)
    tree_edges = {tuple(sorted(e)) for e in tree.edges}
    gen = {}
    for e in simp[1]:
        if e not in tree_edges:
            gen[e] = len(gen) + 1
    if len(gen) > max_gens:
        return None

    def letter(a, b):
        if a < b:
            x = gen.get((a, b))
            return [x] if x else []
        x = gen.get((b, a))
        return [-x] if x else []

    rels = []
    if len(simp) > 2:
        for a, b, c in simp[2]:
            rels.append(letter(a, b) + letter(b, c) + letter(c, a))
    return _tietze_trivial(len(gen), rels)


@dataclass
class SphericityReport:
    expected_dim: int
    dim: int
    homology: HomologyReport
    dim_ok: bool
    low_vanishes: bool
    pi1: str  # "trivial", "inconclusive" or "not run"
    verdict: str

    def to_json(self) -> dict:
        return {
            "expected_dim": self.expected_dim,
            "dim": self.dim,
            "dim_ok": self.dim_ok,
            "low_degrees_vanish": self.low_vanishes,
            "pi1": self.pi1,
            "verdict": self.verdict,
            "homology": self.homology.to_json(),
        }


def sphericity_report(c: FlagComplex, d: int, check_dim: bool = True, pi1_limit: int = 20000) -> SphericityReport:
    simp = c.simplices()
    h = homology_of_simplices(simp)
    dim = len(simp) - 1
    dim_ok = (dim == d) if check_dim else True
    low = all(b == 0 for deg, b in h.betti.items() if deg < d)
    if h.torsion is not None:
        low = low and all(not t for deg, t in h.torsion.items() if deg < d)
    pi1 = "not run"
    if low and d >= 2 and sum(len(s) for s in simp[:3]) <= pi1_limit:
        res = fundamental_group_trivial(simp)
        pi1 = "trivial" if res else "inconclusive"
    if not (low and dim_ok):
        verdict = "not spherical"
    elif d <= 1 or pi1 == "trivial":
        # for d <= 1 the required connectivity is read off from homology
        verdict = "spherical (π₁ verified)"
    else:
        verdict = "homology-spherical"
    return SphericityReport(d, dim, h, dim_ok, low, pi1, verdict)


def order_complex(elements: Sequence[Hashable], leq: Callable) -> FlagComplex:
    """Chains of a finite poset as a flag complex."""
    return FlagComplex.from_relation(list(elements), lambda a, b: a != b and (leq(a, b) or leq(b, a)))


# ---- ideal edges and V-decompositions ----------------------------------------


def enumerate_ideal_edges(n: int) -> list[IdealEdge]:
    if n < 2:
        raise ValueError("rank must be at least 2")
    out = []
    for side in range(1, full_mask(n) + 1, 2):
        e = IdealEdge.try_make(side, n)
        if e is not None and e.side == side:
            out.append(e)
    return sorted(out, key=lambda e: (bin(e.side).count("1"), e.side))


@dataclass(frozen=True)
class VDecomposition:
    """Blocks X_1, Xbar_1, ..., X_m, Xbar_m, Y_1, ..., Y_k of the directions."""

    n: int
    x: tuple[int, ...]
    xbar: tuple[int, ...]
    y: tuple[int, ...]

    @property
    def m(self) -> int:
        return len(self.x)

    @property
    def k(self) -> int:
        return len(self.y)

    def blocks(self) -> list[int]:
        out = []
        for a, b in zip(self.x, self.xbar):
            out += [a, b]
        return out + list(self.y)

    def block_names(self) -> list[str]:
        names = []
        for i in range(1, self.m + 1):
            names += [f"X{i}", f"~X{i}"]
        return names + [f"Y{j}" for j in range(1, self.k + 1)]

    def validate(self, src: DotSource | None = None) -> "VDecomposition":
        blocks = self.blocks()
        if self.m < 1:
            raise InvalidDecomposition("need m >= 1")
        union = 0
        for b in blocks:
            if not b or union & b:
                raise InvalidDecomposition("blocks must be nonempty and disjoint")
            union |= b
        if union != full_mask(self.n):
            raise InvalidDecomposition("blocks must cover the directions")
        for i in range(1, self.m + 1):
            if not self.x[i - 1] >> (2 * i - 2) & 1 or not self.xbar[i - 1] >> (2 * i - 1) & 1:
                raise InvalidDecomposition(f"X{i} must hold e{i} and ~X{i} its reverse")
        if src is not None:
            for i in range(1, self.m + 1):
                for side in (self.x[i - 1], self.xbar[i - 1]):
                    if side in (1 << (2 * i - 2), 1 << (2 * i - 1)):
                        continue  # |e_i| = |ebar_i|
                    if compare_sets(side, 1 << (2 * i - 2), src) < 0:
                        raise InvalidDecomposition(f"a block for petal {i} has norm below |e{i}|")
        return self

    @classmethod
    def of_rose(cls, n: int) -> "VDecomposition":
        return cls(n, tuple(1 << (2 * i) for i in range(n)), tuple(1 << (2 * i + 1) for i in range(n)), ())

    def to_json(self) -> dict:
        return {
            name: [("e" if d % 2 == 0 else "E") + str(petal_of(d)) for d in dirs_of(b)]
            for name, b in zip(self.block_names(), self.blocks())
        }


def enumerate_v_ideal_edges(v: VDecomposition) -> list[IdealEdge]:
    """Partitions of the block set into two parts of >= 2 blocks separating some X_i from Xbar_i."""
    blocks = v.blocks()
    nb = len(blocks)
    seen = {}
    for sel in range(1, 1 << nb):
        if not sel & 1:
            continue  # take the part holding X_1
        if bin(sel).count("1") < 2 or nb - bin(sel).count("1") < 2:
            continue
        if not any((sel >> (2 * i) & 1) != (sel >> (2 * i + 1) & 1) for i in range(v.m)):
            continue
        side = 0
        for b in range(nb):
            if sel >> b & 1:
                side |= blocks[b]
        e = IdealEdge(side, v.n)
        seen[e.side] = e
    return sorted(seen.values(), key=lambda e: (bin(e.side).count("1"), e.side))


def ascent_predicate(src: DotSource, mode: str = "any", m: int | None = None) -> Callable[[IdealEdge], bool]:
    """``any``: ascending for some split petal; ``first``: ascending for e_1;
    ``block``: ascending for some e_i with i <= m."""
    if mode == "any":
        return lambda a: is_ascending(a, src)
    if mode == "first":
        return lambda a: is_ascending_for(a, 1, src)
    if mode == "block":
        return lambda a: any(is_ascending_for(a, i, src) for i in range(1, (m or src.n) + 1))
    raise ValueError(mode)


def build_Z(v: VDecomposition, src: DotSource, mode: str = "any") -> tuple[FlagComplex, list[IdealEdge]]:
    """Flag complex of ascending V-ideal edges, and the list of descending ones."""
    asc = ascent_predicate(src, mode, v.m)
    edges = enumerate_v_ideal_edges(v)
    up, down = [], []
    for e in edges:
        (up if asc(e) else down).append(e)
    return FlagComplex.from_relation(up, compatible), down


def build_Z_rose(src: DotSource) -> FlagComplex:
    up = [e for e in enumerate_ideal_edges(src.n) if is_ascending(e, src)]
    return FlagComplex.from_relation(up, compatible)


def build_I(n: int) -> FlagComplex:
    return FlagComplex.from_relation(enumerate_ideal_edges(n), compatible)


def order_petals_by_norm(src: DotSource) -> list[int]:
    """Petals sorted by decreasing |e_i|."""
    from functools import cmp_to_key

    def cmp(i, j):
        return -compare_sets(1 << (2 * i - 2), 1 << (2 * j - 2), src)

    return sorted(range(1, src.n + 1), key=cmp_to_key(cmp))


def relabel_source(src: DotSource, order: list[int]) -> DotSource:
    """Re-index petals so that ``order[0]`` becomes petal 1, and so on."""
    from .stars import DotData

    perm = []
    for i in order:
        perm += [2 * i - 2, 2 * i - 1]
    t = src.tensor[:, perm][:, :, perm]
    return DotData.from_tensor(t)


def sample_decomposition(src: DotSource, m: int, k: int, rng: np.random.Generator, tries: int = 200):
    """Random V-decomposition with X_i holding e_i, rejected until |X_i|, |Xbar_i| >= |e_i|.

    Assumes petal 1 has the largest norm.  Directions not forced into X blocks
    are spread over X, Xbar and Y blocks at random, every Y block nonempty.
    """
    n = src.n
    free = [d for d in range(2 * n) if petal_of(d) > m]
    if len(free) < k:
        raise InvalidDecomposition("not enough directions for the Y blocks")
    for _ in range(tries):
        x = [1 << (2 * i) for i in range(m)]
        xb = [1 << (2 * i + 1) for i in range(m)]
        y = [0] * k
        order = list(rng.permutation(free))
        for j in range(k):
            y[j] |= 1 << int(order[j])
        for d in order[k:]:
            slot = int(rng.integers(0, 2 * m + k))
            if slot < m:
                x[slot] |= 1 << int(d)
            elif slot < 2 * m:
                xb[slot - m] |= 1 << int(d)
            else:
                y[slot - 2 * m] |= 1 << int(d)
        v = VDecomposition(n, tuple(x), tuple(xb), tuple(y))
        try:
            return v.validate(src)
        except InvalidDecomposition:
            continue
        except InsufficientWords:
            continue
    return None


@dataclass
class ZVInstance:
    v: VDecomposition
    complex: FlagComplex
    descending: list[IdealEdge]
    report: SphericityReport
    src_info: dict = field(default_factory=dict)

    @property
    def expected_dim(self) -> int:
        return 2 * self.v.m + self.v.k - 4

    def to_json(self) -> dict:
        return {
            "m": self.v.m,
            "k": self.v.k,
            "blocks": self.v.to_json(),
            "ascending": [str(e) for e in self.complex.labels],
            "descending": [str(e) for e in self.descending],
            "complex": self.complex.to_json(),
            "sphericity": self.report.to_json(),
        }


def zv_instance(v: VDecomposition, src: DotSource, mode: str = "any") -> ZVInstance:
    cpx, down = build_Z(v, src, mode)
    d = 2 * v.m + v.k - 4
    rep = sphericity_report(cpx, d)
    return ZVInstance(v, cpx, down, rep, src.describe())


def complex_json(c: FlagComplex) -> str:
    return json.dumps(c.to_json(), sort_keys=True)


def one_block_dichotomy(inst: ZVInstance) -> bool:
    """For m = 1: a full (k-2)-sphere without descending edges, acyclic otherwise."""
    if inst.v.m != 1:
        raise ValueError("only defined for m = 1")
    betti = inst.report.homology.betti
    if inst.descending:
        return all(b == 0 for b in betti.values())
    top = inst.v.k - 2
    return inst.report.dim == top and all(b == (1 if d == top else 0) for d, b in betti.items())
