"""Jewel polytopes J(G) in exact rational arithmetic.

J(G) sits in the simplex {x >= 0, sum(x) = 1} indexed by the edges of G and is
cut out by x_S >= c_S for every proper core subset S (with c_S depending only on
the rank of S) and x_i >= 0 for every non-loop edge i.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, permutations
from math import comb

import numpy as np

from .graphs import (
    ForestCollapse,
    Graph,
    bits,
    core_of,
    enumerate_cores,
    is_forest,
    popcount,
    rank_h1,
    spanning_trees,
    subset_key,
)


class InfeasibleSchedule(ValueError):
    pass


class MismatchedSchedule(ValueError):
    pass


class TooLarge(ValueError):
    pass


@dataclass(frozen=True)
class TruncationSchedule:
    n: int
    c: tuple[Fraction, ...]  # c[r - 1] is the constant for rank r
    c_next: Fraction  # c_{n+1}, the top of the smoothing window for rank n

    def __post_init__(self):
        vals = list(self.c) + [self.c_next]
        if len(self.c) != self.n:
            raise ValueError("need one constant per rank 1..n")
        if vals[0] <= 0 or self.c_next > Fraction(1, 3):
            raise ValueError("constants must lie in (0, 1/3]")
        for lo, hi in zip(vals, vals[1:]):
            if not hi > 2 * lo:
                raise ValueError("each constant must exceed twice the previous one")

    def const(self, rank: int) -> Fraction:
        return self.c[rank - 1]

    def upper(self, rank: int) -> Fraction:
        """Right end of the window on which the rank-``rank`` smoothing function rises."""
        return self.c[rank] if rank < self.n else self.c_next


def make_schedule(n: int) -> TruncationSchedule:
    """c_r = 3^(r - n - 2) for r = 1..n, so c_n = 1/9 and c_{n+1} = 1/3."""
    if n < 2:
        raise ValueError("rank must be at least 2")
    return TruncationSchedule(n, tuple(Fraction(1, 3 ** (n + 2 - r)) for r in range(1, n + 1)), Fraction(1, 3))


@dataclass(frozen=True)
class Constraint:
    mask: int  # the subset S; the inequality is x_S >= constant
    constant: Fraction
    core: bool

    def coeffs(self, size: int) -> tuple[int, ...]:
        return tuple((self.mask >> i) & 1 for i in range(size))

    def value(self, x) -> Fraction:
        return sum((x[i] for i in bits(self.mask)), Fraction(0))

    def slack(self, x):
        return self.value(x) - self.constant


@dataclass
class JewelPolytope:
    graph: Graph
    schedule: TruncationSchedule
    constraints: list[Constraint]
    vertices: list[tuple[Fraction, ...]] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.graph.num_edges - 1

    def contains(self, x, tol=0) -> bool:
        if sum(x) != 1 and abs(sum(x) - 1) > tol:
            return False
        return all(c.slack(x) >= -tol for c in self.constraints)

    def active(self, x, tol=0) -> frozenset[int]:
        """Masks of the constraints tight at ``x``."""
        return frozenset(c.mask for c in self.constraints if abs(c.slack(x)) <= tol)

    def constraint(self, mask: int) -> Constraint:
        for c in self.constraints:
            if c.mask == mask:
                return c
        raise KeyError(mask)


def _check_schedule(g: Graph, sched: TruncationSchedule) -> None:
    if sched.n != g.rank():
        raise MismatchedSchedule(f"schedule is for rank {sched.n}, graph has rank {g.rank()}")


def h_representation(g: Graph, sched: TruncationSchedule) -> JewelPolytope:
    _check_schedule(g, sched)
    cons = []
    for e in range(g.num_edges):
        if not g.is_loop(e):
            cons.append(Constraint(1 << e, Fraction(0), False))
    for s in enumerate_cores(g):
        if s != g.full:
            cons.append(Constraint(s, sched.const(rank_h1(g, s)), True))
    cons.sort(key=lambda c: subset_key(c.mask))
    return JewelPolytope(g, sched, cons)


@dataclass(frozen=True)
class CombinatorialVertex:
    tree: int
    order: tuple[int, ...]  # petals of G/T, in the chosen order
    coords: tuple[Fraction, ...]


def vertices_combinatorial(g: Graph, sched: TruncationSchedule) -> list[CombinatorialVertex]:
    """One vertex per maximal tree T and ordering of the edges outside T.

    Along the chain core(T + p_1) < core(T + p_1 + p_2) < ... each new core
    adds exactly one new positive coordinate, so x_{p_i} = c_i - c_{i-1} and
    the last petal takes up the remaining volume.
    """
    p = h_representation(g, sched)
    out = []
    for tree in spanning_trees(g):
        petals = [e for e in range(g.num_edges) if not tree >> e & 1]
        for order in permutations(petals):
            x = [Fraction(0)] * g.num_edges
            union = tree
            for e in order[:-1]:
                union |= 1 << e
                s = core_of(g, union)
                # solve x_S = c_S for the single unknown coordinate
                known = sum((x[j] for j in bits(s) if j != e), Fraction(0))
                x[e] = sched.const(rank_h1(g, s)) - known
            x[order[-1]] = 1 - sum(x)
            x = tuple(x)
            bad = [c for c in p.constraints if c.slack(x) < 0]
            if bad:
                raise InfeasibleSchedule(f"vertex {x} violates x_S >= c_S for S={bits(bad[0].mask)}")
            out.append(CombinatorialVertex(tree, order, x))
    return out


def _solve_exact(rows: list[list[Fraction]], rhs: list[Fraction]):
    n = len(rows)
    a = [list(r) + [b] for r, b in zip(rows, rhs)]
    for col in range(n):
        piv = next((i for i in range(col, n) if a[i][col] != 0), None)
        if piv is None:
            return None
        a[col], a[piv] = a[piv], a[col]
        pv = a[col][col]
        a[col] = [v / pv for v in a[col]]
        for i in range(n):
            if i != col and a[i][col] != 0:
                f = a[i][col]
                a[i] = [vi - f * vc for vi, vc in zip(a[i], a[col])]
    return tuple(a[i][n] for i in range(n))


def vertices_oracle(p: JewelPolytope, max_systems: int = 2_000_000) -> list[tuple[Fraction, ...]]:
    """Brute-force vertex enumeration: every m-subset of constraints plus sum(x) = 1.

    A float pass screens singular or clearly infeasible systems; every survivor
    is re-solved and re-checked in exact arithmetic.
    """
    size = p.graph.num_edges
    m = size - 1
    cons = p.constraints
    total = comb(len(cons), m)
    if total > max_systems:
        raise TooLarge(f"{total} linear systems")
    if m == 0:
        return [(Fraction(1),)]
    coeff = np.array([c.coeffs(size) for c in cons], dtype=float)
    const = np.array([float(c.constant) for c in cons])
    combos = np.array(list(combinations(range(len(cons)), m)), dtype=int)
    mats = np.concatenate([coeff[combos], np.ones((len(combos), 1, size))], axis=1)
    rhs = np.concatenate([const[combos], np.ones((len(combos), 1))], axis=1)
    dets = np.linalg.det(mats)
    ok = np.abs(dets) > 0.5  # 0/1 integer matrices: determinants are integers
    sols = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
    feasible = np.all(sols @ coeff.T - const >= -1e-9, axis=1)
    found = set()
    for idx in np.flatnonzero(ok)[feasible]:
        chosen = combos[idx]
        rows = [[Fraction(v) for v in cons[i].coeffs(size)] for i in chosen] + [[Fraction(1)] * size]
        x = _solve_exact(rows, [cons[i].constant for i in chosen] + [Fraction(1)])
        if x is not None and all(c.slack(x) >= 0 for c in cons):
            found.add(x)
    return sorted(found)


def build_jewel(g: Graph, sched: TruncationSchedule | None = None) -> JewelPolytope:
    sched = sched or make_schedule(g.rank())
    p = h_representation(g, sched)
    p.vertices = sorted(v.coords for v in vertices_combinatorial(g, sched))
    return p


@dataclass(frozen=True)
class FaceChain:
    sets: tuple[int, ...]  # S_1..S_k: forest singletons first, then nested cores
    t: int

    @property
    def k(self) -> int:
        return len(self.sets)

    @property
    def unions(self) -> tuple[int, ...]:
        out, u = [], 0
        for s in self.sets:
            u |= s
            out.append(u)
        return tuple(out)

    @property
    def forest(self) -> int:
        return self.unions[self.t - 1] if self.t else 0

    @property
    def cores(self) -> tuple[int, ...]:
        """A_0 = everything, A_1 = S_k, ..., A_r = S_{t+1} (decreasing)."""
        return tuple(reversed(self.sets[self.t:]))

    def blocks(self, full: int) -> tuple[int, ...]:
        """V_0 = complement of U_k and V_l = U_{k+1-l} - U_{k-l} for l = 1..r."""
        u = (0,) + self.unions
        k = self.k
        out = [full & ~u[k]]
        for ell in range(1, k - self.t + 1):
            out.append(u[k + 1 - ell] & ~u[k - ell])
        return tuple(out)

    def to_json(self) -> dict:
        return {"sets": [bits(s) for s in self.sets], "t": self.t}


def _admissible_cores(g: Graph, forest: int) -> list[int]:
    return [s for s in enumerate_cores(g) if s != g.full and core_of(g, forest | s) == s]


def face_chains(g: Graph, sched: TruncationSchedule, k: int) -> list[FaceChain]:
    """Every admissible set of k equations x_S = c_S, one per codimension-k face."""
    _check_schedule(g, sched)
    m = g.num_edges - 1
    if not 0 <= k <= m:
        raise ValueError("codimension out of range")
    non_loops = [e for e in range(g.num_edges) if not g.is_loop(e)]
    out = []
    for t in range(0, min(k, len(non_loops)) + 1):
        for combo in combinations(non_loops, t):
            forest = sum(1 << e for e in combo)
            if not is_forest(g, forest):
                continue
            singles = tuple(1 << e for e in combo)
            r = k - t
            if r == 0:
                if forest != g.full:
                    out.append(FaceChain(singles, t))
                continue
            cands = _admissible_cores(g, forest)

            def extend(chain):
                if len(chain) == r:
                    if (forest | chain[-1]) != g.full:
                        out.append(FaceChain(singles + tuple(chain), t))
                    return
                for s in cands:
                    if chain and not (s & chain[-1] == chain[-1] and s != chain[-1]):
                        continue
                    extend(chain + [s])

            extend([])
    return out


def _affine_dim(points: list[tuple[Fraction, ...]]) -> int:
    if len(points) <= 1:
        return 0
    base = points[0]
    rows = [[a - b for a, b in zip(p, base)] for p in points[1:]]
    rank = 0
    ncols = len(base)
    for col in range(ncols):
        piv = next((i for i in range(rank, len(rows)) if rows[i][col] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        pr = rows[rank]
        for i in range(len(rows)):
            if i != rank and rows[i][col] != 0:
                f = rows[i][col] / pr[col]
                rows[i] = [a - f * b for a, b in zip(rows[i], pr)]
        rank += 1
    return rank


@dataclass
class FaceLattice:
    dim: int
    faces: dict[int, list[frozenset[int]]]  # codimension -> vertex-index sets
    active: dict[frozenset[int], frozenset[int]]  # face -> masks tight on all its vertices

    def f_vector(self) -> tuple[int, ...]:
        """(f_0, ..., f_{dim-1}): numbers of proper faces by dimension."""
        return tuple(len(self.faces.get(self.dim - d, [])) for d in range(self.dim))

    def count(self, codim: int) -> int:
        return len(self.faces.get(codim, []))


def face_lattice(p: JewelPolytope) -> FaceLattice:
    """Faces as the closure of facet vertex sets under intersection."""
    verts = p.vertices or vertices_oracle(p)
    dim = p.dim
    tight = {}
    for c in p.constraints:
        tight[c.mask] = frozenset(i for i, v in enumerate(verts) if c.slack(v) == 0)
    everything = frozenset(range(len(verts)))
    facets = set()
    for s in tight.values():
        if s and _affine_dim([verts[i] for i in s]) == dim - 1:
            facets.add(s)
    faces = {everything}
    frontier = list(facets)
    faces.update(facets)
    while frontier:
        nxt = []
        for f in frontier:
            for h in facets:
                i = f & h
                if i and i not in faces:
                    faces.add(i)
                    nxt.append(i)
        frontier = nxt
    by_codim: dict[int, list[frozenset[int]]] = {}
    active = {}
    for f in faces:
        d = _affine_dim([verts[i] for i in f])
        by_codim.setdefault(dim - d, []).append(f)
        active[f] = frozenset(mask for mask, s in tight.items() if f <= s)
    for lst in by_codim.values():
        lst.sort(key=lambda f: sorted(f))
    return FaceLattice(dim, by_codim, active)


def chain_face(p: JewelPolytope, chain: FaceChain) -> frozenset[int]:
    """Vertex indices of ``p`` satisfying every equation of ``chain``."""
    out = []
    for i, v in enumerate(p.vertices):
        if all(p.constraint(s).slack(v) == 0 for s in chain.sets):
            out.append(i)
    return frozenset(out)


@dataclass(frozen=True)
class FaceIdentification:
    forest: int
    embedded: tuple[tuple[Fraction, ...], ...]
    face_vertices: tuple[tuple[Fraction, ...], ...]

    @property
    def matches(self) -> bool:
        return sorted(self.embedded) == sorted(self.face_vertices)


def face_of_collapse(c: ForestCollapse, sched: TruncationSchedule) -> FaceIdentification:
    """Embed J(G') in J(G) by zero-padding the collapsed coordinates."""
    _check_schedule(c.source, sched)
    _check_schedule(c.target, sched)
    small = build_jewel(c.target, sched)
    big = build_jewel(c.source, sched)
    emap = c.edge_map()
    embedded = []
    for v in small.vertices:
        x = [Fraction(0)] * c.source.num_edges
        for s, t in emap.items():
            x[s] = v[t]
        embedded.append(tuple(x))
    on_face = tuple(v for v in big.vertices if all(v[i] == 0 for i in bits(c.forest)))
    return FaceIdentification(c.forest, tuple(sorted(embedded)), tuple(sorted(on_face)))


def hrep_text(p: JewelPolytope) -> str:
    size = p.graph.num_edges
    lines = [" ".join(["1"] * size) + " = 1"]
    for c in p.constraints:
        lines.append(" ".join(map(str, c.coeffs(size))) + f" >= {c.constant}")
    return "\n".join(lines) + "\n"


def off_text(p: JewelPolytope) -> str:
    lines = ["OFF", f"{len(p.vertices)} 0 0"]
    lines += [" ".join(str(v) for v in x) for x in p.vertices]
    return "\n".join(lines) + "\n"


def fvector_csv(lat: FaceLattice) -> str:
    rows = ["dim,count"] + [f"{d},{c}" for d, c in enumerate(lat.f_vector())]
    return "\n".join(rows) + "\n"


def rose_faces(g: Graph) -> list[int]:
    """Maximal trees; collapsing one gives a rose face of the simplex."""
    return spanning_trees(g)


def vertex_count_expected(g: Graph) -> int:
    from math import factorial

    return len(spanning_trees(g)) * factorial(g.rank())


__all__ = [
    "TruncationSchedule",
    "make_schedule",
    "h_representation",
    "vertices_combinatorial",
    "vertices_oracle",
    "face_chains",
    "face_lattice",
    "face_of_collapse",
    "build_jewel",
    "popcount",
]
