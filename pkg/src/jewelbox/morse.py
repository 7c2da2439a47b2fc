"""Marked roses, the norm mu, blowups of ideal trees and ascending links.

mu(rho) = (|rho|_0, |rho|_{w_1}, |rho|_{w_2}, ...) where |rho|_w is the
cyclic length of the marked image of w, |rho|_0 sums this over the W0
classes, and w_1, w_2, ... run through conjugacy classes in shortlex order.
Comparisons read coordinates lazily and report a tie once the word budget is
spent instead of guessing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import networkx as nx
import numpy as np

from .complexes import FlagComplex, HomologyReport, build_Z_rose, homology, sphericity_report
from .freegroup import (
    Marking,
    _classes_of_length,
    cyclic_reduce,
    free_reduce,
    generate_W0,
)
from .graphs import Graph, _DSU
from .stars import IdealEdge, MarkingDots, compatible, is_ascending

LESS, GREATER, TIE = "LessThan", "GreaterThan", "TieAtBudget"


class TieAtBudget(RuntimeError):
    pass


class Incompatible(ValueError):
    pass


class NotMaximalTree(ValueError):
    pass


class ContainsBlownEdge(ValueError):
    pass


@dataclass(frozen=True)
class MarkedRose:
    marking: Marking

    def __post_init__(self):
        self.marking.validate()

    @property
    def n(self) -> int:
        return self.marking.n

    @classmethod
    def identity(cls, n: int) -> "MarkedRose":
        return cls(Marking.identity(n))

    @classmethod
    def parse(cls, texts: Sequence[str]) -> "MarkedRose":
        return cls(Marking.parse(texts))

    def __str__(self):
        return "[" + ",".join(self.marking.to_strings()) + "]"


def mu_norm(rho: MarkedRose, w: Sequence[int]) -> int:
    return len(cyclic_reduce(rho.marking.apply(w)))


def default_budget(rho: MarkedRose) -> int:
    return max(4, 4 * max(len(w) for w in rho.marking.images))


class MuValue:
    """Lazily evaluated mu-vector of a marked rose."""

    def __init__(self, rho: MarkedRose):
        self.rho = rho
        self.w0 = sum(mu_norm(rho, w.letters) for w in generate_W0(rho.n))
        self._coords: dict[int, list[int]] = {}

    def length_block(self, length: int) -> list[int]:
        if length not in self._coords:
            self._coords[length] = [mu_norm(self.rho, w) for w in _classes_of_length(self.rho.n, length)]
        return self._coords[length]

    def prefix(self, budget: int) -> tuple[int, ...]:
        out = [self.w0]
        for length in range(1, budget + 1):
            out += self.length_block(length)
        return tuple(out)


def mu_compare(a: MarkedRose | MuValue, b: MarkedRose | MuValue, budget: int) -> str:
    ma = a if isinstance(a, MuValue) else MuValue(a)
    mb = b if isinstance(b, MuValue) else MuValue(b)
    if ma.rho.n != mb.rho.n:
        raise ValueError("rank mismatch")
    if ma.w0 != mb.w0:
        return GREATER if ma.w0 > mb.w0 else LESS
    for length in range(1, budget + 1):
        for x, y in zip(ma.length_block(length), mb.length_block(length)):
            if x != y:
                return GREATER if x > y else LESS
    return TIE


def equivalent(a: MarkedRose, b: MarkedRose) -> bool:
    """Same point of the rose complex: b's marking is a's up to petal symmetry and conjugation."""
    if a.n != b.n:
        return False
    inv = a.marking.inverse()
    theta = [b.marking.apply(inv.images[j]) for j in range(a.n)]
    halves = []
    letters = []
    for t in theta:
        if len(t) % 2 == 0:
            return False
        h = len(t) // 2
        p, s = t[:h], t[h]
        if free_reduce(p + (s,) + tuple(-x for x in reversed(p))) != t:
            return False
        halves.append(p)
        letters.append(s)
    if sorted(abs(s) for s in letters) != list(range(1, a.n + 1)):
        return False
    for u in halves:
        ui = tuple(-x for x in reversed(u))
        if all(free_reduce(ui + t + u) == (s,) for t, s in zip(theta, letters)):
            return True
    return False


# ---- blowups -------------------------------------------------------------------


@dataclass
class Blowup:
    """The graph obtained by pulling an ideal tree out of the rose.

    ``where[d]`` is the vertex at the terminus of direction d; petal e_j runs
    from ``where[ebar_j]`` to ``where[e_j]``.  Tree edge t joins
    ``tree[t][0]`` to ``tree[t][1]`` and realizes ``edges[t]``.
    """

    n: int
    edges: list[IdealEdge]
    where: list[int]
    tree: list[tuple[int, int]]

    @property
    def num_vertices(self) -> int:
        return len(self.tree) + 1

    def graph(self) -> Graph:
        es = [(self.where[2 * j + 1], self.where[2 * j]) for j in range(self.n)]
        return Graph(self.num_vertices, tuple(es + self.tree))

    def tree_path(self, a: int, b: int) -> list[int]:
        """Signed letters (n + t + 1 for tree edge t) along the tree from a to b."""
        g = nx.Graph()
        g.add_nodes_from(range(self.num_vertices))
        for t, (u, v) in enumerate(self.tree):
            g.add_edge(u, v, t=t)
        nodes = nx.shortest_path(g, a, b)
        out = []
        for u, v in zip(nodes, nodes[1:]):
            t = g[u][v]["t"]
            out.append(self.n + t + 1 if self.tree[t] == (u, v) else -(self.n + t + 1))
        return out

    def lift(self, letters: Sequence[int], base: int = 0) -> tuple[int, ...]:
        """A petal loop of the rose as a loop at ``base`` in the blowup."""
        out: list[int] = []
        for x in letters:
            j = abs(x)
            start, end = self.where[2 * j - 1], self.where[2 * j - 2]
            piece = self.tree_path(base, start) + [j] + self.tree_path(end, base)
            if x < 0:
                piece = [-y for y in reversed(piece)]
            out.extend(piece)
        return free_reduce(out)

    def splits_realized(self) -> list[int]:
        """Side masks of the partitions cut out by the tree edges (for checking)."""
        out = []
        for u, v in self.tree:
            g = nx.Graph()
            g.add_nodes_from(range(self.num_vertices))
            g.add_edges_from(e for e in self.tree if e != (u, v))
            comp = nx.node_connected_component(g, v)
            out.append(sum(1 << d for d in range(2 * self.n) if self.where[d] in comp))
        return out


def blowup(n: int, tree: Sequence[IdealEdge]) -> Blowup:
    for a, b in combinations(tree, 2):
        if a == b or not compatible(a, b):
            raise Incompatible(f"{a} and {b} are not compatible")
    where = [0] * (2 * n)
    links: list[tuple[int, int]] = []
    nverts = 1
    for alpha in tree:
        adj: dict[int, list[tuple[int, int]]] = {v: [] for v in range(nverts)}
        for t, (u, v) in enumerate(links):
            adj[u].append((v, t))
            adj[v].append((u, t))

        def far(v, w):
            seen = {w}
            stack = [w]
            while stack:
                x = stack.pop()
                for y, _ in adj[x]:
                    if y != v and y not in seen:
                        seen.add(y)
                        stack.append(y)
            return sum(1 << d for d in range(2 * n) if where[d] in seen)

        side = alpha.side
        host = None
        for v in range(nverts):
            branches = [(w, t, far(v, w)) for w, t in adj[v]]
            if all(b & side == b or b & side == 0 for _, _, b in branches):
                host = (v, branches)
                break
        if host is None:
            raise Incompatible(f"{alpha} does not fit the tree")
        v, branches = host
        new = nverts
        nverts += 1
        for d in range(2 * n):
            if where[d] == v and side >> d & 1:
                where[d] = new
        for w, t, b in branches:
            if b and b & side == b:
                u0, v0 = links[t]
                links[t] = (new, v0) if u0 == v else (u0, new)
        links.append((v, new))
    return Blowup(n, list(tree), where, links)


def neighbor_rose(rho: MarkedRose, bl: Blowup, t_mask: int) -> MarkedRose:
    """Collapse the maximal tree ``t_mask`` (a set of old petals, bit j-1 for petal j)."""
    k = len(bl.tree)
    if t_mask >> bl.n:
        raise ContainsBlownEdge("the collapsed tree may only use old petals")
    petals = [j for j in range(1, bl.n + 1) if t_mask >> (j - 1) & 1]
    dsu = _DSU(bl.num_vertices)
    if len(petals) != k:
        raise NotMaximalTree(f"need {k} petals, got {len(petals)}")
    for j in petals:
        if not dsu.union(bl.where[2 * j - 1], bl.where[2 * j - 2]):
            raise NotMaximalTree("the chosen petals contain a cycle")
    keep = [j for j in range(1, bl.n + 1) if j not in petals] + [bl.n + t + 1 for t in range(k)]
    relabel = {old: new for new, old in enumerate(keep, start=1)}
    images = []
    for img in rho.marking.images:
        lifted = bl.lift(img)
        out = [relabel[abs(x)] * (1 if x > 0 else -1) for x in lifted if abs(x) in relabel]
        images.append(free_reduce(out))
    return MarkedRose(Marking(tuple(images)))


def maximal_trees(bl: Blowup) -> list[int]:
    k = len(bl.tree)
    out = []
    for combo in combinations(range(1, bl.n + 1), k):
        dsu = _DSU(bl.num_vertices)
        if all(dsu.union(bl.where[2 * j - 1], bl.where[2 * j - 2]) for j in combo):
            out.append(sum(1 << (j - 1) for j in combo))
    return out


def ideal_trees(n: int, edges: Sequence[IdealEdge] | None = None) -> list[tuple[IdealEdge, ...]]:
    from .complexes import enumerate_ideal_edges

    edges = list(edges) if edges is not None else enumerate_ideal_edges(n)
    g = nx.Graph()
    g.add_nodes_from(range(len(edges)))
    g.add_edges_from((i, j) for i, j in combinations(range(len(edges)), 2) if compatible(edges[i], edges[j]))
    return [tuple(edges[i] for i in sorted(c)) for c in nx.enumerate_all_cliques(g)]


# ---- ascending links -----------------------------------------------------------


@dataclass
class LinkVertex:
    rose: MarkedRose
    mu: MuValue
    sources: list[tuple[tuple[IdealEdge, ...], int]] = field(default_factory=list)

    def label(self) -> str:
        a, t = self.sources[0]
        return "{" + ";".join(str(e) for e in a) + "}/T=" + ",".join(
            str(j + 1) for j in range(self.rose.n) if t >> j & 1
        )


@dataclass
class AscendingLink:
    rho: MarkedRose
    budget: int
    vertices: list[LinkVertex]
    complex: FlagComplex
    reduced: FlagComplex
    homology: HomologyReport
    merged: int  # (tree, T) pairs that produced an already-seen rose
    factorization_ok: bool

    def to_json(self) -> dict:
        return {
            "rose": self.rho.marking.to_strings(),
            "budget": self.budget,
            "vertices": [
                {"rose": v.rose.marking.to_strings(), "from": v.label()} for v in self.vertices
            ],
            "edges": sorted([list(e) for e in self.complex.adjacency]),
            "reduced_vertices": len(self.reduced.labels),
            "merged_pairs": self.merged,
            "factorization_ok": self.factorization_ok,
            "homology": self.homology.to_json(),
        }


def _bucket_key(mu: MuValue) -> tuple:
    return mu.prefix(2)


def ascending_link(rho: MarkedRose, budget: int | None = None, max_n: int = 3) -> AscendingLink:
    """All neighbouring roses with larger mu, with the common-blowup adjacency."""
    if rho.n > max_n:
        raise ValueError(f"ascending links are only enumerated for rank <= {max_n}")
    budget = budget or default_budget(rho)
    base = MuValue(rho)
    dots = MarkingDots(rho.marking, budget=1, max_budget=budget)
    vertices: list[LinkVertex] = []
    buckets: dict[tuple, list[int]] = {}
    merged = 0
    fact_ok = True
    for tree in ideal_trees(rho.n):
        bl = blowup(rho.n, tree)
        for t in maximal_trees(bl):
            nb = neighbor_rose(rho, bl, t)
            mv = MuValue(nb)
            res = mu_compare(mv, base, budget)
            if res == TIE:
                raise TieAtBudget(f"neighbour {nb} ties with {rho} through length {budget}")
            if res != GREATER:
                continue
            if not any(is_ascending(a, dots) for a in tree):
                fact_ok = False
            key = _bucket_key(mv)
            hit = None
            for idx in buckets.get(key, []):
                if equivalent(vertices[idx].rose, nb):
                    hit = idx
                    break
            if hit is None:
                buckets.setdefault(key, []).append(len(vertices))
                vertices.append(LinkVertex(nb, mv, [(tree, t)]))
            else:
                vertices[hit].sources.append((tree, t))
                merged += 1

    def adjacent(u: LinkVertex, v: LinkVertex) -> bool:
        for a, _ in u.sources:
            for b, _ in v.sources:
                if all(x == y or compatible(x, y) for x in a for y in b):
                    return True
        return False

    cpx = FlagComplex.from_relation(vertices, adjacent)
    red = cpx.strong_collapse()
    return AscendingLink(rho, budget, vertices, cpx, red, homology(red), merged, fact_ok)


@dataclass
class LinkComparison:
    link: AscendingLink
    z_homology: HomologyReport
    z_size: int
    match: bool
    spherical: bool

    def to_json(self) -> dict:
        return {
            "link": self.link.to_json(),
            "z_vertices": self.z_size,
            "z_homology": self.z_homology.to_json(),
            "homology_match": self.match,
            "homology_spherical": self.spherical,
        }


def compare_link_with_Z(rho: MarkedRose, budget: int | None = None) -> LinkComparison:
    link = ascending_link(rho, budget)
    dots = MarkingDots(rho.marking, budget=1, max_budget=link.budget)
    z = build_Z_rose(dots)
    zrep = sphericity_report(z, 2 * rho.n - 4)
    hz = zrep.homology
    match = link.homology.betti == hz.betti
    d = 2 * rho.n - 4
    conc = all(b == 0 for deg, b in link.homology.betti.items() if deg != d)
    spherical = conc and zrep.verdict != "not spherical"
    return LinkComparison(link, hz, len(z.labels), match, spherical)


def random_marking(n: int, rng: np.random.Generator, steps: int = 3, max_len: int = 2) -> Marking:
    """A product of random elementary Nielsen moves, kept short."""
    while True:
        imgs = [(i,) for i in range(1, n + 1)]
        for _ in range(steps):
            i, j = rng.choice(n, size=2, replace=False)
            eps = int(rng.choice([1, -1]))
            gj = imgs[j] if eps == 1 else tuple(-x for x in reversed(imgs[j]))
            if rng.random() < 0.5:
                imgs[i] = free_reduce(imgs[i] + gj)
            else:
                imgs[i] = free_reduce(gj + imgs[i])
        m = Marking(tuple(imgs))
        if max(len(w) for w in m.images) <= max_len and max(len(w) for w in m.inverse().images) <= max_len:
            return m

