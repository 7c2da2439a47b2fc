"""Finite graphs with half-edges: cores, forests, ranks, maximal trees, collapses.

Edge subsets are bitmasks over the edge index set; bit ``i`` is edge ``i``.
A subgraph is the closure of its edge set, so its vertex set is implied.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

MAX_ENUM_EDGES = 21  # enumerate_cores walks 2^(m+1) subsets


class TooLarge(ValueError):
    pass


class NotAForest(ValueError):
    pass


class NotCore(ValueError):
    pass


def mask_of(edges: Iterable[int]) -> int:
    m = 0
    for e in edges:
        m |= 1 << e
    return m


def bits(mask: int) -> list[int]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def subset_key(mask: int) -> tuple[int, int]:
    return (popcount(mask), mask)


class _DSU:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        return True


@dataclass(frozen=True)
class Graph:
    """Connected multigraph; edge ``i`` runs from ``edges[i][0]`` to ``edges[i][1]``.

    Half-edge ``2i`` sits at the origin of edge ``i`` and ``2i + 1`` at its terminus.
    """

    num_vertices: int
    edges: tuple[tuple[int, int], ...]
    _cache: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple((int(u), int(v)) for u, v in self.edges))
        for u, v in self.edges:
            if not (0 <= u < self.num_vertices and 0 <= v < self.num_vertices):
                raise ValueError(f"edge ({u}, {v}) has an endpoint out of range")

    @classmethod
    def from_json(cls, data) -> "Graph":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(int(data["vertices"]), tuple(tuple(e) for e in data["edges"]))

    def to_json(self) -> dict:
        return {"vertices": self.num_vertices, "edges": [list(e) for e in self.edges]}

    @classmethod
    def rose(cls, n: int) -> "Graph":
        return cls(1, tuple((0, 0) for _ in range(n)))

    @classmethod
    def theta(cls) -> "Graph":
        return cls(2, ((0, 1), (0, 1), (0, 1)))

    @property
    def m(self) -> int:
        """Largest edge index (edges are indexed 0..m)."""
        return len(self.edges) - 1

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def full(self) -> int:
        return (1 << len(self.edges)) - 1

    def is_loop(self, e: int) -> bool:
        u, v = self.edges[e]
        return u == v

    def half_edge_vertex(self, h: int) -> int:
        return self.edges[h >> 1][h & 1]

    def valence(self) -> list[int]:
        val = [0] * self.num_vertices
        for u, v in self.edges:
            val[u] += 1
            val[v] += 1
        return val

    def vertices_of(self, mask: int) -> set[int]:
        vs = set()
        for e in bits(mask):
            vs.update(self.edges[e])
        return vs

    def components(self, mask: int, vertices: Iterable[int] | None = None) -> int:
        vs = self.vertices_of(mask) if vertices is None else set(vertices)
        dsu = _DSU(self.num_vertices)
        count = len(vs)
        for e in bits(mask):
            u, v = self.edges[e]
            if dsu.union(u, v):
                count -= 1
        return count

    def rank(self) -> int:
        return rank_h1(self, self.full)


@dataclass(frozen=True)
class ValidationReport:
    connected: bool
    separating_edges: tuple[int, ...]
    low_valence_vertices: tuple[int, ...]
    subgraph: bool = False

    @property
    def valid(self) -> bool:
        if self.subgraph:
            return not self.separating_edges
        return self.connected and not self.separating_edges and not self.low_valence_vertices

    def problems(self) -> list[str]:
        out = []
        if not self.connected:
            out.append("disconnected")
        if self.separating_edges:
            out.append("separating edge " + ",".join(map(str, self.separating_edges)))
        if self.low_valence_vertices and not self.subgraph:
            out.append("vertex of valence < 3: " + ",".join(map(str, self.low_valence_vertices)))
        return out


def separating_edges(g: Graph, mask: int) -> list[int]:
    vs = g.vertices_of(mask)
    base = g.components(mask, vs)
    return [e for e in bits(mask) if g.components(mask & ~(1 << e), vs) > base]


def validate(g: Graph, subgraph: bool = False) -> ValidationReport:
    """Flags for connectivity, separating edges and (for ambient graphs) valence < 3."""
    everything = set(range(g.num_vertices))
    connected = g.num_vertices > 0 and g.components(g.full, everything) == 1
    low = tuple(v for v, d in enumerate(g.valence()) if d < 3)
    return ValidationReport(connected, tuple(separating_edges(g, g.full)), low, subgraph)


def rank_h1(g: Graph, mask: int) -> int:
    if mask == 0:
        return 0
    vs = g.vertices_of(mask)
    return popcount(mask) - len(vs) + g.components(mask, vs)


def is_core(g: Graph, mask: int) -> bool:
    return mask != 0 and not separating_edges(g, mask)


def core_of(g: Graph, mask: int) -> int:
    """Largest core subset of ``mask``; 0 when ``mask`` spans a forest."""
    while True:
        sep = separating_edges(g, mask)
        if not sep:
            return mask
        mask &= ~mask_of(sep)


def is_forest(g: Graph, mask: int) -> bool:
    return core_of(g, mask) == 0


def enumerate_cores(g: Graph) -> list[int]:
    """All nonempty core subsets including the whole edge set, by popcount then value."""
    if "cores" in g._cache:
        return list(g._cache["cores"])
    if g.num_edges > MAX_ENUM_EDGES:
        raise TooLarge(f"{g.num_edges} edges is beyond the enumeration bound")
    cores = [s for s in range(1, g.full + 1) if is_core(g, s)]
    cores.sort(key=subset_key)
    g._cache["cores"] = tuple(cores)
    return cores


def spanning_trees(g: Graph) -> list[int]:
    if "trees" in g._cache:
        return list(g._cache["trees"])
    need = g.num_vertices - 1
    non_loops = [e for e in range(g.num_edges) if not g.is_loop(e)]
    trees = []
    for combo in combinations(non_loops, need):
        dsu = _DSU(g.num_vertices)
        if all(dsu.union(*g.edges[e]) for e in combo):
            trees.append(mask_of(combo))
    trees.sort(key=subset_key)
    g._cache["trees"] = tuple(trees)
    return trees


@dataclass(frozen=True)
class ForestCollapse:
    source: Graph
    forest: int
    target: Graph
    relabel: tuple[tuple[int, int], ...]  # (source edge, target edge) for edges outside the forest
    vertex_map: tuple[int, ...]

    def edge_map(self) -> dict[int, int]:
        return dict(self.relabel)

    def image(self, mask: int) -> int:
        mp = self.edge_map()
        return mask_of(mp[e] for e in bits(mask) if e in mp)

    def preimage(self, mask_prime: int) -> int:
        inv = {t: s for s, t in self.relabel}
        return mask_of(inv[e] for e in bits(mask_prime))


def collapse(g: Graph, forest: int) -> ForestCollapse:
    if core_of(g, forest) != 0:
        raise NotAForest("the collapsed set contains a cycle")
    dsu = _DSU(g.num_vertices)
    for e in bits(forest):
        dsu.union(*g.edges[e])
    roots: dict[int, int] = {}
    vmap = []
    for v in range(g.num_vertices):
        r = dsu.find(v)
        if r not in roots:
            roots[r] = len(roots)
        vmap.append(roots[r])
    new_edges = []
    relabel = []
    for e, (u, v) in enumerate(g.edges):
        if forest >> e & 1:
            continue
        relabel.append((e, len(new_edges)))
        new_edges.append((vmap[u], vmap[v]))
    target = Graph(len(roots), tuple(new_edges))
    return ForestCollapse(g, forest, target, tuple(relabel), tuple(vmap))


def core_section(c: ForestCollapse, a_prime: int) -> int:
    """The largest core of the source mapping onto the target core ``a_prime``."""
    if not is_core(c.target, a_prime):
        raise NotCore("target subset is not a core")
    return core_of(c.source, c.preimage(a_prime) | c.forest)


def graph_from_edges(edges: Sequence[Sequence[int]]) -> Graph:
    nv = 1 + max(max(e) for e in edges)
    return Graph(nv, tuple(tuple(e) for e in edges))
