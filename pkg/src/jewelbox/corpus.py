"""Named fixture graphs and the exhaustive small-graph corpus."""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations_with_replacement, permutations

from .graphs import Graph, validate

# two vertices; loops e0, e1; parallel edges e2, e3
LOOPED_DIGON = Graph(2, ((0, 0), (1, 1), (0, 1), (0, 1)))
THETA = Graph.theta()
BRIDGE = Graph(2, ((0, 0), (1, 1), (0, 1)))


def canonical_form(g: Graph) -> tuple:
    best = None
    for perm in permutations(range(g.num_vertices)):
        key = tuple(sorted(tuple(sorted((perm[u], perm[v]))) for u, v in g.edges))
        if best is None or key < best:
            best = key
    return (g.num_vertices, best)


@lru_cache(maxsize=None)
def corpus_graphs(max_edges: int = 5) -> tuple[Graph, ...]:
    """All connected, bridgeless graphs with valence >= 3, rank >= 2 and at most
    ``max_edges`` edges, one per isomorphism class."""
    seen = {}
    for ne in range(2, max_edges + 1):
        for nv in range(1, (2 * ne) // 3 + 1):
            pairs = [(u, v) for u in range(nv) for v in range(u, nv)]
            for edges in combinations_with_replacement(pairs, ne):
                g = Graph(nv, edges)
                if not validate(g).valid or g.rank() < 2:
                    continue
                key = canonical_form(g)
                if key not in seen:
                    seen[key] = Graph(nv, key[1])
    return tuple(sorted(seen.values(), key=lambda g: (g.num_edges, g.num_vertices, g.edges)))


def describe(g: Graph) -> str:
    return f"V={g.num_vertices} E={[list(e) for e in g.edges]}"
