from fractions import Fraction
from math import factorial

import pytest

from jewelbox.corpus import LOOPED_DIGON, THETA, corpus_graphs
from jewelbox.graphs import Graph, bits, collapse, enumerate_cores, mask_of, spanning_trees
from jewelbox.jewel import (
    InfeasibleSchedule,
    MismatchedSchedule,
    TruncationSchedule,
    build_jewel,
    chain_face,
    face_chains,
    face_lattice,
    face_of_collapse,
    fvector_csv,
    h_representation,
    hrep_text,
    make_schedule,
    off_text,
    vertex_count_expected,
    vertices_combinatorial,
    vertices_oracle,
)

CORPUS = list(corpus_graphs()) + [Graph.rose(4)]
ids = lambda g: f"V{g.num_vertices}E{g.num_edges}"


def test_schedule_values():
    s3 = make_schedule(3)
    assert s3.c == (Fraction(1, 81), Fraction(1, 27), Fraction(1, 9))
    assert s3.c_next == Fraction(1, 3)
    assert make_schedule(2).c == (Fraction(1, 27), Fraction(1, 9))
    for n in range(2, 7):
        s = make_schedule(n)
        vals = list(s.c) + [s.c_next]
        assert all(b / a == 3 for a, b in zip(vals, vals[1:]))


def test_schedule_rejects_bad_constants():
    with pytest.raises(ValueError):
        TruncationSchedule(2, (Fraction(1, 10), Fraction(1, 6)), Fraction(1, 3))
    with pytest.raises(ValueError):
        TruncationSchedule(2, (Fraction(1, 27), Fraction(1, 9)), Fraction(1, 2))


def test_mismatched_schedule():
    with pytest.raises(MismatchedSchedule):
        h_representation(Graph.rose(3), make_schedule(2))


def test_hrep_examples():
    p = h_representation(Graph.rose(2), make_schedule(2))
    assert [(c.mask, c.constant) for c in p.constraints] == [(1, Fraction(1, 27)), (2, Fraction(1, 27))]
    fig = h_representation(LOOPED_DIGON, make_schedule(3))
    assert len(fig.constraints) == 8
    assert sum(1 for c in fig.constraints if c.constant == 0) == 2
    assert len(h_representation(Graph.rose(3), make_schedule(3)).constraints) == 6
    text = hrep_text(fig)
    assert text.splitlines()[0] == "1 1 1 1 = 1"
    assert "0 0 1 1 >= 1/81" in text
    assert "1 0 1 1 >= 1/27" in text


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_rose_is_a_permutohedron(n):
    p = build_jewel(Graph.rose(n))
    assert len(p.vertices) == factorial(n)
    assert sorted(vertices_oracle(p)) == p.vertices


def test_hexagon_and_truncated_octahedron():
    assert face_lattice(build_jewel(Graph.rose(2))).f_vector() == (2,)
    assert face_lattice(build_jewel(Graph.rose(3))).f_vector() == (6, 6)
    assert face_lattice(build_jewel(Graph.rose(4))).f_vector() == (24, 36, 14)


def test_looped_digon_vertices():
    p = build_jewel(LOOPED_DIGON)
    assert len(p.vertices) == 12
    assert sorted(vertices_oracle(p)) == p.vertices
    for tree in spanning_trees(LOOPED_DIGON):
        face = [v for v in p.vertices if all(v[i] == 0 for i in bits(tree))]
        assert len(face) == 6  # a hexagon on each rose face
        assert face_of_collapse(collapse(LOOPED_DIGON, tree), p.schedule).matches


@pytest.mark.parametrize("g", CORPUS, ids=ids)
def test_vertices_agree_with_oracle(g):
    p = build_jewel(g)
    assert sorted(vertices_oracle(p)) == p.vertices
    assert len(p.vertices) == vertex_count_expected(g)
    m = g.num_edges - 1
    for v in p.vertices:
        assert sum(v) == 1 and min(v) >= 0
        assert p.contains(v)
        assert len(p.active(v)) == m
        # every vertex lies on a rose face
        zeros = mask_of(i for i, x in enumerate(v) if x == 0)
        assert zeros in spanning_trees(g)


@pytest.mark.parametrize("g", CORPUS, ids=ids)
def test_face_chains_biject_with_lattice(g):
    p = build_jewel(g)
    lat = face_lattice(p)
    faces_by_codim = {k: set(lat.faces.get(k, [])) for k in range(p.dim + 1)}
    for k in range(p.dim + 1):
        chains = face_chains(g, p.schedule, k)
        assert len(chains) == lat.count(k)
        got = {chain_face(p, c) for c in chains}
        assert got == faces_by_codim[k]


@pytest.mark.parametrize("g", CORPUS, ids=ids)
def test_face_chain_conditions(g):
    p = build_jewel(g)
    for k in range(p.dim + 1):
        for ch in face_chains(g, p.schedule, k):
            u = ch.unions
            for i, s in enumerate(ch.sets):
                if i < ch.t:
                    assert len(bits(s)) == 1 and not g.is_loop(bits(s)[0])
                else:
                    assert s in enumerate_cores(g)
            assert not u or u[-1] != g.full
            blocks = ch.blocks(g.full)
            assert len(blocks) == k - ch.t + 1
            assert sum(blocks) == g.full & ~ch.forest


def test_trivial_chain_examples():
    p = build_jewel(Graph.rose(3))
    assert len(face_chains(p.graph, p.schedule, 0)) == 1
    assert len(face_chains(p.graph, p.schedule, 2)) == 6


@pytest.mark.parametrize("g", [LOOPED_DIGON, THETA, Graph.rose(3), Graph.rose(4)] + list(corpus_graphs())[6:10], ids=ids)
def test_schedule_does_not_change_combinatorics(g):
    n = g.rank()
    other = TruncationSchedule(n, tuple(Fraction(1, 5 ** (n + 1 - r) * 4) for r in range(1, n + 1)), Fraction(1, 4))
    a = face_lattice(build_jewel(g, make_schedule(n)))
    b = face_lattice(build_jewel(g, other))
    assert a.f_vector() == b.f_vector()
    assert sorted(map(sorted, a.active.values())) == sorted(map(sorted, b.active.values()))


def test_bad_schedule_is_detected():
    # without c_2 > 2 c_1 the second petal of an ordering comes out too short
    big = TruncationSchedule.__new__(TruncationSchedule)
    object.__setattr__(big, "n", 3)
    object.__setattr__(big, "c", (Fraction(1, 3), Fraction(1, 2), Fraction(3, 4)))
    object.__setattr__(big, "c_next", Fraction(1))
    with pytest.raises(InfeasibleSchedule):
        vertices_combinatorial(Graph.rose(3), big)


@pytest.mark.parametrize("g", [LOOPED_DIGON, THETA] + list(corpus_graphs())[6:12], ids=ids)
def test_collapses_embed_as_faces(g):
    sched = make_schedule(g.rank())
    non_loops = [e for e in range(g.num_edges) if not g.is_loop(e)]
    for e in non_loops:
        c = collapse(g, 1 << e)
        assert face_of_collapse(c, sched).matches
    assert face_of_collapse(collapse(g, 0), sched).matches


def test_text_outputs():
    p = build_jewel(Graph.rose(2))
    assert off_text(p).splitlines()[:2] == ["OFF", "2 0 0"]
    assert fvector_csv(face_lattice(p)) == "dim,count\n0,2\n"
