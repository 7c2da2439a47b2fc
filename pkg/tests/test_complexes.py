from itertools import combinations, product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jewelbox.complexes import (
    FlagComplex,
    InvalidDecomposition,
    VDecomposition,
    build_I,
    build_Z,
    build_Z_rose,
    enumerate_ideal_edges,
    enumerate_v_ideal_edges,
    fundamental_group_trivial,
    homology,
    homology_of_simplices,
    join,
    one_block_dichotomy,
    order_complex,
    order_petals_by_norm,
    relabel_source,
    sample_decomposition,
    smith_diagonal,
    sphericity_report,
    zv_instance,
)
from jewelbox.freegroup import Marking
from jewelbox.stars import DotData, IdealEdge, MarkingDots, compatible, is_ascending_for


def cycle(k):
    return FlagComplex(list(range(k)), {(min(i, (i + 1) % k), max(i, (i + 1) % k)) for i in range(k)})


def simplex_boundary_flag(k):
    # flag model of the boundary of a k-simplex: barycentric subdivision
    faces = [frozenset(c) for r in range(1, k + 1) for c in combinations(range(k + 1), r)]
    return order_complex(faces, lambda a, b: a <= b)


def reduced_betti_float(simp):
    # independent route: real ranks of boundary matrices via numpy
    sizes = [1] + [len(s) for s in simp]
    ranks = [0] * (len(sizes) + 1)
    index = [{(): 0}] + [{s: i for i, s in enumerate(lst)} for lst in simp]
    for d in range(1, len(sizes)):
        mat = np.zeros((sizes[d - 1], sizes[d]))
        for j, s in enumerate(index[d]):
            for r in range(len(s)):
                face = s[:r] + s[r + 1:]
                mat[index[d - 1][face], j] = (-1) ** r
        ranks[d] = np.linalg.matrix_rank(mat) if mat.size else 0
    return {d - 1: sizes[d] - ranks[d] - ranks[d + 1] for d in range(len(sizes))}


def test_homology_fixtures():
    empty = homology(FlagComplex([], set()))
    assert empty.betti[-1] == 1 and empty.nonzero_degrees() == [-1]
    point = homology(FlagComplex(["p"], set()))
    assert point.nonzero_degrees() == []
    s0 = homology(FlagComplex(["a", "b"], set()))
    assert s0.betti[0] == 1
    hexagon = homology(cycle(6))
    assert hexagon.betti[0] == 0 and hexagon.betti[1] == 1
    # the flag (subdivided) boundary of a tetrahedron is a 2-sphere
    sphere = homology(simplex_boundary_flag(3))
    assert sphere.nonzero_degrees() == [2] and sphere.betti[2] == 1


def test_projective_plane_torsion():
    # six-vertex projective plane, subdivided so it becomes a flag complex
    tri = [(0, 1, 2), (0, 2, 3), (0, 3, 4), (0, 4, 5), (0, 5, 1),
           (1, 2, 4), (2, 3, 5), (3, 4, 1), (4, 5, 2), (5, 1, 3)]
    faces = set()
    for t in tri:
        for r in (1, 2, 3):
            faces.update(frozenset(c) for c in combinations(t, r))
    c = order_complex(sorted(faces, key=sorted), lambda a, b: a <= b)
    h = homology(c)
    assert all(b == 0 for b in h.betti.values())
    assert h.torsion[1] == [2]


def test_smith_diagonal():
    assert smith_diagonal([[2, 4], [6, 8]]) == [2, 4]
    assert smith_diagonal([[0, 0], [0, 0]]) == []


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 9), st.data())
def test_homology_matches_float_ranks(nv, data):
    pairs = list(combinations(range(nv), 2))
    chosen = data.draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    c = FlagComplex(list(range(nv)), set(chosen))
    simp = c.simplices()
    h = homology_of_simplices(simp)
    oracle = reduced_betti_float(simp)
    assert {d: b for d, b in h.betti.items()} == {d: b for d, b in oracle.items() if d in h.betti}
    # flagness: every clique is a simplex and every simplex is a clique
    for lst in simp:
        for s in lst:
            assert all((a, b) in c.adjacency for a, b in combinations(s, 2))
    assert sum(len(lst) for lst in simp) == len(list(__import__("networkx").enumerate_all_cliques(c.graph())))


def test_strong_collapse_keeps_homology():
    rng = np.random.default_rng(4)
    for _ in range(20):
        nv = int(rng.integers(3, 11))
        adj = {(i, j) for i, j in combinations(range(nv), 2) if rng.random() < 0.5}
        c = FlagComplex(list(range(nv)), adj)
        before = homology(c).betti
        after = homology(c.strong_collapse()).betti
        assert {d: b for d, b in before.items() if b} == {d: b for d, b in after.items() if b}


def test_joins_shift_degrees():
    s0 = FlagComplex(["a", "b"], set())
    s1 = cycle(5)
    assert homology(join(s0, s0)).nonzero_degrees() == [1]
    assert homology(join(s0, s1)).nonzero_degrees() == [2]
    assert homology(join(s1, s1)).nonzero_degrees() == [3]


def test_pi1_checks():
    sphere = simplex_boundary_flag(3)
    assert fundamental_group_trivial(sphere.simplices()) is True
    assert fundamental_group_trivial(cycle(5).simplices()) is not True
    rep = sphericity_report(sphere, 2)
    assert rep.verdict == "spherical (π₁ verified)"
    assert sphericity_report(cycle(5), 2).verdict == "not spherical"


# ---- ideal edges ----


def test_ideal_edge_counts():
    counts = [len(enumerate_ideal_edges(n)) for n in (2, 3, 4)]
    assert counts == [2, 22, 112]
    n2 = enumerate_ideal_edges(2)
    assert [str(e) for e in n2] == ["e1,e2|~", "e1,E2|~"]
    pair = (1 << 0) | (1 << 1)
    assert IdealEdge.try_make(pair, 2) is None
    for e in enumerate_ideal_edges(4):
        assert e.split_petals()


def test_full_ideal_edge_complex_n2():
    # the two ideal edges at rank 2 are incompatible: two points
    h = homology(build_I(2))
    assert h.betti[0] == 1


def oracle_v_edges(v):
    blocks = v.blocks()
    nb = len(blocks)
    out = set()
    for labels in product((0, 1), repeat=nb):
        if labels[0] != 1 or sum(labels) < 2 or nb - sum(labels) < 2:
            continue
        if not any(labels[2 * i] != labels[2 * i + 1] for i in range(v.m)):
            continue
        out.add(sum(b for b, l in zip(blocks, labels) if l))
    return out


def simple_decomposition(m, k, n):
    x = [1 << (2 * i) for i in range(m)]
    xb = [1 << (2 * i + 1) for i in range(m)]
    rest = [d for d in range(2 * m, 2 * n)]
    y = [0] * k
    for j, d in enumerate(rest):
        y[j % k] |= 1 << d
    return VDecomposition(n, tuple(x), tuple(xb), tuple(y))


@pytest.mark.parametrize("m,k,n", [(1, 2, 2), (1, 3, 3), (1, 4, 3), (2, 0, 2), (2, 1, 3), (2, 2, 3), (3, 0, 3)])
def test_v_ideal_edges_match_oracle(m, k, n):
    v = simple_decomposition(m, k, n).validate()
    got = enumerate_v_ideal_edges(v)
    assert {e.side for e in got} == oracle_v_edges(v)
    if m == 1:
        assert len(got) == 2**k - 2
    for e in got:
        assert any(e.splits(i) for i in range(1, m + 1))


def test_v_decomposition_validation():
    with pytest.raises(InvalidDecomposition):
        VDecomposition(2, (), (), (15,)).validate()
    with pytest.raises(InvalidDecomposition):
        VDecomposition(2, (2,), (1,), (4, 8)).validate()
    with pytest.raises(InvalidDecomposition):
        VDecomposition(2, (1,), (2,), (4,)).validate()
    assert VDecomposition.of_rose(3).validate().m == 3


def ascent_sources(count, n, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        src = DotData(n, rng)
        yield relabel_source(src, order_petals_by_norm(src)), rng


def test_m1_k2_point_or_zero_sphere():
    seen = set()
    # at rank 2 the blocks are single directions and both outcomes are common
    for src, rng in ascent_sources(40, 2, 11):
        v = sample_decomposition(src, 1, 2, rng)
        if v is None:
            continue
        cpx, down = build_Z(v, src)
        assert cpx.num_vertices in (1, 2)
        assert cpx.num_vertices + len(down) == 2
        betti = homology(cpx).betti
        assert betti[0] == (1 if cpx.num_vertices == 2 else 0)
        seen.add(cpx.num_vertices)
    assert seen == {1, 2}


@pytest.mark.parametrize("k", [2, 3, 4])
def test_descending_closure_properties(k):
    for src, rng in ascent_sources(40, 1 + (k + 1) // 2, 20 + k):
        v = sample_decomposition(src, 1, k, rng, tries=50)
        if v is None:
            continue
        x1, ys = v.x[0], v.y
        full = (1 << k) - 1

        def side(p):
            return x1 | sum(ys[j] for j in range(k) if p >> j & 1)

        desc = {p: not is_ascending_for(IdealEdge(side(p), v.n), 1, src) for p in range(1, full)}
        desc[0] = False  # X_1 alone
        for p in range(1, full):
            if desc[p]:
                assert not desc.get(full & ~p, False)
        for p, q in product(range(full), repeat=2):
            if not (desc[p] and desc[q]):
                continue
            if p & q == 0 and q != full & ~p and (p | q) != full:
                assert desc[p | q]
            if (p | q) == full and p & q:
                assert desc[p & q]


@pytest.mark.parametrize("m,k", [(1, 2), (1, 3), (1, 4), (2, 0), (2, 1), (2, 2)])
def test_zv_sphericity_sampled(m, k):
    n = m + (k + 1) // 2 + 1
    ran = 0
    for src, rng in ascent_sources(12, n, 100 * m + k):
        v = sample_decomposition(src, m, k, rng)
        if v is None:
            continue
        inst = zv_instance(v, src)
        ran += 1
        assert inst.report.verdict != "not spherical"
        assert inst.report.dim == 2 * m + k - 4
        if m == 1:
            assert one_block_dichotomy(inst)
    assert ran >= 6


def test_zv_with_marking_sources():
    from jewelbox.morse import random_marking
    from jewelbox.stars import default_budget

    rng = np.random.default_rng(8)
    ran = 0
    for _ in range(10):
        mk = random_marking(3, rng)
        src = MarkingDots(mk, budget=default_budget(mk))
        src = relabel_source(src, order_petals_by_norm(src))
        v = sample_decomposition(src, 1, 3, rng)
        if v is None:
            continue
        inst = zv_instance(v, src)
        ran += 1
        assert one_block_dichotomy(inst)
    assert ran >= 3


def test_z_of_rose_n2_identity():
    src = MarkingDots(Marking.identity(2), budget=4)
    z = build_Z_rose(src)
    rep = sphericity_report(z, 0)
    assert rep.verdict != "not spherical"
    assert all(compatible(a, a) for a in z.labels)
