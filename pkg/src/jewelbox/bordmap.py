"""Coordinate maps from a jewel into products of simplices.

For a core subset A, pi_A(x)_i = x_i * prod g_S(x_S) over cores S that
contain i but not all of A, and p_A normalizes pi_A to coordinate sum 1.
The smoothing functions g_r are cubic smoothsteps rising from 0 at c_r to 1
at c_{r+1}.  Everything accepts Fractions (exact) or floats; the batch
functions work on numpy arrays of floats.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .graphs import ForestCollapse, Graph, bits, core_section, enumerate_cores, rank_h1, subset_key
from .jewel import FaceChain, JewelPolytope, TruncationSchedule, build_jewel, chain_face, make_schedule

FLOAT_TOL = 1e-12


class OutOfDomain(ValueError):
    pass


class NotInJewel(ValueError):
    pass


class DegenerateSample(ValueError):
    pass


def smoothstep(u):
    return 3 * u * u - 2 * u * u * u


class SmoothingFamily:
    def __init__(self, sched: TruncationSchedule):
        self.sched = sched

    def window(self, r: int):
        return self.sched.const(r), self.sched.upper(r)

    def eval(self, r: int, t):
        """(g_r(t), g_r'(t)) for t in [c_r, 1]."""
        lo, hi = self.window(r)
        if isinstance(t, Fraction) or isinstance(t, int):
            if t < lo or t > 1:
                raise OutOfDomain(f"{t} outside [{lo}, 1]")
            if t >= hi:
                return Fraction(1), Fraction(0)
            u = (t - lo) / (hi - lo)
            return smoothstep(u), 6 * u * (1 - u) / (hi - lo)
        lo, hi = float(lo), float(hi)
        if t < lo - FLOAT_TOL or t > 1 + FLOAT_TOL:
            raise OutOfDomain(f"{t} outside [{lo}, 1]")
        u = min(max((t - lo) / (hi - lo), 0.0), 1.0)
        return smoothstep(u), 6 * u * (1 - u) / (hi - lo)

    def batch(self, ranks: np.ndarray, t: np.ndarray):
        """Vectorized values and derivatives; ``t`` has shape (N, C)."""
        lo = np.array([float(self.sched.const(r)) for r in ranks])
        hi = np.array([float(self.sched.upper(r)) for r in ranks])
        if np.any(t < lo - FLOAT_TOL):
            raise OutOfDomain("sample below a truncation constant")
        u = np.clip((t - lo) / (hi - lo), 0.0, 1.0)
        return smoothstep(u), 6 * u * (1 - u) / (hi - lo)


@dataclass(frozen=True)
class StratumSignature:
    zeros: tuple[tuple[int, tuple[int, ...]], ...]  # (core mask, indices where p_A vanishes)

    def of(self, a: int) -> tuple[int, ...]:
        return dict(self.zeros)[a]

    def to_json(self) -> dict:
        return {",".join(map(str, bits(a))): list(z) for a, z in self.zeros}


class BordMap:
    def __init__(self, g: Graph, sched: TruncationSchedule | None = None):
        self.g = g
        self.sched = sched or make_schedule(g.rank())
        self.fam = SmoothingFamily(self.sched)
        self.cores = sorted(enumerate_cores(g), key=subset_key)
        self.ranks = np.array([rank_h1(g, s) for s in self.cores])
        e = g.num_edges
        self.incidence = np.array([[(s >> i) & 1 for i in range(e)] for s in self.cores], dtype=float)
        # the sets whose modified smoothing functions drive the log-derivative
        self.shaving = [1 << i for i in range(e) if not g.is_loop(i)] + [s for s in self.cores if s != g.full]

    def constant_of(self, s: int) -> Fraction:
        """Lower bound for x_S: zero for a non-loop edge, c_rank for a core."""
        if len(bits(s)) == 1 and not self.g.is_loop(bits(s)[0]):
            return Fraction(0)
        return self.sched.const(rank_h1(self.g, s))

    # ---- pointwise (exact or float) ----

    def check_point(self, x, tol=0) -> None:
        if len(x) != self.g.num_edges:
            raise NotInJewel("wrong number of coordinates")
        if abs(sum(x) - 1) > tol or any(v < -tol for v in x):
            raise NotInJewel("not in the simplex")
        for s, r in zip(self.cores, self.ranks):
            if s != self.g.full and sum(x[i] for i in bits(s)) < self.sched.const(int(r)) - tol:
                raise NotInJewel(f"x_S below its constant for S={bits(s)}")

    def _gvals(self, x) -> list:
        return [self.fam.eval(int(r), sum((x[i] for i in bits(s)), 0 * x[0]))[0] for s, r in zip(self.cores, self.ranks)]

    def pi(self, a: int, x, gvals=None) -> list:
        """pi_A(x) as a list over the edges of A in increasing order."""
        gv = gvals if gvals is not None else self._gvals(x)
        out = []
        for i in bits(a):
            val = x[i]
            for s, gs in zip(self.cores, gv):
                if s >> i & 1 and s & a != a:
                    val = val * gs
            out.append(val)
        return out

    def p(self, a: int, x, gvals=None) -> list:
        z = self.pi(a, x, gvals)
        tot = sum(z)
        if tot == 0:
            raise ZeroDivisionError("pi_A vanished")
        return [v / tot for v in z]

    def p_all(self, x) -> dict[int, list]:
        gv = self._gvals(x)
        return {a: self.p(a, x, gv) for a in self.cores}

    def signature(self, x) -> StratumSignature:
        gv = self._gvals(x)
        zs = []
        for a in self.cores:
            z = self.pi(a, x, gv)
            zs.append((a, tuple(i for i, v in zip(bits(a), z) if v == 0)))
        return StratumSignature(tuple(zs))

    # ---- batched floats ----

    def g_batch(self, x: np.ndarray):
        return self.fam.batch(self.ranks, x @ self.incidence.T)

    def pi_batch(self, a: int, x: np.ndarray, gv: np.ndarray | None = None) -> np.ndarray:
        """(N, E) array; columns outside A are zero."""
        if gv is None:
            gv, _ = self.g_batch(x)
        mask_a = np.array([(a >> i) & 1 for i in range(self.g.num_edges)], dtype=bool)
        use = np.array([s & a != a for s in self.cores], dtype=bool)
        inc = self.incidence[use].astype(bool)  # (C', E)
        fac = np.where(inc[None, :, :], gv[:, use][:, :, None], 1.0).prod(axis=1)
        return np.where(mask_a[None, :], x * fac, 0.0)

    def p_batch(self, a: int, x: np.ndarray, gv=None) -> np.ndarray:
        z = self.pi_batch(a, x, gv)
        return z / z.sum(axis=1, keepdims=True)


# ---- functional entry points ---------------------------------------------------


def g_eval(fam: SmoothingFamily, r: int, t):
    return fam.eval(r, t)


def pi_A(g: Graph, a: int, x, sched=None, check: bool = True) -> list:
    bm = BordMap(g, sched)
    if check:
        bm.check_point(x, tol=0 if isinstance(x[0], (Fraction, int)) else 1e-12)
    return bm.pi(a, x)


def p_A(g: Graph, a: int, x, sched=None, check: bool = True) -> list:
    bm = BordMap(g, sched)
    if check:
        bm.check_point(x, tol=0 if isinstance(x[0], (Fraction, int)) else 1e-12)
    return bm.p(a, x)


def p_C(g: Graph, x, sched=None) -> dict[int, list]:
    bm = BordMap(g, sched)
    bm.check_point(x, tol=0 if isinstance(x[0], (Fraction, int)) else 1e-12)
    return bm.p_all(x)


def stratum_signature(g: Graph, x, sched=None) -> StratumSignature:
    bm = BordMap(g, sched)
    bm.check_point(x, tol=0 if isinstance(x[0], (Fraction, int)) else 1e-12)
    return bm.signature(x)


def delta_residual(bm: BordMap, a: int, x) -> float:
    """Compare p_A with p_Delta restricted to A and divided by prod_{S >= A} g_S(x_S).

    For i in A, pi_Delta(x)_i is pi_A(x)_i times that product (S a proper core),
    so in the interior p_Delta determines p_A.
    """
    gv = bm._gvals(x)
    delta = dict(zip(bits(bm.g.full), bm.pi(bm.g.full, x, gv)))
    mult = 1
    for s, gs in zip(bm.cores, gv):
        if s & a == a and s != bm.g.full:
            mult = mult * gs
    direct = bm.p(a, x, gv)
    if mult == 0:
        raise DegenerateSample("a core containing A sits at its constant")
    raw = bm.pi(a, x, gv)
    via = [delta[i] / mult for i in bits(a)]
    tot = sum(via)
    unnormalized = max(abs(float(u - v)) for u, v in zip(raw, via))
    return max(unnormalized, max(abs(float(u - v / tot)) for u, v in zip(direct, via)))


# ---- predictions from face chains ------------------------------------------------


def chain_blocks(g: Graph, chain: FaceChain) -> list[tuple[int, int]]:
    """(A_l, V_l) for l = 0..r with A_0 the whole edge set."""
    blocks = chain.blocks(g.full)
    cores = (g.full,) + chain.cores
    return list(zip(cores, blocks))


def predicted_nonzero(g: Graph, chain: FaceChain) -> dict[int, tuple[int, ...]]:
    """On the interior of the face, p_{A_l} is nonzero exactly on V_l."""
    return {a: tuple(bits(v)) for a, v in chain_blocks(g, chain)}


def all_chains(p: JewelPolytope) -> list[FaceChain]:
    from .jewel import face_chains

    out = []
    for k in range(p.dim + 1):
        out += face_chains(p.graph, p.schedule, k)
    return out


def face_vertices(p: JewelPolytope, chain: FaceChain) -> list[tuple]:
    return [p.vertices[i] for i in sorted(chain_face(p, chain))]


def sample_interior(verts: Sequence[tuple], rng: np.random.Generator, count: int, exact: bool = False):
    """Random points with all-positive barycentric weights on the given vertices."""
    if exact:
        out = []
        for _ in range(count):
            w = [Fraction(int(v)) for v in rng.integers(1, 1000, size=len(verts))]
            tot = sum(w)
            out.append(tuple(sum((wi / tot * v[j] for wi, v in zip(w, verts)), Fraction(0)) for j in range(len(verts[0]))))
        return out
    vf = np.array([[float(c) for c in v] for v in verts])
    w = rng.dirichlet(np.ones(len(verts)), size=count)
    return w @ vf


# ---- checks ------------------------------------------------------------------


@dataclass
class Report:
    what: str
    passed: bool
    details: dict

    def to_json(self) -> dict:
        return {"what": self.what, "result": "PASS" if self.passed else "FAIL", **self.details}


def check_nonzero(g: Graph, sched: TruncationSchedule | None = None) -> Report:
    """pi_A(v) is not the zero vector for every vertex v and every core A (exact)."""
    bm = BordMap(g, sched)
    p = build_jewel(g, bm.sched)
    bad = []
    for v in p.vertices:
        gv = bm._gvals(v)
        for a in bm.cores:
            if all(z == 0 for z in bm.pi(a, v, gv)):
                bad.append([str(c) for c in v] + [bits(a)])
    return Report("nonzero", not bad, {"vertices": len(p.vertices), "cores": len(bm.cores), "failures": bad})


def check_commute(c: ForestCollapse, samples: int, rng: np.random.Generator, sched: TruncationSchedule | None = None) -> Report:
    sched = sched or make_schedule(c.source.rank())
    big, small = BordMap(c.source, sched), BordMap(c.target, sched)
    pj = build_jewel(c.target, sched)
    xs_small = sample_interior(pj.vertices, rng, samples)
    emap = c.edge_map()
    xs_big = np.zeros((samples, c.source.num_edges))
    for s, t in emap.items():
        xs_big[:, s] = xs_small[:, t]
    gv_big, _ = big.g_batch(xs_big)
    gv_small, _ = small.g_batch(xs_small)
    worst = 0.0
    for a_img in small.cores:
        a = core_section(c, a_img)
        pb = big.p_batch(a, xs_big, gv_big)
        ps = small.p_batch(a_img, xs_small, gv_small)
        for s, t in emap.items():
            worst = max(worst, float(np.max(np.abs(pb[:, s] - ps[:, t]))))
        for s in bits(c.forest):
            worst = max(worst, float(np.max(np.abs(pb[:, s]))))
    return Report(
        "commute",
        worst < 1e-10,
        {"forest": bits(c.forest), "samples": samples, "cores": len(small.cores), "max_discrepancy": worst},
    )


@dataclass
class JacobianReport:
    min_singular_value: float
    fd_vs_analytic: float
    dim: int

    @property
    def passed(self) -> bool:
        return self.dim == 0 or self.min_singular_value > 1e-8


def _tangent_basis(g: Graph, chain: FaceChain) -> tuple[list[tuple[int, int, int]], list[int]]:
    """(core A_l, i, base b_l) for i in V_l - b_l, with b_l = min V_l."""
    rows = []
    for a, v in chain_blocks(g, chain):
        vs = bits(v)
        b = vs[0]
        rows += [(a, i, b) for i in vs[1:]]
    return rows, [r[1] for r in rows]


def jacobian_batch(bm: BordMap, chain: FaceChain, x: np.ndarray, h: float = 1e-6) -> list[JacobianReport]:
    """Log-chart Jacobians of p on the face of ``chain`` at each row of ``x``.

    Central differences use a step of ``h`` scaled down by the local slack and
    the narrowest smoothing window, so thin jewels are resolved too.
    """
    g = bm.g
    basis, _ = _tangent_basis(g, chain)
    dim = len(basis)
    n_pts = x.shape[0]
    if dim == 0:
        return [JacobianReport(float("inf"), 0.0, 0) for _ in range(n_pts)]
    # keep the finite-difference stencil inside the face
    chain_sets = set(chain.sets)
    inc = np.array([[(t >> i) & 1 for i in range(g.num_edges)] for t in bm.shaving], float)
    consts = np.array([float(bm.constant_of(t)) for t in bm.shaving])
    xs = x @ inc.T
    free = [c for c, t in enumerate(bm.shaving) if t not in chain_sets]
    slack = np.min(xs[:, free] - consts[free], axis=1) if free else np.full(x.shape[0], np.inf)
    if np.min(slack) < 100 * h * 1e-3:
        raise DegenerateSample("sample too close to the boundary of the face")
    widths = [float(bm.sched.upper(r) - bm.sched.const(r)) for r in range(1, bm.sched.n + 1)]
    step = (h * np.minimum(1.0, np.minimum(slack, min(widths)) / 1e-2))[:, None]
    vecs = np.zeros((dim, g.num_edges))
    for k, (_, i, b) in enumerate(basis):
        vecs[k, i], vecs[k, b] = 1.0, -1.0

    def log_chart(pts):
        gv, _ = bm.g_batch(pts)
        cols = []
        cache = {}
        for a, i, b in basis:
            if a not in cache:
                cache[a] = bm.pi_batch(a, pts, gv)
            z = cache[a]
            cols.append(np.log(z[:, i]) - np.log(z[:, b]))
        return np.stack(cols, axis=1)

    jac = np.zeros((n_pts, dim, dim))
    for k in range(dim):
        up = log_chart(x + step * vecs[k])
        dn = log_chart(x - step * vecs[k])
        jac[:, :, k] = (up - dn) / (2 * step)
    # analytic: sum over shaving sets of (g~'/g~)(x_S) <v_j, e_S> <v_i, e_S>
    proj = vecs @ inc.T  # (dim, |shaving|)
    weights = np.zeros_like(xs)
    for c, t in enumerate(bm.shaving):
        if not np.any(proj[:, c]):
            continue  # tight chain sets and sets containing a whole block
        idx = bits(t)
        if len(idx) == 1 and not g.is_loop(idx[0]):
            weights[:, c] = 1.0 / xs[:, c]
            continue
        gval, gder = bm.fam.batch(np.array([rank_h1(g, t)]), xs[:, c:c + 1])
        weights[:, c] = gder[:, 0] / gval[:, 0]
        if len(idx) == 1:
            weights[:, c] += 1.0 / xs[:, c]  # the loop coordinate is a factor too
    analytic = np.einsum("jc,nc,ic->nji", proj, weights, proj)
    out = []
    for k in range(n_pts):
        sv = np.linalg.svd(jac[k], compute_uv=False)
        scale = max(1.0, float(np.max(np.abs(analytic[k]))))
        out.append(JacobianReport(float(sv.min()), float(np.max(np.abs(jac[k] - analytic[k]))) / scale, dim))
    return out


def free_slack(bm: BordMap, chain: FaceChain, x: np.ndarray) -> np.ndarray:
    """Per-row distance to the nearest constraint not already tight on the face."""
    chain_sets = set(chain.sets)
    free = [t for t in bm.shaving if t not in chain_sets]
    if not free:
        return np.full(x.shape[0], np.inf)
    inc = np.array([[(t >> i) & 1 for i in range(bm.g.num_edges)] for t in free], float)
    consts = np.array([float(bm.constant_of(t)) for t in free])
    return np.min(x @ inc.T - consts, axis=1)


def pull_inward(bm: BordMap, chain: FaceChain, x: np.ndarray, centroid: np.ndarray, floor: float = 1e-3):
    """Move rows with small slack halfway toward the centroid until they clear ``floor``."""
    x = x.copy()
    for _ in range(60):
        low = free_slack(bm, chain, x) < floor
        if not low.any():
            break
        x[low] = 0.5 * (x[low] + centroid)
    return x


def jacobian_check(g: Graph, chain: FaceChain, x, sched: TruncationSchedule | None = None) -> JacobianReport:
    bm = BordMap(g, sched)
    return jacobian_batch(bm, chain, np.atleast_2d(np.asarray(x, dtype=float)))[0]


def check_jacobian(g: Graph, samples: int, rng: np.random.Generator, sched=None) -> Report:
    bm = BordMap(g, sched)
    p = build_jewel(g, bm.sched)
    worst_sv, worst_fd, faces, pulled = float("inf"), 0.0, 0, 0
    for chain in all_chains(p):
        verts = face_vertices(p, chain)
        if len(verts) < 2:
            continue
        faces += 1
        pts = sample_interior(verts, rng, samples)
        centroid = np.mean([[float(c) for c in v] for v in verts], axis=0)
        moved = pull_inward(bm, chain, pts, centroid)
        pulled += int(np.sum(np.any(moved != pts, axis=1)))
        reps = jacobian_batch(bm, chain, moved)
        worst_sv = min(worst_sv, min(r.min_singular_value for r in reps))
        worst_fd = max(worst_fd, max(r.fd_vs_analytic for r in reps))
    return Report(
        "jacobian",
        worst_sv > 1e-8 and worst_fd < 1e-4,
        {"faces": faces, "samples_per_face": samples, "min_singular_value": worst_sv,
         "max_fd_vs_analytic": worst_fd, "pulled_samples": pulled},
    )


def check_strata(g: Graph, samples: int, rng: np.random.Generator, sched=None, pairs: int = 1000) -> Report:
    """Signatures constant on open faces, distinct across faces, matching the block prediction."""
    bm = BordMap(g, sched)
    p = build_jewel(g, bm.sched)
    chains = all_chains(p)
    seen: dict[StratumSignature, FaceChain] = {}
    inconstant, collisions, mispredicted, pair_collisions = [], [], [], 0
    for chain in chains:
        verts = face_vertices(p, chain)
        pts = sample_interior(verts, rng, samples, exact=True)
        sigs = {bm.signature(x) for x in pts}
        if len(sigs) != 1:
            inconstant.append(chain.to_json())
        sig = next(iter(sigs))
        if sig in seen:
            collisions.append([seen[sig].to_json(), chain.to_json()])
        seen[sig] = chain
        for a, nz in predicted_nonzero(g, chain).items():
            zeros = tuple(i for i in bits(a) if i not in nz)
            if sig.of(a) != zeros:
                mispredicted.append({"chain": chain.to_json(), "core": bits(a)})
        if len(verts) > 1:
            fl = sample_interior(verts, rng, 2 * pairs)
            gv, _ = bm.g_batch(fl)
            img = np.concatenate([bm.p_batch(a, fl, gv) for a in bm.cores], axis=1)
            d = np.abs(img[:pairs] - img[pairs:]).max(axis=1)
            pair_collisions += int(np.sum(d <= 0))
    ok = not (inconstant or collisions or mispredicted or pair_collisions)
    return Report(
        "strata",
        ok,
        {"faces": len(chains), "samples_per_face": samples, "pairs_per_face": pairs, "inconstant": inconstant,
         "collisions": collisions, "mispredicted": mispredicted, "injectivity_collisions": pair_collisions},
    )


def check_boundary(g: Graph, rng: np.random.Generator, sched=None) -> Report:
    """Points on a facet of a face lose a coordinate in one of the face's blocks."""
    bm = BordMap(g, sched)
    p = build_jewel(g, bm.sched)
    failures = 0
    checked = 0
    chains = all_chains(p)
    by_vertices = {chain_face(p, c): c for c in chains}
    for chain in chains:
        face = chain_face(p, chain)
        blocks = chain_blocks(g, chain)
        for sub, sub_chain in by_vertices.items():
            if sub < face and sub_chain.k == chain.k + 1:
                x = sample_interior([p.vertices[i] for i in sorted(sub)], rng, 1, exact=True)[0]
                gv = bm._gvals(x)
                lost = False
                for a, v in blocks:
                    z = dict(zip(bits(a), bm.pi(a, x, gv)))
                    if any(z[i] == 0 for i in bits(v)):
                        lost = True
                checked += 1
                failures += not lost
    return Report("boundary", failures == 0, {"pairs": checked, "failures": failures})


def corpus_collapses(g: Graph) -> list[ForestCollapse]:
    from .graphs import collapse, is_forest

    out = []
    non_loops = [e for e in range(g.num_edges) if not g.is_loop(e)]
    for mask in range(1, 1 << len(non_loops)):
        forest = sum(1 << non_loops[i] for i in range(len(non_loops)) if mask >> i & 1)
        if is_forest(g, forest):
            out.append(collapse(g, forest))
    return out
