"""Command-line front end.

Every subcommand prints one JSON document (sorted keys) headed by the
command, the resolved arguments and the package version, so identical
inputs give byte-identical output.  Exit codes: 0 on success, 1 on an
invalid input or a failed check, 2 on unreadable input.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .bordmap import check_boundary, check_commute, check_jacobian, check_nonzero, check_strata, corpus_collapses
from .complexes import (
    InvalidDecomposition,
    build_Z_rose,
    one_block_dichotomy,
    order_petals_by_norm,
    relabel_source,
    sample_decomposition,
    sphericity_report,
    zv_instance,
)
from .freegroup import Marking, NotAnAutomorphism
from .graphs import Graph, enumerate_cores, is_forest, rank_h1, spanning_trees, validate, bits
from .jewel import (
    build_jewel,
    face_chains,
    face_lattice,
    fvector_csv,
    hrep_text,
    off_text,
    vertices_oracle,
)
from .morse import MarkedRose, TieAtBudget, compare_link_with_Z, random_marking
from .stars import DotData, InsufficientWords, MarkingDots, default_budget

log = logging.getLogger("jewelbox")


class InputError(Exception):
    """Unreadable or malformed input; exit code 2."""


def _emit(args, payload: dict, files: dict[str, str] | None = None) -> None:
    header = {
        "command": args.command_path,
        "version": __version__,
        "args": {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command_path", "out", "jobs")},
    }
    doc = {"header": header, **payload}
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(text)
        for name, body in sorted((files or {}).items()):
            (out / name).write_text(body)
    sys.stdout.write(text)


def _load_graph(args) -> Graph:
    if args.graph:
        try:
            return Graph.from_json(Path(args.graph).read_text())
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise InputError(f"cannot read graph {args.graph}: {exc}") from exc
    if getattr(args, "rank", None):
        return Graph.rose(args.rank)
    raise InputError("give --graph FILE or --rank N")


def _load_marking(args, n: int) -> Marking:
    if not args.marking:
        return Marking.identity(n)
    try:
        texts = json.loads(args.marking)
        mk = Marking.parse(texts)
    except (ValueError, TypeError) as exc:
        raise InputError(f"cannot parse marking {args.marking!r}: {exc}") from exc
    if mk.n != n:
        raise InputError(f"marking has {mk.n} images, expected {n}")
    return mk


def _subsets(masks) -> list[list[int]]:
    return [bits(m) for m in masks]


# ---- graph ---------------------------------------------------------------------


def cmd_graph(args) -> int:
    g = _load_graph(args)
    rep = validate(g)
    payload = {"graph": g.to_json(), "valid": rep.valid, "problems": rep.problems()}
    if not rep.valid:
        for p in rep.problems():
            print(p, file=sys.stderr)
        _emit(args, payload)
        return 1
    cores = enumerate_cores(g)
    non_loops = [e for e in range(g.num_edges) if not g.is_loop(e)]
    forests = []
    for m in range(1, 1 << len(non_loops)):
        f = sum(1 << non_loops[i] for i in range(len(non_loops)) if m >> i & 1)
        if is_forest(g, f):
            forests.append(f)
    trees = spanning_trees(g)
    payload.update(
        rank=g.rank(),
        cores=[{"edges": bits(s), "rank": rank_h1(g, s)} for s in cores],
        forests=_subsets(sorted(forests)),
        spanning_trees=_subsets(trees),
    )
    csv = "edges,rank\n" + "".join(f"{' '.join(map(str, bits(s)))},{rank_h1(g, s)}\n" for s in cores)
    _emit(args, payload, {"cores.csv": csv})
    return 0


# ---- jewel ---------------------------------------------------------------------


def cmd_jewel(args) -> int:
    g = _load_graph(args)
    rep = validate(g)
    if not rep.valid:
        print("; ".join(rep.problems()), file=sys.stderr)
        return 1
    p = build_jewel(g)
    lat = face_lattice(p)
    payload = {
        "graph": g.to_json(),
        "dim": p.dim,
        "vertices": [[str(c) for c in v] for v in p.vertices],
        "f_vector": list(lat.f_vector()),
    }
    status = 0
    if not args.skip_oracle:
        oracle = sorted(vertices_oracle(p))
        agree = oracle == p.vertices
        payload["oracle_agrees"] = agree
        if not agree:
            print("combinatorial and brute-force vertex sets differ", file=sys.stderr)
            status = 1
    codims = [args.codim] if args.codim is not None else list(range(p.dim + 1))
    chains = {}
    for k in codims:
        if not 0 <= k <= p.dim:
            raise InputError(f"codimension {k} outside 0..{p.dim}")
        cs = face_chains(g, p.schedule, k)
        chains[str(k)] = {"count": len(cs), "lattice_count": lat.count(k), "chains": [c.to_json() for c in cs]}
        if len(cs) != lat.count(k):
            status = 1
    payload["face_chains"] = chains
    files = {"jewel.hrep": hrep_text(p), "jewel.off": off_text(p), "fvector.csv": fvector_csv(lat)}
    _emit(args, payload, files)
    return status


# ---- complex -------------------------------------------------------------------


def _zv_one(job) -> dict:
    m, k, source, n, seed = job
    rng = np.random.default_rng(seed)
    if source == "dotdata":
        src = DotData(n, rng)
    else:
        mk = random_marking(n, rng)
        src = MarkingDots(mk, budget=default_budget(mk))
    src = relabel_source(src, order_petals_by_norm(src))
    v = sample_decomposition(src, m, k, rng)
    if v is None:
        return {"seed": seed, "status": "no admissible decomposition"}
    inst = zv_instance(v, src)
    out = inst.to_json()
    out["seed"] = seed
    out["status"] = "ok"
    out["homology_csv"] = inst.report.homology.csv()
    ok = inst.report.verdict != "not spherical"
    if m == 1:
        out["one_block_dichotomy"] = one_block_dichotomy(inst)
        ok = ok and out["one_block_dichotomy"]
    out["pass"] = ok
    return out


def cmd_complex_zv(args) -> int:
    n = args.n or args.m + (args.k + 1) // 2 + 1
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(args.seed).spawn(args.samples)]
    jobs = [(args.m, args.k, args.source, n, s) for s in seeds]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_zv_one, jobs))
    else:
        results = [_zv_one(j) for j in jobs]
    files = {}
    for i, r in enumerate(results):
        if "homology_csv" in r:
            files[f"homology_{i}.csv"] = r.pop("homology_csv")
            files[f"complex_{i}.json"] = json.dumps(r["complex"], sort_keys=True) + "\n"
    ran = [r for r in results if r["status"] == "ok"]
    passed = all(r["pass"] for r in ran) and bool(ran)
    _emit(args, {"n": n, "instances": results, "result": "PASS" if passed else "FAIL"}, files)
    return 0 if passed else 1


def cmd_complex_rose(args) -> int:
    mk = _load_marking(args, args.rank)
    mk.validate()
    src = MarkingDots(mk, budget=args.budget or default_budget(mk))
    cpx = build_Z_rose(src)
    rep = sphericity_report(cpx, 2 * args.rank - 4)
    payload = {"complex": cpx.to_json(), "sphericity": rep.to_json()}
    _emit(args, payload, {"homology.csv": rep.homology.csv()})
    return 0 if rep.verdict != "not spherical" else 1


# ---- morse ---------------------------------------------------------------------


def cmd_morse_asclink(args) -> int:
    mk = _load_marking(args, args.rank)
    mk.validate()
    rho = MarkedRose(mk)
    try:
        cmp = compare_link_with_Z(rho, args.budget)
    except TieAtBudget as exc:
        print(f"TieAtBudget: {exc}", file=sys.stderr)
        return 1
    ok = cmp.match and cmp.spherical
    payload = cmp.to_json()
    payload["verdict"] = "PASS" if ok else "FAIL"
    _emit(args, payload, {"homology.csv": cmp.link.homology.csv()})
    return 0 if ok else 1


# ---- bordmap -------------------------------------------------------------------


def cmd_bordmap_check(args) -> int:
    g = _load_graph(args)
    rep = validate(g)
    if not rep.valid:
        print("; ".join(rep.problems()), file=sys.stderr)
        return 1
    rng = np.random.default_rng(args.seed)
    if args.what == "nonzero":
        reports = [check_nonzero(g)]
    elif args.what == "commute":
        reports = [check_commute(c, args.samples, rng) for c in corpus_collapses(g)]
    elif args.what == "jacobian":
        reports = [check_jacobian(g, args.samples, rng)]
    elif args.what == "strata":
        reports = [check_strata(g, args.samples, rng), check_boundary(g, rng)]
    else:
        raise InputError(f"unknown check {args.what}")
    passed = all(r.passed for r in reports)
    _emit(args, {"reports": [r.to_json() for r in reports], "result": "PASS" if passed else "FAIL"})
    return 0 if passed else 1


# ---- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jewelbox", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="directory for report.json and artifacts")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for sampling")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("graph", parents=[common], help="validate a graph and list cores, forests, trees")
    p.add_argument("--graph", help="graph JSON file")
    p.add_argument("--rank", type=int, help="use the rose of this rank")
    p.set_defaults(func=cmd_graph, command_path="graph")

    p = sub.add_parser("jewel", help="jewel polytopes")
    jsub = p.add_subparsers(dest="action", required=True)
    b = jsub.add_parser("build", parents=[common], help="vertices, H-rep, f-vector and face chains")
    b.add_argument("--graph")
    b.add_argument("--rank", type=int)
    b.add_argument("--codim", type=int)
    b.add_argument("--skip-oracle", action="store_true")
    b.set_defaults(func=cmd_jewel, command_path="jewel build")

    p = sub.add_parser("complex", help="ideal-edge complexes")
    csub = p.add_subparsers(dest="action", required=True)
    z = csub.add_parser("zv", parents=[common], help="sample Z(V) instances and test sphericity")
    z.add_argument("--m", type=int, required=True)
    z.add_argument("--k", type=int, required=True)
    z.add_argument("--n", type=int, help="rank (default m + ceil(k/2) + 1)")
    z.add_argument("--source", choices=["dotdata", "marking"], default="dotdata")
    z.add_argument("--samples", type=int, default=1)
    z.add_argument("--seed", type=int, default=0)
    z.set_defaults(func=cmd_complex_zv, command_path="complex zv")
    r = csub.add_parser("rose", parents=[common], help="Z of a marked rose")
    r.add_argument("--rank", type=int, required=True)
    r.add_argument("--marking", help='JSON list of images, e.g. \'["ab","b"]\'')
    r.add_argument("--budget", type=int)
    r.set_defaults(func=cmd_complex_rose, command_path="complex rose")

    p = sub.add_parser("morse", help="Morse function on marked roses")
    msub = p.add_subparsers(dest="action", required=True)
    a = msub.add_parser("asclink", parents=[common], help="ascending link compared with Z")
    a.add_argument("--rank", type=int, required=True)
    a.add_argument("--marking")
    a.add_argument("--budget", type=int)
    a.set_defaults(func=cmd_morse_asclink, command_path="morse asclink")

    p = sub.add_parser("bordmap", help="coordinate maps into products of simplices")
    bsub = p.add_subparsers(dest="action", required=True)
    c = bsub.add_parser("check", parents=[common], help="run one verification suite")
    c.add_argument("--graph")
    c.add_argument("--rank", type=int)
    c.add_argument("--what", choices=["nonzero", "commute", "jacobian", "strata"], required=True)
    c.add_argument("--samples", type=int, default=100)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_bordmap_check, command_path="bordmap check")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("JEWELBOX_LOG", "WARNING").upper(), stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NotAnAutomorphism, InvalidDecomposition, InsufficientWords) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
