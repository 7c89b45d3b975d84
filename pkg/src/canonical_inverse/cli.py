"""Command-line interface: generate, forward, invert, sample, verify.

Exit statuses: 0 success, 1 input error, 2 non-convergence, 3 verification failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import ensemble
from .documents import Instance, instance_to_dict, load_instance, read_json, table_from_doc, write_json
from .ensemble import CanonicalSystem, PotentialSpec
from .errors import BudgetExceededError, InputError, SamplerError
from .sampler import ChainConfig, run_chain
from .solver import SolverConfig, gauge_fix, invert
from .space import StateSpace, random_table
from .verify import FAIL, run_suite, to_jsonable

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_VERIFY_FAILED = 0, 1, 2, 3

log = logging.getLogger("canonical_inverse")


def _add_solver_flags(p, defaults=True):
    d = (lambda v: v) if defaults else (lambda v: None)
    p.add_argument("--method", choices=["newton", "gradient-ascent"], default=d("newton"))
    p.add_argument("--tol", type=float, default=d(1e-10))
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--engine", choices=["exact", "sampled"], default=d("exact"))


def _add_sampler_flags(p, defaults=True):
    d = (lambda v: v) if defaults else (lambda v: None)
    p.add_argument("--num-chains", type=int, default=d(4))
    p.add_argument("--sweeps", type=int, default=d(10000))
    p.add_argument("--burn-in", type=int, default=d(1000))
    p.add_argument("--sampler-seed", type=int, default=d(0))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="canonical-inverse",
        description="Canonical-ensemble inverse problem for m-particle densities.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random feasible instance and its answer file")
    g.add_argument("--cells", type=int, required=True)
    g.add_argument("--particles", type=int, required=True)
    g.add_argument("--order", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--potential-range", type=float, nargs=2, default=(-1.0, 1.0), metavar=("LO", "HI"))
    g.add_argument("--w-range", type=float, nargs=2, default=(-1.0, 1.0), metavar=("LO", "HI"))
    g.add_argument("--w-order", type=int, default=2, help="order of the random W term (0: no W)")
    g.add_argument("--weights", type=float, nargs="+", default=None)
    g.add_argument("--budget", type=int, default=ensemble.DEFAULT_BUDGET)
    g.add_argument("--out", default="instance.json")
    g.add_argument("--answer", default=None, help="answer file (default: <out>.answer.json)")
    _add_solver_flags(g)
    _add_sampler_flags(g)

    f = sub.add_parser("forward", help="density, log Z and log F of a potential")
    f.add_argument("instance")
    f.add_argument("--potential", help="answer file holding u (default: the instance's u)")
    f.add_argument("--out", default="density.json")

    i = sub.add_parser("invert", help="solve for the potential reproducing the target")
    i.add_argument("instance")
    i.add_argument("--out", default="solution.json")
    _add_solver_flags(i, defaults=False)
    _add_sampler_flags(i, defaults=False)

    s = sub.add_parser("sample", help="Metropolis estimate of the m-density")
    s.add_argument("instance")
    s.add_argument("--potential", help="answer file holding u (default: the instance's u)")
    s.add_argument("--out", default="sample.json")
    _add_sampler_flags(s, defaults=False)

    v = sub.add_parser("verify", help="run the property checkers on an instance")
    v.add_argument("instance")
    v.add_argument("--out", default="verify.json")
    v.add_argument("--seed", type=int, default=0)
    return parser


def _sampler_from(args, base: ChainConfig) -> ChainConfig:
    overrides = {
        "num_chains": args.num_chains,
        "sweeps": args.sweeps,
        "burn_in": args.burn_in,
        "seed": args.sampler_seed,
    }
    return replace(base, **{k: v for k, v in overrides.items() if v is not None})


def _potential(inst: Instance, path):
    if path is not None:
        doc = read_json(path)
        return table_from_doc(doc.get("u", doc), inst.system.space, inst.system.m)
    if inst.u is None:
        raise InputError("no potential: give --potential or put 'u' in the instance")
    return inst.u


def cmd_generate(args) -> int:
    K, N, m = args.cells, args.particles, args.order
    space = StateSpace(tuple(args.weights)) if args.weights else StateSpace.uniform(K)
    if space.num_cells != K:
        raise InputError("--weights must list one weight per cell")
    if K**N > args.budget:
        raise BudgetExceededError(K**N, args.budget)
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(args.seed).spawn(2)]
    terms = ()
    if args.w_order > 0:
        lo, hi = args.w_range
        terms = (random_table(space, args.w_order, lo, hi, seeds[0]),)
    system = CanonicalSystem(space, N, m, PotentialSpec(terms), budget=args.budget)
    lo, hi = args.potential_range
    u_star = random_table(space, m, lo, hi, seeds[1])
    target = ensemble.m_density(system, u_star)
    solver = SolverConfig(method=args.method, tol=args.tol, max_iters=args.max_iters, engine=args.engine)
    sampler = _sampler_from(args, ChainConfig())
    inst = Instance(system, None, target, None, solver, sampler, args.seed)
    out = Path(args.out)
    answer = Path(args.answer) if args.answer else out.with_name(out.stem + ".answer.json")
    write_json(out, instance_to_dict(inst))
    write_json(answer, {"u": u_star.to_dict(), "u_gauge_fixed": gauge_fix(u_star).to_dict()})
    print(f"wrote {out} and {answer}")
    return EXIT_OK


def cmd_forward(args) -> int:
    inst = load_instance(args.instance)
    u = _potential(inst, args.potential)
    summary = ensemble.summarize(inst.system, u, inst.target, inst.P)
    doc = {
        "density": summary.density.to_dict(),
        "log_Z": summary.log_Z,
        "log_F": summary.log_F,
        "upper_bound_log": summary.upper_bound_log,
    }
    write_json(args.out, doc)
    print(f"log_Z = {summary.log_Z!r}; wrote {args.out}")
    return EXIT_OK


def cmd_invert(args) -> int:
    inst = load_instance(args.instance)
    if inst.target is None:
        raise InputError("instance has no target density")
    cfg = inst.solver
    overrides = {"method": args.method, "tol": args.tol, "max_iters": args.max_iters, "engine": args.engine}
    cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    if cfg.engine == "sampled":
        cfg = replace(cfg, sampler=_sampler_from(args, cfg.sampler or inst.sampler))
    report = invert(inst.system, inst.target, cfg)
    write_json(args.out, report.to_dict())
    state = "converged" if report.converged else "NOT converged"
    print(f"{state} after {report.iterations} iterations, residual {report.final_residual:.3e}; wrote {args.out}")
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_sample(args) -> int:
    inst = load_instance(args.instance)
    u = _potential(inst, args.potential)
    cfg = _sampler_from(args, inst.sampler)
    try:
        est = run_chain(inst.system, u, cfg)
    except SamplerError as exc:
        print(f"sampler failed: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    doc = est.to_dict()
    doc["sampler"] = cfg.to_dict()
    write_json(args.out, doc)
    print(f"acceptance {est.acceptance_rate:.3f}; wrote {args.out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    inst = load_instance(args.instance)
    reports = run_suite(inst.system, inst.target, inst.P, seed=args.seed, solver=inst.solver)
    if not reports:
        raise InputError("nothing to verify: instance has neither target nor P")
    docs = [r.to_dict() for r in reports]
    Path(args.out).write_text(json.dumps({"checks": docs}, indent=2, default=to_jsonable) + "\n")
    for r in reports:
        print(f"{r.name:22s} {r.status}")
    failed = any(r.status == FAIL for r in reports)
    return EXIT_VERIFY_FAILED if failed else EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "forward": cmd_forward,
    "invert": cmd_invert,
    "sample": cmd_sample,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
