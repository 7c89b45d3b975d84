"""Executable checks of the structural properties of the inverse problem.

Each checker returns a :class:`CheckReport` whose ``witness`` records the
inputs and margins that decided the outcome; failures always carry one.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from . import ensemble
from .ensemble import CanonicalSystem
from .errors import InputError
from .solver import SolverConfig, invert, potential_sensitivity, trivial_invert
from .space import SymmetricTable, inner, multisets, random_table

__all__ = [
    "CheckReport",
    "EQUALITY_TOL",
    "SLACK_TOL",
    "check_concavity",
    "check_bound",
    "check_condition_P",
    "check_consistency",
    "check_uniqueness",
    "check_gradient_fd",
    "run_suite",
]

# suite-wide constants: ~100x accumulated round-off at desk scale
EQUALITY_TOL = 1e-10
SLACK_TOL = 1e-12
FD_STEP = 1e-5
FD_RTOL = 1e-6
# directional derivatives below this are compared absolutely (gauge directions)
FD_ATOL = 1e-9

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


@dataclass(frozen=True)
class CheckReport:
    name: str
    status: str
    witness: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_dict(self) -> dict:
        return {"name": self.name, "status": self.status, "passed": self.passed, "witness": self.witness}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=to_jsonable)


def to_jsonable(obj):
    if isinstance(obj, SymmetricTable):
        return obj.to_dict()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _report(name, ok, witness):
    return CheckReport(name, PASS if ok else FAIL, witness)


def _is_constant(t: SymmetricTable) -> bool:
    scale = max(1.0, float(np.max(np.abs(t.values))))
    return float(np.ptp(t.values)) <= 1e-12 * scale


def check_concavity(
    sys: CanonicalSystem,
    target: SymmetricTable,
    u0: SymmetricTable,
    u1: SymmetricTable,
    lambdas: Sequence[float] = (0.1, 0.25, 0.5, 0.75, 0.9),
) -> CheckReport:
    """Concavity of ``log F`` along the segment from ``u0`` to ``u1``.

    Equality is required when ``u1 - u0`` is constant, a strictly positive
    margin at the midpoint otherwise.
    """
    lambdas = [float(l) for l in lambdas]
    if any(not 0 < l < 1 for l in lambdas):
        raise InputError("interpolation weights must lie in (0, 1)")
    f0 = ensemble.log_F(sys, u0, target)
    f1 = ensemble.log_F(sys, u1, target)

    def margin(lam):
        mid = u1 * lam + u0 * (1.0 - lam)
        return ensemble.log_F(sys, mid, target) - (lam * f1 + (1.0 - lam) * f0)

    margins = {lam: margin(lam) for lam in lambdas}
    worst_lam = min(margins, key=margins.get)
    constant = _is_constant(u1 - u0)
    ok = margins[worst_lam] >= -SLACK_TOL
    witness = {
        "margins": {str(k): v for k, v in margins.items()},
        "worst_lambda": worst_lam,
        "worst_margin": margins[worst_lam],
        "constant_difference": constant,
    }
    if constant:
        max_abs = max(abs(v) for v in margins.values())
        witness["max_abs_margin"] = max_abs
        ok = ok and max_abs <= EQUALITY_TOL
    else:
        half = margins[0.5] if 0.5 in margins else margin(0.5)
        witness["midpoint_margin"] = half
        ok = ok and half > 0
    return _report("concavity", ok, witness)


def check_bound(
    sys: CanonicalSystem, P: SymmetricTable, potentials: Iterable[SymmetricTable]
) -> CheckReport:
    """``log F(u) <= bound_log(P, W)`` for every supplied ``u``."""
    target = ensemble.reduce_density(P, sys.m) if sys.m < P.order else P
    bound = ensemble.bound_log(P, sys.W)
    values = [ensemble.log_F(sys, u, target) for u in potentials]
    worst = int(np.argmax(values)) if values else None
    ok = all(v <= bound + EQUALITY_TOL for v in values)
    witness = {"bound_log": bound, "num_potentials": len(values)}
    if values:
        witness.update(max_log_F=values[worst], worst_index=worst, margin=bound - values[worst])
    return _report("bound", ok, witness)


def check_condition_P(P: SymmetricTable) -> CheckReport:
    """Lower bound ``P(., x_N) >= gamma(x_N) * rho^(N-1)`` on a set of positive weight."""
    N = P.order
    if N < 2:
        raise InputError("P must have order >= 2")
    dense = P.to_dense()
    rho = ensemble.reduce_density(P, N - 1).to_dense()
    ratio = dense / rho[..., None]
    gamma = ratio.reshape(-1, P.num_cells).min(axis=0)
    w = P.space.w
    positive = (gamma > 0) & (w > 0)
    ok = bool(np.any(positive))
    witness = {
        "gamma": gamma.tolist(),
        "cells_with_positive_gamma": np.flatnonzero(positive).tolist(),
        "measure_of_positive_set": float(np.sum(w[positive])),
    }
    return _report("condition_P", ok, witness)


def check_consistency(candidate: SymmetricTable, P: SymmetricTable) -> CheckReport:
    """``candidate`` equals the reduction of ``P`` to its order, in sup-norm."""
    m = candidate.order
    reduced = ensemble.reduce_density(P, m) if m < P.order else P
    diff = np.abs(reduced.values - candidate.values)
    worst = int(np.argmax(diff))
    sup = float(diff[worst])
    ok = sup <= EQUALITY_TOL
    witness = {
        "sup_error": sup,
        "worst_rank": worst,
        "worst_multiset": multisets(candidate.num_cells, m)[worst].tolist(),
        "expected": float(reduced.values[worst]),
        "found": float(candidate.values[worst]),
    }
    return _report("consistency", ok, witness)


def check_uniqueness(
    sys: CanonicalSystem,
    target: SymmetricTable,
    inits: Sequence[SymmetricTable | None],
    cfg: SolverConfig | None = None,
    atol: float | None = None,
) -> CheckReport:
    """Solutions from different starting points agree after gauge fixing.

    The default tolerance is ten times the solver's density tolerance,
    carried into potential units by :func:`potential_sensitivity`.  With
    ``m == N`` the closed-form solution joins the comparison.
    """
    cfg = cfg or SolverConfig()
    solutions = []
    labels = []
    runs = []
    for k, init in enumerate(inits):
        rep = invert(sys, target, replace(cfg, initial_u=init))
        runs.append({"init": k, "converged": rep.converged, "residual": rep.final_residual,
                     "iterations": rep.iterations})
        solutions.append(rep.u)
        labels.append(f"init[{k}]")
    witness = {"runs": runs}
    if not all(r["converged"] for r in runs):
        return CheckReport("uniqueness", INCONCLUSIVE, witness)
    if sys.m == sys.N:
        solutions.append(trivial_invert(sys, target))
        labels.append("closed_form")
    if atol is None:
        sensitivity = potential_sensitivity(sys, solutions[0]) if sys.exact_feasible else 1.0
        witness["sensitivity"] = sensitivity
        atol = 10 * cfg.tol * max(1.0, sensitivity)
    witness["tolerance"] = atol
    ref = solutions[0]
    dists = [ref.sup_distance(s) for s in solutions[1:]]
    witness["sup_distances"] = dict(zip(labels[1:], dists))
    ok = all(d <= atol for d in dists)
    return _report("uniqueness", ok, witness)


def check_gradient_fd(
    sys: CanonicalSystem,
    target: SymmetricTable,
    u: SymmetricTable,
    directions: Sequence[SymmetricTable],
    step: float = FD_STEP,
) -> CheckReport:
    """Analytic directional derivatives of ``log F`` against central differences."""
    grad = ensemble.grad_log_F(sys, u, target)
    rows = []
    ok = True
    for k, xi in enumerate(directions):
        analytic = inner(grad, xi)
        fp = ensemble.log_F(sys, u + xi * step, target)
        fm = ensemble.log_F(sys, u - xi * step, target)
        fd = (fp - fm) / (2.0 * step)
        scale = max(abs(analytic), abs(fd))
        if scale <= FD_ATOL:
            err, this_ok = abs(analytic - fd), True
        else:
            err = abs(analytic - fd) / scale
            this_ok = err <= FD_RTOL
        ok = ok and this_ok
        rows.append({"direction": k, "analytic": analytic, "finite_difference": fd,
                     "relative_error": err, "passed": this_ok})
    worst = max(rows, key=lambda r: r["relative_error"]) if rows else None
    return _report("gradient_fd", ok, {"step": step, "directions": rows, "worst": worst})


def run_suite(
    sys: CanonicalSystem,
    target: SymmetricTable | None = None,
    P: SymmetricTable | None = None,
    seed: int = 0,
    num_potentials: int = 20,
    solver: SolverConfig | None = None,
) -> list[CheckReport]:
    """Run every applicable checker on one instance."""
    rng = np.random.default_rng(seed)

    def rand_u():
        return random_table(sys.space, sys.m, -1.0, 1.0, rng)

    reports = []

    def run(name, fn, *args):
        # a malformed input (say an unnormalized target) fails the check instead of aborting the suite
        try:
            rep = fn(*args)
        except InputError as exc:
            rep = CheckReport(name, FAIL, {"error": str(exc)})
        reports.append(rep if rep.name == name else CheckReport(name, rep.status, rep.witness))

    if P is not None:
        run("condition_P", check_condition_P, P)
        if target is not None:
            run("consistency", check_consistency, target, P)
        else:
            target = ensemble.reduce_density(P, sys.m) if sys.m < sys.N else P
        run("bound", check_bound, sys, P, [rand_u() for _ in range(num_potentials)])
    if target is None:
        return reports
    u0, u1 = rand_u(), rand_u()
    run("concavity", check_concavity, sys, target, u0, u1)
    run("concavity_equality", check_concavity, sys, target, u0, u0 + 3.0)
    directions = [rand_u() for _ in range(5)] + [SymmetricTable.constant(sys.space, sys.m, 1.0)]
    run("gradient_fd", check_gradient_fd, sys, target, rand_u(), directions)
    inits = [None, rand_u(), -rand_u()]
    run("uniqueness", check_uniqueness, sys, target, inits, solver)
    return reports
