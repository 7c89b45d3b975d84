"""Inverse solver: maximize the concave objective ``log F`` over m-body potentials.

The maximizer reproduces the target density, and it is unique up to an
additive constant.  Returned potentials are gauge-fixed to weighted mean zero.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import ensemble
from .ensemble import CanonicalSystem
from .errors import InputError
from .sampler import ChainConfig, estimate_gradient
from .space import SymmetricTable, integrate

__all__ = [
    "SolverConfig",
    "SolveReport",
    "gauge_fix",
    "invert",
    "trivial_invert",
    "potential_sensitivity",
]

log = logging.getLogger(__name__)

METHODS = ("newton", "gradient-ascent")
ENGINES = ("exact", "sampled")


@dataclass(frozen=True)
class SolverConfig:
    method: str = "newton"
    tol: float = 1e-10
    max_iters: int | None = None
    initial_u: SymmetricTable | None = None
    initial_step: float = 1.0
    shrink: float = 0.5
    sufficient_increase: float = 1e-4
    min_step: float = 1e-20
    engine: str = "exact"
    sampler: ChainConfig | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise InputError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.engine not in ENGINES:
            raise InputError(f"unknown engine {self.engine!r}; choose from {ENGINES}")
        if not self.tol > 0:
            raise InputError("tol must be positive")
        if not 0 < self.shrink < 1:
            raise InputError("shrink factor must lie in (0, 1)")
        if not 0 < self.sufficient_increase < 1:
            raise InputError("sufficient-increase constant must lie in (0, 1)")
        if self.max_iters is not None and self.max_iters < 0:
            raise InputError("max_iters must be >= 0")

    @property
    def iteration_limit(self) -> int:
        if self.max_iters is not None:
            return self.max_iters
        if self.engine == "sampled":
            return 200
        return 100 if self.method == "newton" else 20000


@dataclass(frozen=True)
class SolveReport:
    u: SymmetricTable
    iterations: int
    final_residual: float
    final_l1: float
    log_F_trace: list[float]
    converged: bool
    method: str = "newton"
    engine: str = "exact"
    log_Z: float | None = None
    residual_trace: list[float] = field(default_factory=list)
    u_sup_trace: list[float] = field(default_factory=list)
    final_stderr: float | None = None
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "u": self.u.to_dict(),
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "final_l1": self.final_l1,
            "log_F_trace": list(self.log_F_trace),
            "converged": self.converged,
            "method": self.method,
            "engine": self.engine,
            "log_Z": self.log_Z,
            "residual_trace": list(self.residual_trace),
            "u_sup_trace": list(self.u_sup_trace),
            "final_stderr": self.final_stderr,
            "message": self.message,
        }


def gauge_fix(u: SymmetricTable) -> SymmetricTable:
    """Shift ``u`` by a constant so its weighted mean over ordered tuples is zero."""
    measure = u.cell_measure()
    shift = float(np.sum(measure * u.values) / np.sum(measure))
    return u - shift


def _validate_target(sys: CanonicalSystem, target: SymmetricTable):
    if target.order != sys.m or target.space != sys.space:
        raise InputError(f"target must be an order-{sys.m} table on the system's space")
    if np.any(target.values <= 0):
        bad = int(np.argmin(target.values))
        raise InputError(f"target must be strictly positive (entry {bad} is {target.values[bad]!r})")
    total = integrate(target)
    if abs(total - 1.0) > ensemble.NORMALIZATION_TOL:
        raise InputError(f"target is not normalized (integral {total!r}); it is never rescaled")


def _l1(sys: CanonicalSystem, rho_u: SymmetricTable, target: SymmetricTable) -> float:
    return float(np.sum(target.cell_measure() * np.abs(rho_u.values - target.values)))


def invert(
    sys: CanonicalSystem, target: SymmetricTable, cfg: SolverConfig | None = None
) -> SolveReport:
    """Find the gauge-fixed ``u`` whose canonical m-density equals ``target``.

    Hitting ``max_iters`` is reported through ``converged=False``, not raised.
    """
    cfg = cfg or SolverConfig()
    _validate_target(sys, target)
    if cfg.initial_u is not None:
        sys.check_potential(cfg.initial_u)
        u = gauge_fix(cfg.initial_u)
    else:
        u = sys.zero_potential()
    if cfg.engine == "sampled":
        return _invert_sampled(sys, target, u, cfg)
    sys.require_exact()
    return _invert_exact(sys, target, u, cfg)


def _newton_direction(sys: CanonicalSystem, u: SymmetricTable, raw_grad: np.ndarray) -> np.ndarray:
    neg_h = -ensemble.hessian_log_F(sys, u)
    dim = neg_h.shape[0]
    ridge = 1e-10 * np.trace(neg_h) / dim
    # the all-ones null direction is pinned by a rank-one term; ridge for degeneracy
    scale = np.trace(neg_h) / dim if np.trace(neg_h) > 0 else 1.0
    ones = np.ones(dim)
    A = neg_h + (scale / dim) * np.outer(ones, ones) + ridge * np.eye(dim)
    try:
        d = np.linalg.solve(A, raw_grad)
    except np.linalg.LinAlgError:
        d, *_ = np.linalg.lstsq(A, raw_grad, rcond=None)
    return d - d.mean()


def potential_sensitivity(sys: CanonicalSystem, u: SymmetricTable) -> float:
    """Sup-norm gain of the linearized map from a density error to a gauge-fixed potential error.

    A converged solve with density residual ``r`` sits within about
    ``r * potential_sensitivity`` of the exact solution.
    """
    neg_h = -ensemble.hessian_log_F(sys, u)
    dim = neg_h.shape[0]
    scale = np.trace(neg_h) / dim if np.trace(neg_h) > 0 else 1.0
    A = neg_h + (scale / dim) * np.ones((dim, dim))
    measure = u.cell_measure()
    gain = np.linalg.solve(A, np.diag(sys.num_subsets * measure))
    projector = np.eye(dim) - np.outer(np.ones(dim), measure) / measure.sum()
    return float(np.max(np.sum(np.abs(projector @ gain), axis=1)))


def _invert_exact(sys, target, u, cfg) -> SolveReport:
    C = sys.num_subsets
    measure = target.cell_measure()
    probs, log_Z = ensemble.canonical_probabilities(sys, u)
    rho_u = ensemble._marginal_density(sys.space, probs, sys.m)
    current = ensemble.log_F(sys, u, target)
    trace = [current]
    residuals = []
    u_sups = []
    converged = False
    message = ""
    it = 0
    limit = cfg.iteration_limit
    step0 = cfg.initial_step
    polishing = False
    while True:
        residual = float(np.max(np.abs(rho_u.values - target.values)))
        residuals.append(residual)
        u_sups.append(float(np.max(np.abs(u.values))))
        if residual <= cfg.tol:
            # Newton takes one extra step once inside tol; near the solution it costs
            # one iteration and removes most of the remaining error in u
            if cfg.method != "newton" or polishing or it >= limit:
                converged = True
                break
            polishing = True
        if it >= limit:
            message = "iteration limit reached"
            break
        diff = rho_u.values - target.values
        if cfg.method == "newton":
            raw_grad = C * measure * diff
            d = u.with_values(_newton_direction(sys, u, raw_grad))
            slope = float(raw_grad @ d.values)
            t = 1.0
        else:
            d = rho_u.with_values(C * diff)
            slope = float(np.sum(measure * d.values**2))
            t = step0
        if not slope > 0:
            converged = polishing
            message = "" if polishing else "no ascent direction (residual below rounding level)"
            break
        accepted = False
        while t >= cfg.min_step:
            gain = ensemble.log_F_increment(sys, u, target, d, t, probs=probs)
            if gain >= cfg.sufficient_increase * t * slope:
                accepted = True
                break
            t *= cfg.shrink
        if not accepted:
            converged = polishing
            message = "" if polishing else "line search failed"
            break
        u = gauge_fix(u + d * t)
        probs, log_Z = ensemble.canonical_probabilities(sys, u)
        rho_u = ensemble._marginal_density(sys.space, probs, sys.m)
        current += gain
        trace.append(current)
        it += 1
        if cfg.method == "gradient-ascent":
            # next search starts from twice the last accepted step
            step0 = 2.0 * t
    if not converged:
        log.info("solver stopped after %d iterations: %s", it, message)
    return SolveReport(
        u=u,
        iterations=it,
        final_residual=residuals[-1],
        final_l1=_l1(sys, rho_u, target),
        log_F_trace=trace,
        converged=converged,
        method=cfg.method,
        engine="exact",
        log_Z=log_Z,
        residual_trace=residuals,
        u_sup_trace=u_sups,
        message=message,
    )


def _invert_sampled(sys, target, u, cfg) -> SolveReport:
    chain = cfg.sampler or ChainConfig()
    seeds = np.random.SeedSequence(chain.seed)
    residuals = []
    u_sups = []
    converged = False
    message = ""
    limit = cfg.iteration_limit
    residual = math.inf
    stderr = math.inf
    rho_hat = None
    it = 0
    while True:
        iter_cfg = chain.with_seed(int(seeds.spawn(1)[0].generate_state(1)[0]))
        grad, grad_err, est = estimate_gradient(sys, u, target, iter_cfg, return_estimate=True)
        rho_hat = est.mean
        residual = float(np.max(np.abs(grad.values))) / sys.num_subsets
        stderr = float(np.max(grad_err.values)) / sys.num_subsets
        residuals.append(residual)
        u_sups.append(float(np.max(np.abs(u.values))))
        if residual <= cfg.tol + 3.0 * stderr:
            converged = True
            break
        if it >= limit:
            message = "iteration limit reached"
            break
        step = cfg.initial_step / math.sqrt(it + 1.0)
        u = gauge_fix(u + grad * step)
        it += 1
    return SolveReport(
        u=u,
        iterations=it,
        final_residual=residual,
        final_l1=_l1(sys, rho_hat, target),
        log_F_trace=[],
        converged=converged,
        method="gradient-ascent",
        engine="sampled",
        residual_trace=residuals,
        u_sup_trace=u_sups,
        final_stderr=stderr,
        message=message,
    )


def trivial_invert(sys: CanonicalSystem, target: SymmetricTable) -> SymmetricTable:
    """Closed-form solution when ``m == N``: ``u = -log(target) - W`` (gauge-fixed)."""
    if sys.m != sys.N:
        raise InputError(f"closed form needs m == N (got m={sys.m}, N={sys.N})")
    _validate_target(sys, target)
    ranks_dense = target.to_dense()
    W_dense = sys.W.grid(sys.space, sys.N)
    u_dense = -np.log(ranks_dense) - W_dense
    return gauge_fix(SymmetricTable.from_dense(sys.space, u_dense))
