"""Exact canonical ensemble by enumeration of all ``K**N`` configurations.

Every quantity is computed in the log domain.  Configurations are held as
dense arrays of shape ``(K,)*N`` so that the lifted potential
``U(x) = sum over m-subsets of u`` is a sum of broadcast views.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import BudgetExceededError, InputError
from .space import (
    StateSpace,
    SymmetricTable,
    dense_rank_array,
    integrate,
    inner,
    multisets,
    num_multisets,
)

__all__ = [
    "DEFAULT_BUDGET",
    "NORMALIZATION_TOL",
    "Interaction",
    "PotentialSpec",
    "CanonicalSystem",
    "EnsembleSummary",
    "lift",
    "total_potential",
    "log_partition",
    "canonical_probabilities",
    "m_density",
    "reduce_density",
    "log_F",
    "log_F_increment",
    "grad_log_F",
    "hessian_log_F",
    "bound_log",
    "summarize",
    "product_density",
]

DEFAULT_BUDGET = 2**24
NORMALIZATION_TOL = 1e-8

# An interaction term is just a symmetric table; its order is the table's order.
Interaction = SymmetricTable


def _subset_view(dense: np.ndarray, subset: Sequence[int], N: int) -> np.ndarray:
    shape = [1] * N
    for axis in subset:
        shape[axis] = dense.shape[0]
    return dense.reshape(shape)


def lift(table: SymmetricTable, N: int) -> np.ndarray:
    """Dense ``(K,)*N`` array of ``sum over k-subsets i1<...<ik of table(x_i1..x_ik)``."""
    k = table.order
    if k > N:
        raise InputError(f"cannot lift an order-{k} table to {N} particles")
    K = table.num_cells
    dense = table.to_dense()
    out = np.zeros((K,) * N)
    for subset in itertools.combinations(range(N), k):
        out += _subset_view(dense, subset, N)
    return out


@dataclass(frozen=True)
class PotentialSpec:
    """Fixed internal potential ``W``: a sum of lifted interaction terms, or a full table."""

    terms: tuple[SymmetricTable, ...] = ()
    full_table: SymmetricTable | None = None

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    @property
    def is_zero(self) -> bool:
        return not self.terms and self.full_table is None

    def validate(self, space: StateSpace, N: int):
        for t in self.terms:
            if t.space != space:
                raise InputError("W term lives on a different state space")
            if t.order > N:
                raise InputError(f"W term of order {t.order} exceeds N={N}")
        if self.full_table is not None:
            if self.full_table.space != space or self.full_table.order != N:
                raise InputError("full W table must be an order-N table on the system's space")

    def grid(self, space: StateSpace, N: int) -> np.ndarray:
        out = np.zeros((space.num_cells,) * N)
        for t in self.terms:
            out += lift(t, N)
        if self.full_table is not None:
            out += self.full_table.to_dense()
        return out

    def at(self, x: Sequence[int], N: int) -> float:
        total = 0.0
        for t in self.terms:
            for subset in itertools.combinations(range(N), t.order):
                total += t(*[x[i] for i in subset])
        if self.full_table is not None:
            total += self.full_table(*x)
        return total

    def all_terms(self, N: int) -> list[SymmetricTable]:
        """Terms with the full table (if any) treated as a single order-N term."""
        out = list(self.terms)
        if self.full_table is not None:
            out.append(self.full_table)
        return out


@dataclass(frozen=True)
class CanonicalSystem:
    """``N`` identical particles on a finite space with fixed potential ``W``.

    ``m`` is the order of the unknown interaction ``u``.
    """

    space: StateSpace
    N: int
    m: int
    W: PotentialSpec = field(default_factory=PotentialSpec)
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.N < 2:
            raise InputError("N must be >= 2")
        if not 1 <= self.m <= self.N:
            raise InputError(f"interaction order m={self.m} must satisfy 1 <= m <= N={self.N}")
        self.W.validate(self.space, self.N)

    @property
    def K(self) -> int:
        return self.space.num_cells

    @property
    def num_configurations(self) -> int:
        return self.K**self.N

    @property
    def num_subsets(self) -> int:
        """C(N, m): number of coordinate m-subsets."""
        return math.comb(self.N, self.m)

    @property
    def exact_feasible(self) -> bool:
        return self.num_configurations <= self.budget

    def require_exact(self):
        if not self.exact_feasible:
            raise BudgetExceededError(self.num_configurations, self.budget)

    def check_potential(self, u: SymmetricTable):
        if u.order != self.m or u.space != self.space:
            raise InputError(f"u must be an order-{self.m} table on the system's space")

    def zero_potential(self) -> SymmetricTable:
        return SymmetricTable.zeros(self.space, self.m)


@dataclass(frozen=True)
class EnsembleSummary:
    log_Z: float
    density: SymmetricTable
    log_F: float | None = None
    upper_bound_log: float | None = None


# ---------------------------------------------------------------------------
# forward map
# ---------------------------------------------------------------------------


def total_potential(sys: CanonicalSystem, u: SymmetricTable, x: Sequence[int]) -> float:
    """``W(x) + U(x)`` at a single ordered configuration."""
    sys.check_potential(u)
    x = tuple(int(c) for c in x)
    if len(x) != sys.N or any(c < 0 or c >= sys.K for c in x):
        raise InputError(f"configuration {x} is not an ordered {sys.N}-tuple of cells")
    U = 0.0
    for subset in itertools.combinations(range(sys.N), sys.m):
        U += u(*[x[i] for i in subset])
    return sys.W.at(x, sys.N) + U


def _log_boltzmann(sys: CanonicalSystem, u: SymmetricTable) -> np.ndarray:
    sys.check_potential(u)
    sys.require_exact()
    logw = np.log(sys.space.product_weights(sys.N))
    return logw - sys.W.grid(sys.space, sys.N) - lift(u, sys.N)


def log_partition(sys: CanonicalSystem, u: SymmetricTable) -> float:
    """``log Z(u) = log sum_x exp(-W(x) - U(x)) prod w``."""
    return float(logsumexp(_log_boltzmann(sys, u)))


def canonical_probabilities(sys: CanonicalSystem, u: SymmetricTable) -> tuple[np.ndarray, float]:
    """Configuration probabilities (masses, summing to 1) on the ``(K,)*N`` grid, and log Z."""
    a = _log_boltzmann(sys, u)
    log_Z = float(logsumexp(a))
    return np.exp(a - log_Z), log_Z


def _marginal_density(space: StateSpace, probs: np.ndarray, order: int) -> SymmetricTable:
    """Per-tuple density of the first ``order`` coordinates of a symmetric mass grid."""
    n = probs.ndim
    marg = probs.sum(axis=tuple(range(order, n))) if order < n else probs
    ms = multisets(space.num_cells, order)
    dens = marg[tuple(ms.T)] / np.prod(space.w[ms], axis=1)
    return SymmetricTable(space, order, dens)


def m_density(sys: CanonicalSystem, u: SymmetricTable, order: int | None = None) -> SymmetricTable:
    """Canonical ``order``-particle density (default ``sys.m``) at potential ``u``."""
    j = sys.m if order is None else int(order)
    if not 1 <= j <= sys.N:
        raise InputError(f"density order {j} outside [1, {sys.N}]")
    probs, _ = canonical_probabilities(sys, u)
    return _marginal_density(sys.space, probs, j)


def reduce_density(rho: SymmetricTable, order: int) -> SymmetricTable:
    """Integrate out ``rho.order - order`` coordinates against the cell weights."""
    if not 1 <= order < rho.order:
        raise InputError(f"cannot reduce an order-{rho.order} density to order {order}")
    masses = rho.to_dense() * rho.space.product_weights(rho.order)
    return _marginal_density(rho.space, masses, order)


def _check_target(sys: CanonicalSystem, target: SymmetricTable):
    if target.order != sys.m or target.space != sys.space:
        raise InputError(f"target must be an order-{sys.m} table on the system's space")
    total = integrate(target)
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise InputError(f"target is not normalized: integral = {total!r}")


def log_F(sys: CanonicalSystem, u: SymmetricTable, target: SymmetricTable) -> float:
    """``log F = -C(N,m) <target, u> - log Z(u)``."""
    _check_target(sys, target)
    return -sys.num_subsets * inner(target, u) - log_partition(sys, u)


def grad_log_F(sys: CanonicalSystem, u: SymmetricTable, target: SymmetricTable) -> SymmetricTable:
    """Gradient ``C(N,m) (rho_u - target)`` for the weighted ordered-tuple inner product."""
    _check_target(sys, target)
    rho_u = m_density(sys, u)
    return (rho_u - target) * sys.num_subsets


def log_F_increment(
    sys: CanonicalSystem,
    u: SymmetricTable,
    target: SymmetricTable,
    direction: SymmetricTable,
    step: float,
    probs: np.ndarray | None = None,
) -> float:
    """``log_F(u + step*direction) - log_F(u)`` without cancellation.

    The first-order part comes from the density mismatch; the remainder is
    ``-log E_u[exp(-step*(D - E_u D))]`` evaluated with ``expm1``/``log1p``,
    so increments far below the rounding level of ``log_F`` itself are kept.
    """
    _check_target(sys, target)
    sys.check_potential(direction)
    if probs is None:
        probs, _ = canonical_probabilities(sys, u)
    rho_u = _marginal_density(sys.space, probs, sys.m)
    C = sys.num_subsets
    D = lift(direction, sys.N)
    mean_D = float(np.sum(probs * D))
    first = step * C * inner(rho_u - target, direction)
    shift = -step * (D - mean_D)
    if np.max(np.abs(shift)) < 1.0:
        second = math.log1p(float(np.sum(probs * np.expm1(shift))))
    else:
        # long steps: no cancellation to fear, and expm1 could overflow
        with np.errstate(divide="ignore"):
            second = float(logsumexp(shift, b=probs))
    return first - second


def _subset_ranks(sys: CanonicalSystem) -> list[np.ndarray]:
    ranks = dense_rank_array(sys.K, sys.m)
    full = (sys.K,) * sys.N
    return [
        np.broadcast_to(_subset_view(ranks, s, sys.N), full).reshape(-1)
        for s in itertools.combinations(range(sys.N), sys.m)
    ]


def hessian_log_F(sys: CanonicalSystem, u: SymmetricTable) -> np.ndarray:
    """Dense Hessian over multiset ranks: ``-Cov(S_a, S_b)`` under the canonical law.

    ``S_a(x)`` counts the coordinate m-subsets of ``x`` whose multiset is ``a``.
    """
    probs, _ = canonical_probabilities(sys, u)
    p = probs.reshape(-1)
    R = num_multisets(sys.K, sys.m)
    sub = _subset_ranks(sys)
    mean = np.zeros(R)
    for r in sub:
        mean += np.bincount(r, weights=p, minlength=R)
    second = np.zeros(R * R)
    for r in sub:
        for s in sub:
            second += np.bincount(r * R + s, weights=p, minlength=R * R)
    cov = second.reshape(R, R) - np.outer(mean, mean)
    cov = 0.5 * (cov + cov.T)
    return -cov


def bound_log(P: SymmetricTable, W: PotentialSpec | None = None) -> float:
    """``integral of (W + log P)_+ P`` over ``Lambda^N``: log of the upper bound on F."""
    if np.any(P.values <= 0):
        raise InputError("P must be strictly positive")
    total = integrate(P)
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise InputError(f"P is not normalized: integral = {total!r}")
    N = P.order
    W = W or PotentialSpec()
    W.validate(P.space, N)
    dense = P.to_dense()
    integrand = np.maximum(W.grid(P.space, N) + np.log(dense), 0.0) * dense
    return float(np.sum(integrand * P.space.product_weights(N)))


def summarize(
    sys: CanonicalSystem,
    u: SymmetricTable,
    target: SymmetricTable | None = None,
    P: SymmetricTable | None = None,
) -> EnsembleSummary:
    probs, log_Z = canonical_probabilities(sys, u)
    density = _marginal_density(sys.space, probs, sys.m)
    lf = None
    if target is not None:
        _check_target(sys, target)
        lf = -sys.num_subsets * inner(target, u) - log_Z
    ub = bound_log(P, sys.W) if P is not None else None
    return EnsembleSummary(log_Z=log_Z, density=density, log_F=lf, upper_bound_log=ub)


def product_density(space: StateSpace, p, N: int) -> SymmetricTable:
    """Symmetric order-N density ``p(x1)...p(xN)`` from a one-particle density ``p``."""
    p = np.asarray(p, dtype=np.float64)
    ms = multisets(space.num_cells, N)
    return SymmetricTable(space, N, np.prod(p[ms], axis=1))

