"""Weighted finite state spaces and symmetric tables indexed by multisets.

A symmetric function on ``Lambda^k`` is stored once per multiset of cells
(sorted ``k``-tuple), in lexicographic order of the sorted tuples.  Values are
per ordered tuple: integrating a table multiplies each stored value by the
number of orderings of its multiset and by the product of cell weights.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError

__all__ = [
    "StateSpace",
    "SymmetricTable",
    "num_multisets",
    "rank",
    "unrank",
    "multiplicity",
    "multisets",
    "multiplicities",
    "dense_rank_array",
    "integrate",
    "inner",
    "symmetrize",
    "random_table",
]


@dataclass(frozen=True)
class StateSpace:
    """Finite discretization of a measure space: ``K`` cells with positive weights."""

    weights: tuple[float, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if len(w) < 1:
            raise InputError("a state space needs at least one cell")
        if not all(math.isfinite(x) and x > 0 for x in w):
            raise InputError(f"cell weights must be positive and finite, got {w}")
        object.__setattr__(self, "weights", w)
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != len(w):
                raise InputError("number of labels does not match number of cells")
            object.__setattr__(self, "labels", labels)

    @classmethod
    def uniform(cls, num_cells: int, weight: float = 1.0) -> "StateSpace":
        if num_cells < 1:
            raise InputError("num_cells must be >= 1")
        return cls((weight,) * num_cells)

    @property
    def num_cells(self) -> int:
        return len(self.weights)

    @property
    def w(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.float64)

    @property
    def total_measure(self) -> float:
        return float(math.fsum(self.weights))

    def product_weights(self, k: int) -> np.ndarray:
        """Dense array of shape ``(K,)*k`` holding ``w[x1]*...*w[xk]``."""
        out = np.ones((1,) * k)
        for axis in range(k):
            shape = [1] * k
            shape[axis] = self.num_cells
            out = out * self.w.reshape(shape)
        return out


# ---------------------------------------------------------------------------
# multiset combinatorics
# ---------------------------------------------------------------------------


def num_multisets(K: int, k: int) -> int:
    """Number of multisets of size ``k`` drawn from ``K`` cells, C(K+k-1, k)."""
    return math.comb(K + k - 1, k)


def _check_multiset(alpha: Sequence[int], K: int) -> tuple[int, ...]:
    alpha = tuple(int(a) for a in alpha)
    if not alpha:
        raise InputError("a multiset index needs order >= 1")
    if any(a < 0 or a >= K for a in alpha):
        raise InputError(f"multiset {alpha} has entries outside [0, {K})")
    if any(alpha[i] > alpha[i + 1] for i in range(len(alpha) - 1)):
        raise InputError(f"multiset {alpha} is not sorted nondecreasing")
    return alpha


def rank(alpha: Sequence[int], K: int) -> int:
    """Lexicographic rank of the sorted tuple ``alpha`` among all multisets."""
    alpha = _check_multiset(alpha, K)
    k = len(alpha)
    r = 0
    lo = 0
    for i, a in enumerate(alpha):
        rest = k - i - 1
        # tuples whose i-th entry is c < a, with the remaining entries >= c
        for c in range(lo, a):
            r += math.comb(K - c + rest - 1, rest)
        lo = a
    return r


def unrank(index: int, k: int, K: int) -> tuple[int, ...]:
    """Inverse of :func:`rank`."""
    total = num_multisets(K, k)
    if k < 1:
        raise InputError("order must be >= 1")
    if not 0 <= index < total:
        raise InputError(f"rank {index} outside [0, {total})")
    out = []
    lo = 0
    for i in range(k):
        rest = k - i - 1
        c = lo
        while True:
            block = math.comb(K - c + rest - 1, rest)
            if index < block:
                break
            index -= block
            c += 1
        out.append(c)
        lo = c
    return tuple(out)


def multiplicity(alpha: Sequence[int]) -> int:
    """Number of ordered tuples that sort to ``alpha``: k! / prod(count!)."""
    counts = {}
    for a in alpha:
        counts[a] = counts.get(a, 0) + 1
    out = math.factorial(len(alpha))
    for c in counts.values():
        out //= math.factorial(c)
    return out


@lru_cache(maxsize=None)
def _multisets(K: int, k: int) -> np.ndarray:
    arr = np.array(list(itertools.combinations_with_replacement(range(K), k)), dtype=np.int64)
    arr = arr.reshape(-1, k)
    arr.setflags(write=False)
    return arr


def multisets(K: int, k: int) -> np.ndarray:
    """All multisets of order ``k`` as an ``(R, k)`` int array in rank order."""
    return _multisets(int(K), int(k))


@lru_cache(maxsize=None)
def _multiplicities(K: int, k: int) -> np.ndarray:
    arr = np.array([multiplicity(a) for a in _multisets(K, k)], dtype=np.float64)
    arr.setflags(write=False)
    return arr


def multiplicities(K: int, k: int) -> np.ndarray:
    return _multiplicities(int(K), int(k))


def rank_sorted_rows(sorted_tuples: np.ndarray, K: int) -> np.ndarray:
    """Vectorized :func:`rank` for an ``(n, k)`` array of already-sorted rows."""
    sorted_tuples = np.asarray(sorted_tuples, dtype=np.int64)
    n, k = sorted_tuples.shape
    # cum[rest, c] = number of tuples whose current entry is below c
    cum = np.zeros((k, K + 1), dtype=np.int64)
    for rest in range(k):
        blocks = [math.comb(K - c + rest - 1, rest) for c in range(K)]
        cum[rest, 1:] = np.cumsum(blocks)
    out = np.zeros(n, dtype=np.int64)
    lo = np.zeros(n, dtype=np.int64)
    for i in range(k):
        rest = k - i - 1
        a = sorted_tuples[:, i]
        out += cum[rest, a] - cum[rest, lo]
        lo = a
    return out


@lru_cache(maxsize=None)
def _dense_rank_array(K: int, k: int) -> np.ndarray:
    tuples = np.indices((K,) * k).reshape(k, -1).T
    out = rank_sorted_rows(np.sort(tuples, axis=1), K).reshape((K,) * k)
    out.setflags(write=False)
    return out


def dense_rank_array(K: int, k: int) -> np.ndarray:
    """Array of shape ``(K,)*k`` mapping every ordered tuple to its multiset rank."""
    return _dense_rank_array(int(K), int(k))


# ---------------------------------------------------------------------------
# symmetric tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SymmetricTable:
    """A finite symmetric real function on ``Lambda^k``, one value per multiset."""

    space: StateSpace
    order: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        k = int(self.order)
        if k < 1:
            raise InputError("table order must be >= 1")
        vals = np.array(self.values, dtype=np.float64).reshape(-1)
        expected = num_multisets(self.space.num_cells, k)
        if vals.size != expected:
            raise InputError(
                f"order-{k} table on {self.space.num_cells} cells needs {expected} values, got {vals.size}"
            )
        if not np.all(np.isfinite(vals)):
            raise InputError("table values must be finite (hard cores are not supported)")
        vals.setflags(write=False)
        object.__setattr__(self, "order", k)
        object.__setattr__(self, "values", vals)

    # construction -----------------------------------------------------------

    @classmethod
    def zeros(cls, space: StateSpace, order: int) -> "SymmetricTable":
        return cls.constant(space, order, 0.0)

    @classmethod
    def constant(cls, space: StateSpace, order: int, value: float) -> "SymmetricTable":
        return cls(space, order, np.full(num_multisets(space.num_cells, order), float(value)))

    @classmethod
    def from_function(cls, space: StateSpace, order: int, func) -> "SymmetricTable":
        """Evaluate ``func(*cells)`` at the sorted representative of each multiset."""
        ms = multisets(space.num_cells, order)
        return cls(space, order, [func(*alpha) for alpha in ms])

    @classmethod
    def from_dense(cls, space: StateSpace, dense) -> "SymmetricTable":
        """Build from an array on ordered tuples, averaging over orderings."""
        return symmetrize(space, dense)

    # access -----------------------------------------------------------------

    @property
    def num_cells(self) -> int:
        return self.space.num_cells

    def __len__(self) -> int:
        return self.values.size

    def __call__(self, *cells: int) -> float:
        if len(cells) == 1 and isinstance(cells[0], (tuple, list)):
            cells = tuple(cells[0])
        if len(cells) != self.order:
            raise InputError(f"expected {self.order} cells, got {len(cells)}")
        return float(self.values[rank(sorted(cells), self.num_cells)])

    def to_dense(self) -> np.ndarray:
        """Array of shape ``(K,)*k`` on ordered tuples."""
        return self.values[dense_rank_array(self.num_cells, self.order)]

    def cell_measure(self) -> np.ndarray:
        """Per-multiset weight ``multiplicity * prod w``: the measure of its orbit."""
        K, k = self.num_cells, self.order
        ms = multisets(K, k)
        return multiplicities(K, k) * np.prod(self.space.w[ms], axis=1)

    def mass(self) -> np.ndarray:
        """Per-multiset integral contribution ``multiplicity * prod w * value``."""
        return self.cell_measure() * self.values

    def with_values(self, values) -> "SymmetricTable":
        return SymmetricTable(self.space, self.order, values)

    def sup_distance(self, other: "SymmetricTable") -> float:
        self._check_compatible(other)
        return float(np.max(np.abs(self.values - other.values)))

    def _check_compatible(self, other: "SymmetricTable"):
        if self.order != other.order or self.space != other.space:
            raise InputError("tables live on different spaces or have different orders")

    # arithmetic -------------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, SymmetricTable):
            self._check_compatible(other)
            return other.values
        return float(other)

    def __add__(self, other):
        return self.with_values(self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.with_values(self.values - self._coerce(other))

    def __rsub__(self, other):
        return self.with_values(self._coerce(other) - self.values)

    def __mul__(self, scalar):
        return self.with_values(self.values * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self.with_values(self.values / float(scalar))

    def __neg__(self):
        return self.with_values(-self.values)

    def __eq__(self, other):
        if not isinstance(other, SymmetricTable):
            return NotImplemented
        return (
            self.order == other.order
            and self.space == other.space
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    # serialization ----------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "num_cells": self.num_cells,
            "weights": list(self.space.weights),
            "values": [float(v) for v in self.values],
        }

    @classmethod
    def from_dict(cls, doc: dict, space: StateSpace | None = None) -> "SymmetricTable":
        if space is None:
            space = StateSpace(tuple(doc["weights"]))
            if "num_cells" in doc and int(doc["num_cells"]) != space.num_cells:
                raise InputError("num_cells disagrees with the weights array")
        return cls(space, int(doc["order"]), doc["values"])


def integrate(f: SymmetricTable) -> float:
    """Integral of ``f`` over ``Lambda^k`` against the product weight measure."""
    return float(np.sum(f.mass()))


def inner(f: SymmetricTable, g: SymmetricTable) -> float:
    """Weighted inner product over ordered tuples, ``integral of f*g``."""
    f._check_compatible(g)
    return float(np.sum(f.cell_measure() * f.values * g.values))


def symmetrize(space: StateSpace, dense) -> SymmetricTable:
    """Average a table on ordered tuples over all orderings of each multiset."""
    dense = np.asarray(dense, dtype=np.float64)
    k = dense.ndim
    K = space.num_cells
    if dense.shape != (K,) * k:
        raise InputError(f"expected an array of shape {(K,) * k}, got {dense.shape}")
    if not np.all(np.isfinite(dense)):
        raise InputError("table values must be finite")
    ranks = dense_rank_array(K, k).reshape(-1)
    R = num_multisets(K, k)
    sums = np.bincount(ranks, weights=dense.reshape(-1), minlength=R)
    return SymmetricTable(space, k, sums / multiplicities(K, k))


def random_table(
    space: StateSpace, order: int, low: float = -1.0, high: float = 1.0, seed=None
) -> SymmetricTable:
    """Table with values drawn uniformly from ``[low, high]``."""
    if low > high:
        raise InputError(f"empty range [{low}, {high}]")
    rng = np.random.default_rng(seed)
    R = num_multisets(space.num_cells, order)
    if low == high:
        return SymmetricTable.constant(space, order, low)
    return SymmetricTable(space, order, rng.uniform(low, high, size=R))


def iter_multisets(K: int, k: int) -> Iterable[tuple[int, ...]]:
    return itertools.combinations_with_replacement(range(K), k)
