"""Metropolis estimation of canonical m-particle densities.

Used when ``K**N`` is beyond exact enumeration.  Each chain performs
sequential single-site sweeps; a move of particle ``i`` only touches the
interaction subsets that contain ``i``.  Error bars come from batch means,
pooled over independent chains.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numba
import numpy as np

from .errors import InputError, SamplerError
from .space import SymmetricTable, dense_rank_array, num_multisets

__all__ = ["ChainConfig", "DensityEstimate", "run_chain", "estimate_gradient"]

_BLOCK_SWEEPS = 8192


@dataclass(frozen=True)
class ChainConfig:
    num_chains: int = 4
    sweeps: int = 10000
    burn_in: int = 1000
    seed: int = 0
    num_batches: int = 20

    def __post_init__(self):
        if self.num_chains < 1:
            raise InputError("num_chains must be >= 1")
        if self.burn_in < 0 or self.sweeps <= self.burn_in:
            raise InputError("need sweeps > burn_in >= 0")
        if self.num_batches < 20:
            raise InputError("batch means need at least 20 batches per chain")
        if self.sweeps - self.burn_in < self.num_batches:
            raise InputError("fewer production sweeps than batches")

    def with_seed(self, seed: int) -> "ChainConfig":
        return replace(self, seed=int(seed))

    def to_dict(self) -> dict:
        return {
            "num_chains": self.num_chains,
            "sweeps": self.sweeps,
            "burn_in": self.burn_in,
            "seed": self.seed,
            "num_batches": self.num_batches,
        }


@dataclass(frozen=True)
class DensityEstimate:
    mean: SymmetricTable
    stderr: SymmetricTable
    acceptance_rate: float
    num_batches: int = 0

    def to_dict(self) -> dict:
        return {
            "order": self.mean.order,
            "values": self.mean.to_dict()["values"],
            "stderr": self.stderr.to_dict()["values"],
            "acceptance_rate": self.acceptance_rate,
            "num_batches": self.num_batches,
        }


# ---------------------------------------------------------------------------
# kernel
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _local_energy(x, i, c, K, tab, tab_off, tab_order, others, row_start, row_end, kpow):
    e = 0.0
    for t in range(tab_off.shape[0]):
        k = tab_order[t]
        base = c * kpow[k - 1]
        for r in range(row_start[t, i], row_end[t, i]):
            idx = base
            for j in range(k - 1):
                idx += x[others[r, j]] * kpow[k - 2 - j]
            e += tab[tab_off[t] + idx]
    return e


@numba.njit(cache=True)
def _sweep_block(
    x, K, logw, tab, tab_off, tab_order, others, row_start, row_end, kpow,
    proposals, uniforms, batch_of_sweep, subsets, rank_flat, acc,
):
    N = x.shape[0]
    m = subsets.shape[1]
    # counts[0:2] burn-in proposals/acceptances, counts[2:4] production; a redraw of
    # the current cell is not a move and is left out of both
    counts = np.zeros(4, dtype=np.int64)
    for s in range(proposals.shape[0]):
        slot = 0 if batch_of_sweep[s] < 0 else 2
        for i in range(N):
            a = x[i]
            b = proposals[s, i]
            if b == a:
                continue
            counts[slot] += 1
            de = _local_energy(x, i, b, K, tab, tab_off, tab_order, others, row_start, row_end, kpow) \
                - _local_energy(x, i, a, K, tab, tab_off, tab_order, others, row_start, row_end, kpow)
            log_ratio = -de + logw[b] - logw[a]
            if log_ratio >= 0.0 or uniforms[s, i] < math.exp(log_ratio):
                x[i] = b
                counts[slot + 1] += 1
        bt = batch_of_sweep[s]
        if bt >= 0:
            for q in range(subsets.shape[0]):
                idx = 0
                for j in range(m):
                    idx += x[subsets[q, j]] * kpow[m - 1 - j]
                acc[bt, rank_flat[idx]] += 1.0
    return counts


def _pack_terms(sys, u: SymmetricTable):
    """Flatten u and the W terms into the arrays the kernel walks."""
    N, K = sys.N, sys.K
    terms = [u] + sys.W.all_terms(N)
    tabs, offs, orders = [], [], []
    rows = []
    row_start = np.zeros((len(terms), N), dtype=np.int64)
    row_end = np.zeros((len(terms), N), dtype=np.int64)
    off = 0
    max_other = 1
    for t, table in enumerate(terms):
        k = table.order
        tabs.append(table.to_dense().reshape(-1))
        offs.append(off)
        orders.append(k)
        off += K**k
        max_other = max(max_other, k - 1)
        for i in range(N):
            row_start[t, i] = len(rows)
            rest = [j for j in range(N) if j != i]
            for combo in itertools.combinations(rest, k - 1):
                rows.append(combo)
            row_end[t, i] = len(rows)
    others = np.zeros((max(len(rows), 1), max_other), dtype=np.int64)
    for r, combo in enumerate(rows):
        others[r, : len(combo)] = combo
    return (
        np.concatenate(tabs),
        np.asarray(offs, dtype=np.int64),
        np.asarray(orders, dtype=np.int64),
        others,
        row_start,
        row_end,
    )


def _run_single_chain(sys, packed, cfg: ChainConfig, seed_seq: np.random.SeedSequence):
    N, K, m = sys.N, sys.K, sys.m
    rng = np.random.default_rng(seed_seq)
    nb = cfg.num_batches
    production = cfg.sweeps - cfg.burn_in
    bsize = production // nb
    # leftover sweeps lengthen the burn-in so every batch has equal size
    burn = cfg.sweeps - nb * bsize
    batch_of_sweep = np.full(cfg.sweeps, -1, dtype=np.int64)
    batch_of_sweep[burn:] = np.repeat(np.arange(nb, dtype=np.int64), bsize)

    tab, tab_off, tab_order, others, row_start, row_end = packed
    kpow = K ** np.arange(max(N, m) + 1, dtype=np.int64)
    subsets = np.array(list(itertools.combinations(range(N), m)), dtype=np.int64)
    rank_flat = np.ascontiguousarray(dense_rank_array(K, m).reshape(-1))
    logw = np.log(sys.space.w)
    acc = np.zeros((nb, num_multisets(K, m)))

    x = rng.integers(0, K, size=N).astype(np.int64)
    counts = np.zeros(4, dtype=np.int64)
    for start in range(0, cfg.sweeps, _BLOCK_SWEEPS):
        stop = min(start + _BLOCK_SWEEPS, cfg.sweeps)
        proposals = rng.integers(0, K, size=(stop - start, N)).astype(np.int64)
        uniforms = rng.random(size=(stop - start, N))
        counts += _sweep_block(
            x, K, logw, tab, tab_off, tab_order, others, row_start, row_end, kpow,
            proposals, uniforms, batch_of_sweep[start:stop], subsets, rank_flat, acc,
        )
    if counts[0] > 0 and counts[1] == 0:
        raise SamplerError(f"no move accepted in {counts[0]} burn-in proposals", 0.0)
    batch_mass = acc / (bsize * subsets.shape[0])
    return batch_mass, counts[1] + counts[3], counts[0] + counts[2]


def run_chain(sys, u: SymmetricTable, cfg: ChainConfig | None = None) -> DensityEstimate:
    """Estimate the canonical ``m``-density at ``u`` by Metropolis sampling."""
    cfg = cfg or ChainConfig()
    sys.check_potential(u)
    packed = _pack_terms(sys, u)
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.num_chains)
    batches = []
    accepted = proposed = 0
    for child in children:
        batch_mass, acc, prop = _run_single_chain(sys, packed, cfg, child)
        batches.append(batch_mass)
        accepted += acc
        proposed += prop
    allb = np.concatenate(batches, axis=0)
    measure = SymmetricTable.zeros(sys.space, sys.m).cell_measure()
    dens_batches = allb / measure
    B = dens_batches.shape[0]
    mean = dens_batches.mean(axis=0)
    stderr = dens_batches.std(axis=0, ddof=1) / math.sqrt(B)
    # with a single cell there is nothing to propose; report the chain as free
    rate = accepted / proposed if proposed else 1.0
    return DensityEstimate(
        mean=SymmetricTable(sys.space, sys.m, mean),
        stderr=SymmetricTable(sys.space, sys.m, stderr),
        acceptance_rate=float(rate),
        num_batches=B,
    )


def estimate_gradient(sys, u, target, cfg: ChainConfig | None = None, return_estimate=False):
    """Sampled gradient ``C(N,m) (rho_hat_u - target)`` and its elementwise stderr."""
    if target.order != sys.m or target.space != sys.space:
        raise InputError(f"target must be an order-{sys.m} table on the system's space")
    est = run_chain(sys, u, cfg)
    C = sys.num_subsets
    grad = (est.mean - target) * C
    err = est.stderr * C
    if return_estimate:
        return grad, err, est
    return grad, err
