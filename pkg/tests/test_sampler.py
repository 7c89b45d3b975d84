import numpy as np
import pytest

from canonical_inverse.ensemble import CanonicalSystem, grad_log_F, m_density
from canonical_inverse.errors import InputError, SamplerError
from canonical_inverse.sampler import ChainConfig, estimate_gradient, run_chain
from canonical_inverse.space import StateSpace, SymmetricTable, integrate, multisets, rank

from conftest import make_instance

FAST = ChainConfig(num_chains=4, sweeps=6000, burn_in=500, seed=1)


def within(est, exact, k=3.0):
    return np.abs(est.mean.values - exact.values) <= k * est.stderr.values


class TestChainConfig:
    @pytest.mark.parametrize("kw", [dict(num_chains=0), dict(sweeps=10, burn_in=10), dict(burn_in=-1),
                                    dict(num_batches=5), dict(sweeps=1010, burn_in=1000)])
    def test_rejects(self, kw):
        with pytest.raises(InputError):
            ChainConfig(**kw)


class TestRunChain:
    def test_flat_target(self):
        sp = StateSpace.uniform(3)
        sys = CanonicalSystem(sp, 3, 2)
        est = run_chain(sys, sys.zero_potential(), FAST)
        assert est.acceptance_rate == 1.0
        uniform = SymmetricTable.constant(sp, 2, 1 / 9)
        assert within(est, uniform).all()

    def test_ln2_instance(self, ln2_system):
        sys, u = ln2_system
        est = run_chain(sys, u, FAST)
        exact = SymmetricTable(sys.space, 2, [1 / 7, 2 / 7, 2 / 7])
        assert within(est, exact).all()
        assert 0 < est.acceptance_rate < 1

    def test_deterministic(self, small_instance):
        sys, u, _ = small_instance
        a = run_chain(sys, u, FAST)
        b = run_chain(sys, u, FAST)
        np.testing.assert_array_equal(a.mean.values, b.mean.values)
        np.testing.assert_array_equal(a.stderr.values, b.stderr.values)
        assert a.acceptance_rate == b.acceptance_rate
        c = run_chain(sys, u, FAST.with_seed(2))
        assert not np.array_equal(a.mean.values, c.mean.values)

    def test_normalized_and_nonnegative(self, small_instance):
        sys, u, _ = small_instance
        est = run_chain(sys, u, FAST)
        assert np.all(est.stderr.values >= 0)
        assert integrate(est.mean) == pytest.approx(1.0, abs=1e-12)

    def test_weighted_space(self):
        sys, u, exact = make_instance(3, 4, 2, seed=3, weights=(0.5, 1.0, 2.5))
        est = run_chain(sys, u, FAST)
        assert within(est, exact, 4.0).all()

    def test_order_one_and_higher_W(self):
        sys, u, exact = make_instance(3, 4, 1, seed=4, w_order=3)
        est = run_chain(sys, u, FAST)
        assert within(est, exact, 4.0).all()

    def test_zero_acceptance(self):
        # two particles on two cells; the mixed pair is effectively forbidden, so a chain
        # that starts in a pure state can never move
        sp = StateSpace.uniform(2)
        sys = CanonicalSystem(sp, 2, 2)
        u = SymmetricTable(sp, 2, [0.0, 1e6, 0.0])
        raised = 0
        for seed in range(10):
            try:
                run_chain(sys, u, ChainConfig(num_chains=1, sweeps=200, burn_in=50, seed=seed))
            except SamplerError as exc:
                assert exc.acceptance_rate == 0.0
                raised += 1
        assert raised > 0

    def test_relabeling(self):
        # swapping two equal-weight cells permutes the estimate, up to noise
        sys, u, _ = make_instance(3, 3, 2, seed=6, w_order=0)
        perm = np.array([1, 0, 2])
        u_perm = SymmetricTable.from_function(sys.space, 2, lambda a, b: u(perm[a], perm[b]))
        a = run_chain(sys, u, FAST)
        b = run_chain(sys, u_perm, FAST.with_seed(7))
        for i, alpha in enumerate(multisets(3, 2)):
            j = rank(sorted(perm[list(alpha)]), 3)
            diff = abs(a.mean.values[j] - b.mean.values[i])
            assert diff <= 4 * np.hypot(a.stderr.values[j], b.stderr.values[i])


class TestGradient:
    def test_stationary_at_exact_density(self, small_instance):
        sys, u, target = small_instance
        grad, err = estimate_gradient(sys, u, target, FAST)
        assert np.all(np.abs(grad.values) <= 3 * err.values)

    def test_agrees_with_exact_gradient(self, small_instance):
        sys, _, target = small_instance
        u = SymmetricTable.zeros(sys.space, 2)
        grad, err = estimate_gradient(sys, u, target, FAST)
        exact = grad_log_F(sys, u, target)
        assert np.all(np.abs(grad.values - exact.values) <= 3 * err.values)

    def test_stderr_scaling(self, small_instance):
        sys, u, target = small_instance
        cfg = ChainConfig(num_chains=4, sweeps=4000, burn_in=0, seed=3)
        _, e1 = estimate_gradient(sys, u, target, cfg)
        _, e4 = estimate_gradient(sys, u, target, ChainConfig(num_chains=4, sweeps=16000, burn_in=0, seed=3))
        ratio = np.linalg.norm(e1.values) / np.linalg.norm(e4.values)
        assert 2 / 1.5 <= ratio <= 2 * 1.5

    def test_returns_estimate(self, small_instance):
        sys, u, target = small_instance
        _, _, est = estimate_gradient(sys, u, target, FAST, return_estimate=True)
        np.testing.assert_array_equal(est.mean.values, run_chain(sys, u, FAST).mean.values)

    def test_target_shape_checked(self, small_instance):
        sys, u, _ = small_instance
        with pytest.raises(InputError):
            estimate_gradient(sys, u, SymmetricTable.constant(sys.space, 1, 1 / 3), FAST)


def test_single_cell_space():
    sys = CanonicalSystem(StateSpace.uniform(1), 3, 2)
    est = run_chain(sys, sys.zero_potential(), FAST)
    assert est.mean.values[0] == pytest.approx(1.0)
    assert est.acceptance_rate == 1.0
    assert m_density(sys, sys.zero_potential()).values[0] == pytest.approx(1.0)
