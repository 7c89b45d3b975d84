"""Acceptance criteria 1-10, each at its stated tolerance.

Every test reports a PASS/FAIL line through ``record_criterion``; the lines
are repeated in the pytest terminal summary.
"""
import time

import numpy as np
import pytest

from canonical_inverse.ensemble import (
    CanonicalSystem,
    PotentialSpec,
    bound_log,
    grad_log_F,
    hessian_log_F,
    log_F,
    m_density,
    product_density,
    reduce_density,
)
from canonical_inverse.sampler import ChainConfig, estimate_gradient
from canonical_inverse.solver import SolverConfig, gauge_fix, invert, trivial_invert
from canonical_inverse.space import StateSpace, SymmetricTable, inner, integrate, random_table
from canonical_inverse.verify import check_concavity, check_condition_P

from conftest import make_instance, record_criterion


def sup(a, b):
    return float(np.max(np.abs(a.values - b.values)))


def random_P(space, N, rng):
    P = random_table(space, N, 0.05, 1.0, rng)
    return P / integrate(P)


@pytest.fixture(scope="module")
def round_trip():
    """K=5, N=4, m=2 with random pair W and u* in [-1, 1]."""
    return make_instance(5, 4, 2, seed=11)


def test_criterion_1_round_trip(round_trip):
    sys, u_star, target = round_trip
    truth = gauge_fix(u_star)
    t0 = time.perf_counter()
    newton = invert(sys, target, SolverConfig(method="newton"))
    t_newton = time.perf_counter() - t0
    t0 = time.perf_counter()
    ascent = invert(sys, target, SolverConfig(method="gradient-ascent"))
    t_ascent = time.perf_counter() - t0
    e_newton, e_ascent = sup(newton.u, truth), sup(ascent.u, truth)
    ok = (newton.converged and ascent.converged and e_newton <= 1e-8 and e_ascent <= 1e-6
          and t_newton < 60 and t_ascent < 60)
    record_criterion(1, ok, f"newton err {e_newton:.2e} in {t_newton:.2f}s; "
                            f"gradient ascent err {e_ascent:.2e} in {t_ascent:.2f}s")
    assert ok


def test_criterion_2_stationarity():
    tol = 1e-10
    worst_res = worst_grad = 0.0
    ok = True
    cases = [
        make_instance(5, 4, 2, seed=11),
        make_instance(4, 3, 2, seed=3, weights=(0.5, 1.0, 1.5, 2.0)),
        make_instance(3, 4, 1, seed=4, weights=(0.3, 1.0, 2.2)),
        make_instance(3, 3, 3, seed=5),
    ]
    for sys, _, target in cases:
        for method in ("newton", "gradient-ascent"):
            rep = invert(sys, target, SolverConfig(method=method, tol=tol))
            if not rep.converged:
                ok = False
                continue
            res = sup(m_density(sys, rep.u), target)
            g = float(np.max(np.abs(grad_log_F(sys, rep.u, target).values)))
            bound = sys.num_subsets * tol * float(np.max(sys.space.w)) ** sys.m
            ok = ok and res <= tol and g <= bound
            worst_res, worst_grad = max(worst_res, res), max(worst_grad, g / bound)
    record_criterion(2, ok, f"max residual {worst_res:.2e}; max |grad| / bound {worst_grad:.2e} "
                            f"over {2 * len(cases)} solves")
    assert ok


def test_criterion_3_concavity():
    sys, _, target = make_instance(4, 3, 2, seed=31)
    rng = np.random.default_rng(3)
    worst_slack = np.inf
    for _ in range(100):
        u0 = random_table(sys.space, 2, -2.0, 2.0, rng)
        u1 = random_table(sys.space, 2, -2.0, 2.0, rng)
        lam = float(rng.uniform(0.0, 1.0))
        mid = log_F(sys, u1 * lam + u0 * (1 - lam), target)
        chord = lam * log_F(sys, u1, target) + (1 - lam) * log_F(sys, u0, target)
        worst_slack = min(worst_slack, mid - chord)
    worst_eq = 0.0
    for _ in range(20):
        u0 = random_table(sys.space, 2, -2.0, 2.0, rng)
        rep = check_concavity(sys, target, u0, u0 + float(rng.uniform(-5, 5)))
        worst_eq = max(worst_eq, rep.witness["max_abs_margin"])
    min_strict = np.inf
    for _ in range(20):
        u0 = random_table(sys.space, 2, -2.0, 2.0, rng)
        u1 = random_table(sys.space, 2, -2.0, 2.0, rng)
        rep = check_concavity(sys, target, u0, u1, lambdas=(0.5,))
        min_strict = min(min_strict, rep.witness["midpoint_margin"])
    ok = worst_slack >= -1e-12 and worst_eq <= 1e-10 and min_strict > 1e-6
    record_criterion(3, ok, f"worst slack {worst_slack:.2e}; worst equality gap {worst_eq:.2e}; "
                            f"smallest midpoint margin {min_strict:.2e}")
    assert ok


def test_criterion_4_boundedness():
    rng = np.random.default_rng(4)
    sp = StateSpace.uniform(3)
    sys0 = CanonicalSystem(sp, 3, 2)
    P0 = SymmetricTable.constant(sp, 3, 1 / 27)
    assert bound_log(P0) == 0.0
    target0 = reduce_density(P0, 2)
    max_uniform = max(log_F(sys0, random_table(sp, 2, -3.0, 3.0, rng), target0) for _ in range(100))

    W = PotentialSpec((random_table(sp, 2, -1.0, 1.0, rng),))
    sysW = CanonicalSystem(sp, 3, 2, W)
    worst_gap = -np.inf
    for _ in range(10):
        P = random_P(sp, 3, rng)
        bound = bound_log(P, W)
        target = reduce_density(P, 2)
        potentials = [random_table(sp, 2, -3.0, 3.0, rng) for _ in range(10)]
        potentials.append(invert(sysW, target).u)
        worst_gap = max(worst_gap, max(log_F(sysW, u, target) for u in potentials) - bound)
    ok = max_uniform <= 1e-10 and worst_gap <= 1e-10
    record_criterion(4, ok, f"uniform P: max log_F {max_uniform:.3f}; "
                            f"random P: max log_F - bound {worst_gap:.3f}")
    assert ok


def test_criterion_5_derivatives(round_trip):
    sys, _, target = round_trip
    rng = np.random.default_rng(5)
    u = random_table(sys.space, 2, -1.0, 1.0, rng)
    grad = grad_log_F(sys, u, target)
    H = hessian_log_F(sys, u)
    f0 = log_F(sys, u, target)
    h = 1e-5
    worst_grad = 0.0
    for _ in range(20):
        xi = random_table(sys.space, 2, -1.0, 1.0, rng)
        fd = (log_F(sys, u + xi * h, target) - log_F(sys, u - xi * h, target)) / (2 * h)
        an = inner(grad, xi)
        worst_grad = max(worst_grad, abs(an - fd) / max(abs(an), abs(fd)))
    # second differences lose about eps/h**2 to rounding, so the quadratic forms use h = 1e-4
    hq = 1e-4
    worst_quad = 0.0
    for _ in range(20):
        xi = random_table(sys.space, 2, -1.0, 1.0, rng)
        fd2 = (log_F(sys, u + xi * hq, target) - 2 * f0 + log_F(sys, u - xi * hq, target)) / hq**2
        q = float(xi.values @ H @ xi.values)
        worst_quad = max(worst_quad, abs(q - fd2) / abs(q))
    null = float(np.max(np.abs(H @ np.ones(H.shape[0]))))
    top = float(np.linalg.eigvalsh(H).max())
    ok = worst_grad <= 1e-6 and worst_quad <= 1e-4 and null <= 1e-10 and top <= 1e-10
    record_criterion(5, ok, f"gradient rel err {worst_grad:.2e}; quadratic form rel err {worst_quad:.2e}; "
                            f"|H 1| {null:.2e}; max eigenvalue {top:.2e}")
    assert ok


def test_criterion_6_uniqueness(round_trip):
    sys, _, target = round_trip
    rng = np.random.default_rng(6)
    r = random_table(sys.space, 2, -1.0, 1.0, rng)
    sols = [invert(sys, target, SolverConfig(initial_u=init)) for init in (None, r, -r * 2.0)]
    spread = max(sup(a.u, b.u) for a in sols for b in sols)
    conv = all(s.converged for s in sols)

    worst_closed = 0.0
    for seed, (K, N) in enumerate([(3, 3), (2, 4), (4, 2)]):
        sysN, _, targetN = make_instance(K, N, N, seed=60 + seed)
        rep = invert(sysN, targetN)
        conv = conv and rep.converged
        worst_closed = max(worst_closed, sup(rep.u, trivial_invert(sysN, targetN)))
    ok = conv and spread <= 1e-6 and worst_closed <= 1e-10
    record_criterion(6, ok, f"three-init spread {spread:.2e}; iterative vs closed form {worst_closed:.2e}")
    assert ok


def test_criterion_7_marginal_consistency():
    sp = StateSpace.uniform(4)
    rng = np.random.default_rng(7)
    W = PotentialSpec((random_table(sp, 2, -1.0, 1.0, rng), random_table(sp, 3, -1.0, 1.0, rng)))
    sys = CanonicalSystem(sp, 4, 2, W)
    u = random_table(sp, 2, -1.0, 1.0, rng)
    rho3, rho2, rho1 = (m_density(sys, u, k) for k in (3, 2, 1))
    e32 = sup(reduce_density(rho3, 2), rho2)
    e21 = sup(reduce_density(rho2, 1), rho1)
    ok = e32 <= 1e-12 and e21 <= 1e-12
    record_criterion(7, ok, f"rho3->rho2 {e32:.2e}; rho2->rho1 {e21:.2e}")
    assert ok


def test_criterion_8_gauge(round_trip):
    sys, _, target = round_trip
    rng = np.random.default_rng(8)
    u = random_table(sys.space, 2, -1.0, 1.0, rng)
    f = log_F(sys, u, target)
    worst_rel = max(abs(log_F(sys, u + c, target) - f) / abs(f) for c in (-10.0, 1.0, 10.0))
    base = invert(sys, target, SolverConfig(initial_u=u))
    worst_shift = max(sup(base.u, invert(sys, target, SolverConfig(initial_u=u + c)).u) for c in (-10.0, 1.0, 10.0))
    # "identical" is read as agreement to 1e-12; the shift itself is rounded in floating point
    ok = worst_rel <= 1e-12 and worst_shift <= 1e-12
    record_criterion(8, ok, f"log_F relative change {worst_rel:.2e}; solution change {worst_shift:.2e}")
    assert ok


def test_criterion_9_sampler():
    # u* and W drawn from [-0.5, 0.5]; instance seed fixed before any run
    sys, u_star, exact = make_instance(8, 6, 2, seed=2024, low=-0.5, high=0.5)
    t0 = time.perf_counter()
    inside = total = 0
    g_inside = g_total = 0
    for seed in range(30):
        cfg = ChainConfig(num_chains=4, sweeps=50_000, burn_in=5_000, seed=seed)
        grad, err, est = estimate_gradient(sys, u_star, exact, cfg, return_estimate=True)
        inside += int(np.sum(np.abs(est.mean.values - exact.values) <= 3 * est.stderr.values))
        total += len(exact)
        g_inside += int(np.sum(np.abs(grad.values) <= 3 * err.values))
        g_total += len(exact)
    elapsed = time.perf_counter() - t0
    frac, g_frac = inside / total, g_inside / g_total
    ok = frac >= 0.99 and g_frac >= 0.99 and elapsed < 300
    record_criterion(9, ok, f"density within 3 stderr {frac:.2%}; gradient within 3 stderr {g_frac:.2%}; "
                            f"{elapsed:.1f}s for 30 seeds")
    assert ok


def test_criterion_10_condition_P():
    K = 4
    uniform = SymmetricTable.constant(StateSpace.uniform(K), 3, 1 / K**3)
    rep = check_condition_P(uniform)
    exact = rep.passed and rep.witness["gamma"] == [1 / K] * K

    rng = np.random.default_rng(10)
    positive_ok = True
    for _ in range(20):
        sp = StateSpace(tuple(rng.uniform(0.2, 2.0, size=3)))
        positive_ok = positive_ok and check_condition_P(random_P(sp, 4, rng)).passed

    worst_prod = 0.0
    for _ in range(10):
        sp = StateSpace(tuple(rng.uniform(0.2, 2.0, size=4)))
        p = rng.uniform(0.1, 1.0, size=4)
        p = p / np.sum(p * sp.w)
        rep = check_condition_P(product_density(sp, p, 3))
        worst_prod = max(worst_prod, float(np.max(np.abs(np.array(rep.witness["gamma"]) - p))))
    ok = exact and positive_ok and worst_prod <= 1e-12
    record_criterion(10, ok, f"uniform gamma exactly 1/K: {exact}; random positive P pass: {positive_ok}; "
                             f"product gamma error {worst_prod:.2e}")
    assert ok
