import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hippm.instances import skew2, strongly_monotone
from hippm.operators import AffineOperator, ScaledIdentityPlusSkew
from hippm.rates import (
    ConvergedBeforeWindow,
    EnvelopeParams,
    LinearRateParams,
    beta0,
    bound_report,
    predicted_slope,
    deltak_bruteforce,
    deltak_exact,
    deltak_upper,
    exact_envelope,
    fit_rate,
    linear_rate_check,
    theta,
    theta_envelope,
)
from hippm.solver import ProxParamSchedule, SolveConfig, ToleranceSchedule, run_hippm

from oracles import deltak_by_telescoping, harmonic_tail_sum, pi2_over_6_minus_1, slope_loglog


def adversarial_run(delta, seed, K=31, inst=None):
    inst = skew2() if inst is None else inst
    return run_hippm(inst.operator(), SolveConfig(
        anchor=inst.anchor, max_iter=K, tolerance=ToleranceSchedule("A", delta),
        error_mode="adversarial", seed=seed, store_eta=True, zstar=inst.zstar))


# -- beta0 -------------------------------------------------------------------

def test_beta0_delta1_against_direct_summation():
    est, err = harmonic_tail_sum(1.0)
    assert abs(est - pi2_over_6_minus_1()) <= err
    assert abs(beta0(1.0, 1e-10) - est) <= err + 1e-10


@pytest.mark.parametrize("delta", [0.5, 1.5, 3.0])
def test_beta0_against_direct_summation(delta):
    est, err = harmonic_tail_sum(delta)
    assert abs(beta0(delta) - est) <= err + 1e-12


def test_beta0_brackets():
    assert 2.0**-11 < beta0(10.0) < 2.0**-10
    assert beta0(1.0) >= 0.25
    with pytest.raises(ValueError):
        beta0(0.0)


# -- envelopes -----------------------------------------------------------------

def test_exact_envelope_example():
    assert exact_envelope(1.0, 1) == 1.0


def test_envelope_params_kappa():
    p = EnvelopeParams.from_run(1.0, 2.0)
    assert p.kappa0 == 2.0 * (p.beta0 + 2.0)


def test_delta3_envelope_is_order_one_over_k():
    p = EnvelopeParams.from_run(3.0, 1.0)
    k = np.arange(1, 100001)
    env = theta_envelope(p, k)
    kap, b = p.kappa0, p.beta0
    lead = 8 * kap * (1 / 2 + 1 + b)
    C = 2.0 + np.sqrt(lead + 4 * kap + 4 * kap)
    assert np.all(env <= C / (k + 1))
    assert np.all(np.diff(env[2:]) < 0)


def test_theta_boundary_snapping():
    for edge in (1.0, 2.0):
        p_edge = EnvelopeParams.from_run(edge, 1.0)
        for side in (-1e-13, 1e-13):
            near = EnvelopeParams.from_run(edge + side, 1.0)
            assert theta(near, 5.0) == pytest.approx(theta(p_edge, 5.0), rel=1e-12)
        # just outside the snapping window the generic branches take over and stay finite
        for side in (-1e-7, 1e-7):
            assert np.isfinite(theta(EnvelopeParams.from_run(edge + side, 1.0), 10.0))


def test_theta_rejects_k0():
    with pytest.raises(ValueError):
        theta(EnvelopeParams.from_run(1.0, 1.0), 0)


@pytest.mark.parametrize("delta,lo,hi", [(0.5, -0.30, -0.20), (1.0, -0.55, -0.45),
                                         (1.5, -0.80, -0.70), (3.0, -1.05, -0.95)])
def test_envelope_slope_bands(delta, lo, hi):
    p = EnvelopeParams.from_run(delta, 1.0)
    ks = np.unique(np.geomspace(1e3, 1e5, 80).astype(int))
    s = slope_loglog(ks, theta_envelope(p, ks))
    assert lo <= s <= hi
    assert abs(s - predicted_slope(delta)) <= 0.05


# -- Delta_k ---------------------------------------------------------------

def test_deltak_upper_zero_eps():
    # beta0 is the sum of the tolerances, so it vanishes with them
    p = EnvelopeParams(1.0, 0.0, 2.0, 1.0)
    assert deltak_upper(p, np.zeros(10), 7) == 0.0


def test_deltak_upper_k1_hand_value():
    b = pi2_over_6_minus_1()
    kap = 2 * (b + 1)
    p = EnvelopeParams.from_run(1.0, 1.0)
    want = 4 * kap * 0.25 * 0.25 + 8 * kap * b * 0.25 + 4 * kap * 0.25
    assert deltak_upper(p, [0.25], 1) == pytest.approx(want, rel=1e-12)


def test_deltak_exact_zero_for_exact_run():
    inst = skew2()
    tr = run_hippm(inst.operator(), SolveConfig(anchor=inst.anchor, max_iter=15, store_eta=True,
                                                tolerance=ToleranceSchedule.exact(15)))
    for k in range(1, 15):
        assert deltak_exact(tr, k) == 0.0
        lhs = tr.residual[k] ** 2
        assert lhs <= 4 * 1.0 / (k + 1) ** 2 * (1 + 1e-12)


def test_deltak_exact_agrees_with_bruteforce_k10():
    tr = adversarial_run(1.0, seed=0, K=11)
    a, b = deltak_exact(tr, 10), deltak_bruteforce(tr, 10)
    assert abs(a - b) <= 1e-12 * max(abs(a), 1e-300)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), delta=st.sampled_from([0.5, 1.0, 2.0, 3.0]),
       k=st.integers(1, 30))
def test_deltak_exact_independent_oracle_and_ordering(seed, delta, k):
    tr = adversarial_run(delta, seed)
    ex = deltak_exact(tr, k)
    tel = deltak_by_telescoping(tr.z, tr.prox, k)
    assert abs(ex - tel) <= 1e-10 * (1 + abs(ex))
    p = EnvelopeParams.from_run(delta, 1.0)
    assert ex <= deltak_upper(p, tr.tol, k)
    assert tr.residual[k] ** 2 <= 4.0 / (k + 1) ** 2 + ex + 1e-10


def test_deltak_exact_needs_eta():
    inst = skew2()
    tr = run_hippm(inst.operator(), SolveConfig(anchor=inst.anchor, max_iter=5))
    with pytest.raises(ValueError):
        deltak_exact(tr, 3)


# -- fit_rate --------------------------------------------------------------

def test_fit_rate_synthetic():
    k = np.arange(20001)
    assert fit_rate(1.0 / (k + 1.0), 100, 20000) == pytest.approx(-1.0, abs=1e-6)
    assert fit_rate((k + 1.0) ** -0.5, 100, 20000) == pytest.approx(-0.5, abs=1e-6)


def test_fit_rate_errors():
    r = np.ones(1000)
    r[500:] = 0.0
    with pytest.raises(ConvergedBeforeWindow, match="converged before window"):
        fit_rate(r, 100, 900)
    with pytest.raises(ValueError):
        fit_rate(r, 5, 900)
    with pytest.raises(ValueError):
        fit_rate(r, 400, 700)


def test_fit_rate_halpern_natural_delta1():
    inst = skew2()
    tr = run_hippm(inst.operator(), SolveConfig(anchor=inst.anchor, max_iter=10001))
    assert -1.1 <= fit_rate(tr, 1000, 10000) <= -0.45


# -- bound report ------------------------------------------------------------

def test_bound_report_adversarial_all_pass():
    tr = adversarial_run(2.0, seed=4, K=500)
    rep = bound_report(tr)
    assert rep.all_satisfied and rep.first_failure is None
    assert np.all(rep.deltak_exact <= rep.deltak_upper)


def test_bound_report_detects_inflated_residual():
    tr = adversarial_run(1.0, seed=1, K=100)
    tr.residual[40] *= 1e3
    rep = bound_report(tr)
    assert rep.first_failure == 40


def test_bound_report_skips_without_zero_or_with_varying_c():
    inst = skew2()
    cfg = SolveConfig(anchor=inst.anchor, max_iter=10)
    assert bound_report(run_hippm(inst.operator(), cfg)) is None
    cfg = SolveConfig(anchor=inst.anchor, max_iter=10, zstar=inst.zstar,
                      prox_schedule=ProxParamSchedule.linear(1.0))
    assert bound_report(run_hippm(inst.operator(), cfg)) is None


# -- linear rate -------------------------------------------------------------

def test_linear_rate_params_mu_example():
    p = LinearRateParams(1.0, np.ones(5), np.zeros(5))
    np.testing.assert_allclose(p.mu, 1 / np.sqrt(2))


def test_linear_rate_exact_scaled_identity():
    op = AffineOperator(np.eye(2))
    tr = run_hippm(op, SolveConfig(anchor=[1.0, -2.0], max_iter=20, tolerance=ToleranceSchedule.exact(20)))
    rep = linear_rate_check(tr, LinearRateParams(1.0, tr.c, np.zeros(20)), np.zeros(2))
    np.testing.assert_allclose(rep.ratios, 0.5, rtol=1e-14)
    assert rep.ok and rep.k_bar == 0


def test_linear_rate_geometric_c_theta_monotone():
    sched = ProxParamSchedule.geometric(1.0, 2.0, 1e6)
    c = np.array([sched(k) for k in range(60)])
    d = ToleranceSchedule("B", 1.0).values(60)
    p = LinearRateParams(1.0, c, d)
    assert np.all(np.diff(p.mu) <= 0)
    start = np.argmax(d < 0.1 * (1 - p.mu))
    assert np.all(np.diff(p.theta[start:]) <= 1e-15)


def test_linear_rate_criterion_b_run():
    inst = strongly_monotone(1.0, 4, seed=2)
    op = inst.operator()
    tr = run_hippm(op, SolveConfig(anchor=inst.anchor, max_iter=100, tolerance=ToleranceSchedule("B", 1.0),
                                   error_mode="adversarial", seed=3))
    rep = linear_rate_check(tr, LinearRateParams.from_trace(tr, op.lipschitz_inverse), np.zeros(4))
    assert rep.ok and rep.k_bar <= 50


def test_linear_rate_reports_failure():
    op = ScaledIdentityPlusSkew(1.0, np.array([[0.0, -1.0], [1.0, 0.0]]))
    tr = run_hippm(op, SolveConfig(anchor=[1.0, 0.0], max_iter=10, tolerance=ToleranceSchedule.exact(10)))
    # pretend the modulus is tiny so theta_k is far below the true ratio
    rep = linear_rate_check(tr, LinearRateParams(1e-6, tr.c, np.zeros(10)), np.zeros(2))
    assert not rep.ok and rep.max_violation > 0
