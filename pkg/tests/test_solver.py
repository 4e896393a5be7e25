import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hippm.instances import random_quad_box, skew2, spread_skew, strongly_monotone
from hippm.operators import AffineOperator, ResolventResult, ScaledIdentityPlusSkew
from hippm.rates import fit_rate, distance_envelope
from hippm.solver import (
    CriterionBUnattainable,
    ProxParamSchedule,
    SolveConfig,
    ToleranceSchedule,
    _resolve_criterion_b,
    eps_schedule,
    halpern_step,
    inject_adversarial_error,
    run_hippm,
    unit_direction,
)

ROT = np.array([[0.0, -1.0], [1.0, 0.0]])


# -- schedules -------------------------------------------------------------

@pytest.mark.parametrize("delta,k,expected", [(1, 0, 0.25), (1, 2, 0.0625), (3, 0, 0.0625)])
def test_eps_schedule_values(delta, k, expected):
    assert eps_schedule(delta, k) == expected


def test_eps_schedule_rejects_bad_delta():
    with pytest.raises(ValueError):
        eps_schedule(0.0, 1)
    with pytest.raises(ValueError):
        ToleranceSchedule("A", -1.0)


@settings(max_examples=30, deadline=None)
@given(delta=st.floats(0.05, 5.0), k=st.integers(0, 10**6))
def test_eps_schedule_positive_nonincreasing_summable(delta, k):
    e = eps_schedule(delta, k)
    assert e > 0
    assert eps_schedule(delta, k + 1) <= e
    # tail from index k on is bounded by the integral estimate
    assert e <= 1.0 / (delta * (k + 1) ** delta)


def test_partial_sums_bounded_by_tail_estimate():
    for delta in (0.5, 1.0, 3.0):
        vals = ToleranceSchedule("A", delta).values(5000)
        assert np.all(np.diff(vals) <= 0)
        tail_from = 1000
        assert vals[tail_from:].sum() <= 1.0 / (delta * (tail_from + 1) ** delta)


def test_prox_schedules():
    assert ProxParamSchedule.constant(2.0)(7) == 2.0
    assert ProxParamSchedule.linear(0.5)(3) == 2.0
    g = ProxParamSchedule.geometric(1.0, 2.0, 100.0)
    vals = [g(k) for k in range(12)]
    assert vals[:3] == [1.0, 2.0, 4.0] and vals[-1] == 100.0
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert ProxParamSchedule.parse("geometric:1,2,100") == g
    assert ProxParamSchedule.parse(str(g)) == g
    for bad in ("constant:0", "linear", "wobbly:1", "geometric:1,0.5"):
        with pytest.raises(ValueError):
            ProxParamSchedule.parse(bad)


# -- Halpern step and error injection ------------------------------------------

def test_halpern_step_examples():
    np.testing.assert_array_equal(halpern_step([2.0, 0.0], [0.0, 0.0], 0), [1.0, 0.0])
    v = np.array([0.3, -7.0])
    np.testing.assert_allclose(halpern_step(v, v, 17), v, rtol=1e-15)
    np.testing.assert_allclose(halpern_step([4.0, 0.0], [0.0, 4.0], 2), [1.0, 3.0])
    with pytest.raises(ValueError):
        halpern_step([1.0], [1.0, 2.0], 0)


def test_inject_adversarial_error():
    z = np.array([1.0, -2.0, 3.0])
    np.testing.assert_array_equal(inject_adversarial_error(z, 0.0, 5), z)
    assert np.linalg.norm(inject_adversarial_error(np.zeros(3), 1.0, 5)) == pytest.approx(1.0, abs=1e-15)
    eps = eps_schedule(1.0, 9)
    out = inject_adversarial_error(z, eps, 5, k=9)
    assert abs(np.linalg.norm(out - z) - eps) <= 1e-15
    with pytest.raises(ValueError):
        inject_adversarial_error(z, -1.0, 0)


def test_unit_direction_deterministic_and_distinct():
    a = unit_direction(4, 1, 3)
    np.testing.assert_array_equal(a, unit_direction(4, 1, 3))
    assert not np.allclose(a, unit_direction(4, 2, 3))
    assert not np.allclose(a, unit_direction(4, 1, 4))


# -- runs ------------------------------------------------------------------------

def test_anchor_at_zero_stays_put():
    op = ScaledIdentityPlusSkew(1.0, ROT)
    tr = run_hippm(op, SolveConfig(anchor=[0.0, 0.0], max_iter=20,
                                   tolerance=ToleranceSchedule.exact(20), stop_residual=-0.0))
    assert np.all(tr.residual == 0.0)
    assert np.all(tr.z == 0.0)


def test_skew_exact_halpern_envelope():
    op = AffineOperator(ROT)
    K = 2000
    tr = run_hippm(op, SolveConfig(anchor=[1.0, 0.0], max_iter=K, tolerance=ToleranceSchedule.exact(K)))
    k = np.arange(K)
    assert np.all(tr.residual <= 2.0 / (k + 1) * (1 + 1e-9))


def test_classical_slope_on_spread_skew():
    inst = spread_skew()
    K = 10001
    tr = run_hippm(inst.operator(), SolveConfig(anchor=inst.anchor, max_iter=K, method="classical",
                                                tolerance=ToleranceSchedule.exact(K)))
    slope = fit_rate(tr, 100, 10000)
    assert -0.65 <= slope <= -0.4


def test_classical_on_planar_rotation_is_linear():
    # the resolvent of a single rotation contracts by 1/sqrt(2) per step, so
    # the classical method reaches an exact zero residual and never shows a
    # k^(-1/2) regime on this instance
    inst = skew2()
    tr = run_hippm(inst.operator(), SolveConfig(anchor=inst.anchor, max_iter=3000, method="classical",
                                                tolerance=ToleranceSchedule.exact(3000)))
    ratios = tr.residual[1:50] / tr.residual[:49]
    np.testing.assert_allclose(ratios, np.sqrt(0.5), rtol=1e-10)
    assert tr.residual[-1] == 0.0 and len(tr) < 3000


def test_stop_residual_ends_run_early():
    op = ScaledIdentityPlusSkew(1.0, ROT)
    tr = run_hippm(op, SolveConfig(anchor=[1.0, 1.0], max_iter=5000, method="classical",
                                   stop_residual=1e-8))
    assert len(tr) < 5000
    assert tr.residual[-1] <= 1e-8 < tr.residual[-2]


@pytest.mark.parametrize("method", ["halpern", "classical"])
@pytest.mark.parametrize("mode", ["natural", "adversarial"])
def test_criterion_a_rows_certified(method, mode):
    inst = random_quad_box(4, seed=2)
    tr = run_hippm(inst.operator(), SolveConfig(anchor=inst.anchor, max_iter=300, method=method,
                                                error_mode=mode, seed=3, zstar=inst.zstar))
    assert np.all(tr.criterion_ok)
    assert np.all(tr.eps_used <= tr.tol)
    assert np.all(tr.dist_to_star <= distance_envelope(tr) * (1 + 1e-12))


@pytest.mark.parametrize("mode", ["natural", "adversarial"])
def test_criterion_b_rows_certified(mode):
    inst = random_quad_box(4, seed=5)
    tr = run_hippm(inst.operator(), SolveConfig(
        anchor=inst.anchor, max_iter=200, tolerance=ToleranceSchedule("B", 1.0),
        error_mode=mode, seed=1))
    assert np.all(tr.criterion_ok)
    gap = np.linalg.norm(tr.zbar - tr.z, axis=1)
    assert np.all(tr.eps_used <= tr.tol * gap * (1 + 1e-12) + 1e-300)


class _StuckOracle:
    """Returns its input with an error bound that never shrinks."""

    def resolvent(self, c, y, tol):
        return ResolventResult(np.array(y, dtype=float), 1e-3)


def test_criterion_b_unattainable_when_output_equals_iterate():
    with pytest.raises(CriterionBUnattainable, match="unattainable"):
        _resolve_criterion_b(_StuckOracle(), 1.0, np.ones(2), 0.25)


def test_criterion_b_at_exact_zero_is_met():
    inst = random_quad_box(3, seed=1)
    res = _resolve_criterion_b(inst.operator(), 1.0, inst.zstar, 0.25)
    assert res.error_bound == 0.0


def test_anchoring_algebra():
    inst = strongly_monotone(1.0, 5, seed=4)
    tr = run_hippm(inst.operator(), SolveConfig(anchor=inst.anchor, max_iter=300,
                                                error_mode="adversarial", seed=9))
    z0 = tr.z[0]
    for k in range(len(tr) - 1):
        want = z0 / (k + 2) + (k + 1) / (k + 2) * tr.zbar[k]
        ulp = np.spacing(np.maximum(np.abs(want), np.abs(tr.z[k + 1])))
        assert np.all(np.abs(tr.z[k + 1] - want) <= 4 * ulp)


@pytest.mark.parametrize("factory", [skew2, spread_skew, lambda: strongly_monotone(0.5, 4, 1),
                                     lambda: random_quad_box(3, seed=7)])
def test_residual_vanishes(factory):
    inst = factory()
    tr = run_hippm(inst.operator(), SolveConfig(anchor=inst.anchor, max_iter=10000, residual_stride=100))
    sampled = tr.residual[~np.isnan(tr.residual)]
    assert sampled[-1] < sampled[0] / 100
    assert np.linalg.norm(tr.zbar[-1] - tr.z[-1]) < np.linalg.norm(tr.zbar[0] - tr.z[0]) / 100


def test_stride_marks_unsampled_rows_nan():
    inst = skew2()
    tr = run_hippm(inst.operator(), SolveConfig(anchor=inst.anchor, max_iter=25, residual_stride=10))
    assert np.all(np.isnan(tr.residual) == (np.arange(25) % 10 != 0))


def test_store_eta_matches_definition():
    inst = skew2()
    tr = run_hippm(inst.operator(), SolveConfig(anchor=inst.anchor, max_iter=30, store_eta=True,
                                                error_mode="adversarial", seed=2))
    np.testing.assert_allclose(tr.eta, tr.zbar - tr.prox)
    np.testing.assert_allclose(np.linalg.norm(tr.eta, axis=1), tr.tol, rtol=1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(anchor=[0.0], max_iter=0)
    with pytest.raises(ValueError):
        SolveConfig(anchor=[0.0], stop_residual=-1)
    with pytest.raises(ValueError):
        SolveConfig(anchor=[0.0], method="newton")
    with pytest.raises(ValueError):
        run_hippm(AffineOperator(ROT), SolveConfig(anchor=[0.0, 0.0, 0.0]))
    inst = random_quad_box(2)
    with pytest.raises(ValueError):
        run_hippm(inst.operator(), SolveConfig(anchor=inst.anchor, tolerance=ToleranceSchedule.exact(5),
                                               max_iter=5))
