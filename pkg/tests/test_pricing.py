import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvhbond import (
    REFERENCE_PARAMS,
    DomainError,
    M_process,
    N_process,
    NumericsConfig,
    b_price,
    bond_price,
    c_value,
    nflvr_diagnostics,
    theta_ratio,
)
from mvhbond.pricing import log_N_process, monotone_violations, novikov_condition
from mvhbond.mc_oracle import estimate_drift

GOOD = REFERENCE_PARAMS.replace(mu1=0.03)   # alpha = -0.006, Novikov holds


def brute_generator(p, t, v, h=1e-4):
    """L B by central differences of the price itself (t-step relative to T - t)."""
    B = lambda tt, vv: bond_price(p, tt, vv).B
    ht = h * (p.T - t)
    Bt = (B(t + ht, v) - B(t - ht, v)) / (2 * ht)
    Bv = (B(t, v * (1 + h)) - B(t, v * (1 - h))) / (2 * h * v)
    Bvv = (B(t, v * (1 + h)) - 2 * B(t, v) + B(t, v * (1 - h))) / (h * v) ** 2
    return Bt + p.mu1 * v * Bv + 0.5 * p.sigma1**2 * v * v * Bvv, p.sigma1 * v * Bv


def test_kappa_zero_gives_b(params):
    p = params.replace(kappa=0.0)
    v = np.geomspace(10, 1000, 20)
    out = bond_price(p, 0.0, v)
    np.testing.assert_array_equal(out.B, out.b)
    np.testing.assert_array_equal(out.discount, 1.0)


def test_terminal_price_is_payoff(params):
    out = bond_price(params, params.T, np.array([66.0, 100.0, 132.0]))
    np.testing.assert_array_equal(out.B, [66.0, 100.0, 100.0])
    assert np.all(np.isnan(out.yield_spread))


def test_breakdown_consistency(params):
    out = bond_price(params, 1.0, 66.0)
    assert out.B == pytest.approx(out.b * np.exp(-params.kappa * out.c_tilde), rel=1e-15)
    assert out.c == pytest.approx(out.c_tilde * 66.0**2, rel=1e-14)
    assert out.yield_spread == pytest.approx((np.log(100) - np.log(out.B)) / 9.0, rel=1e-14)
    d = out.to_dict()
    assert "yield" in d and "yield_spread" not in d


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 50.0), st.floats(0.01, 50.0), st.floats(0.0, 9.9), st.floats(5.0, 500.0))
def test_price_strictly_decreasing_in_kappa(k1, dk, t, v):
    lo = bond_price(REFERENCE_PARAMS.replace(kappa=k1), t, v)
    hi = bond_price(REFERENCE_PARAMS.replace(kappa=k1 + dk), t, v)
    if lo.c_tilde * dk > 1e-15:
        assert hi.B < lo.B


def test_N_reduces_without_risk_aversion(params):
    t, v = np.meshgrid([0.0, 3.0, 9.0], [30.0, 66.0, 132.0], indexing="ij")
    b = b_price(params, t, v)
    ref = params.sigma1 * v * b.db_dv
    np.testing.assert_allclose(N_process(params.replace(kappa=0.0), t, v), ref, rtol=1e-13)
    p1 = params.replace(rho=1.0)
    ref1 = params.sigma1 * v * b_price(p1, t, v).db_dv
    np.testing.assert_allclose(N_process(p1, t, v), ref1, rtol=1e-13)


def test_N_positive_in_log_space(params):
    t, v = np.meshgrid(np.linspace(0, 9.99, 30), params.D * np.logspace(-2, 2, 30), indexing="ij")
    assert np.all(np.isfinite(log_N_process(params, t, v)))


def test_M_without_risk_aversion_is_drift_of_b(params):
    p = params.replace(kappa=0.0)
    t, v = np.meshgrid([0.0, 5.0, 9.5], [40.0, 66.0, 132.0], indexing="ij")
    ref = params.rho * params.sigma1 * params.theta_bar * v * b_price(p, t, v).db_dv
    np.testing.assert_allclose(M_process(p, t, v), ref, rtol=1e-12)
    assert theta_ratio(p, 1.0, 66.0) == pytest.approx(params.rho * params.theta_bar, rel=1e-12)


def test_M_complete_market_matches_kappa_zero(params):
    p1 = params.replace(rho=1.0)
    assert M_process(p1, 2.0, 70.0) == pytest.approx(M_process(p1.replace(kappa=0.0), 2.0, 70.0),
                                                     rel=1e-12)


def test_M_zero_drift_vanishes(params):
    p = params.replace(mu1=0.0, mu2=0.0, kappa=0.0)
    np.testing.assert_allclose(M_process(p, np.array([0.0, 4.0]), np.array([66.0, 132.0])), 0.0,
                               atol=1e-14)


@pytest.mark.parametrize("t,v", [(0.5, 66.0), (5.0, 132.0), (8.0, 40.0), (0.2, 250.0)])
def test_M_N_against_brute_generator(params, t, v):
    # [DERIVED] finite-difference generator applied to B(t, v) itself
    m_fd, n_fd = brute_generator(params, t, v)
    assert M_process(params, t, v) == pytest.approx(m_fd, rel=1e-4)
    assert N_process(params, t, v) == pytest.approx(n_fd, rel=1e-6)


def test_M_against_monte_carlo_drift(params):
    # [DERIVED] (E[B(t+dt, V_{t+dt})] - B(t, v)) / dt over simulated V
    fn = lambda tt, vv: bond_price(params, tt, vv).B
    est, se = estimate_drift(params, fn, 2.0, 66.0, 1e-3, 8_000, seed=5)
    m = M_process(params, 2.0, 66.0)
    assert abs(est - m) <= 4 * se + 5e-3 * abs(m)


def test_interior_only(params):
    with pytest.raises(DomainError, match="^t"):
        theta_ratio(params, params.T, 66.0)


def test_novikov_flag():
    assert novikov_condition(GOOD)
    # reference block: alpha = -0.016 <= -sigma1^2 / 2 = -0.01125
    assert not novikov_condition(REFERENCE_PARAMS)


def test_diagnostics_pass_for_alpha_minus_0_006():
    rep = nflvr_diagnostics(GOOD, NumericsConfig(diag_nt=21, diag_nv=21))
    assert rep.passed and rep.novikov_condition
    assert rep.violations_sign_dbdv == rep.violations_sign_dctildedv == 0
    assert rep.violations_monotone_ctilde == 0
    assert np.isfinite(rep.min_log_N)
    assert rep.theta_growth <= 0.10
    assert rep.shape_fine == (41, 41)


def test_diagnostics_kappa_zero_stable_within_one_percent():
    rep = nflvr_diagnostics(GOOD.replace(kappa=0.0), NumericsConfig(diag_nt=11, diag_nv=11))
    assert rep.sup_theta_fine == pytest.approx(rep.sup_theta_coarse, rel=1e-2)
    assert np.isfinite(rep.sup_theta_fine)


def test_diagnostics_warns_when_condition_fails():
    with pytest.warns(RuntimeWarning, match="boundedness"):
        rep = nflvr_diagnostics(REFERENCE_PARAMS, NumericsConfig(diag_nt=6, diag_nv=6))
    assert not rep.novikov_condition
    assert np.isfinite(rep.sup_theta_fine)
    with pytest.raises(DomainError, match="rho"):
        nflvr_diagnostics(REFERENCE_PARAMS.replace(rho=1.0))


def test_monotone_violations_detects_increase(params):
    v = np.geomspace(1, 1e4, 200)
    assert monotone_violations(params, np.zeros_like(v), v) == 0
    lv = np.log(c_value(params, 0.0, v).c_tilde)
    # reversing the grid makes every resolved pair a violation
    assert monotone_violations(params, np.zeros_like(v), v[::-1], lv[::-1]) > 150
