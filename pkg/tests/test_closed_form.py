import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvhbond import REFERENCE_PARAMS, DomainError, a_of_t, b_price, merton_baseline, yield_spread
from mvhbond.closed_form import b_of
from mvhbond.mc_oracle import simulate_paths

params_st = st.builds(
    lambda mu1, s1, th, rho, T: REFERENCE_PARAMS.replace(mu1=mu1, sigma1=s1, rho=rho, T=T)
    .replace(theta_bar=th),
    st.floats(-0.1, 0.1), st.floats(0.05, 0.6), st.floats(-1.0, 1.0), st.floats(-1.0, 1.0),
    st.floats(0.5, 30.0),
)


def test_a_boundary_and_values(params):
    assert a_of_t(params, params.T) == 1.0
    # [DERIVED] exp(-0.4^2 * 10) = exp(-1.6)
    assert a_of_t(params, 0.0) == pytest.approx(0.20189651799465538, rel=1e-14)
    zero = params.replace(theta_bar=0.0)
    np.testing.assert_array_equal(a_of_t(zero, np.linspace(0, 10, 5)), 1.0)


def test_b_terminal_payoff(params):
    assert b_price(params, params.T, 66.0).b == 66.0
    assert b_price(params, params.T, 150.0).b == 100.0
    out = b_price(params, params.T, np.array([50.0, 100.0, 150.0]))
    np.testing.assert_array_equal(out.db_dv, [1.0, 0.5, 0.0])


def test_b_far_field(params):
    assert b_price(params, 0.0, 1e12 * params.D).b == pytest.approx(params.D, abs=1e-9 * params.D)
    v = 1e-6
    assert b_price(params, 0.0, v).b == pytest.approx(v * math.exp(params.derived.alpha * 10),
                                                      rel=1e-12)


def test_alpha_zero_equals_merton(params):
    p = params.replace(mu1=0.0, mu2=0.0)
    v = np.geomspace(1, 1000, 50)
    for tau in (0.1, 1.0, 10.0):
        np.testing.assert_allclose(b_price(p, p.T - tau, v).b, merton_baseline(v, p.D, p.sigma1, tau),
                                   rtol=1e-13)


def test_merton_against_monte_carlo():
    # [DERIVED] E[min(V_T, D)] for driftless GBM from 10^6 exact lognormal draws
    p = REFERENCE_PARAMS.replace(mu1=0.0, mu2=0.0)
    for v0 in (66.0, 132.0):
        batch = simulate_paths(p, 0.0, v0, 1.0, 1 << 20, 2, seed=11, block_size=1 << 16)
        payoff = np.concatenate([np.minimum(V[-1], p.D) for V, _ in batch.blocks()])
        est, se = payoff.mean(), payoff.std() / math.sqrt(payoff.size)
        ref = merton_baseline(v0, p.D, p.sigma1, p.T)
        assert 0 < ref <= p.D
        assert abs(est - ref) <= 3 * se
    assert merton_baseline(66.0, 100.0, 0.15, 0.0) == 66.0


def test_yield_spread_definition():
    assert yield_spread(100.0, 100.0, 5.0) == 0.0
    assert yield_spread(100.0 * math.exp(-0.02 * 7), 100.0, 7.0) == pytest.approx(0.02, rel=1e-13)
    with pytest.raises(DomainError, match="^tau"):
        yield_spread(50.0, 100.0, 0.0)
    with pytest.raises(DomainError, match="^B"):
        yield_spread(0.0, 100.0, 1.0)


def test_merton_yield_decreasing_at_v66(params):
    p = params.replace(mu1=0.0, mu2=0.0)
    tau = np.linspace(0.25, 10, 40)
    y = yield_spread(b_price(p, p.T - tau, 66.0).b, p.D, tau)
    assert np.all(np.diff(y) < 0)


def test_domain_errors(params):
    with pytest.raises(DomainError, match="^v"):
        b_price(params, 0.0, -1.0)
    with pytest.raises(DomainError, match="^t"):
        b_price(params, 10.5, 66.0)
    with pytest.raises(DomainError, match="^t"):
        b_price(params, -0.1, 66.0)


@settings(max_examples=60, deadline=None)
@given(params_st, st.floats(0.0, 0.99), st.floats(1.0, 1000.0))
def test_sensitivities_match_finite_differences(p, frac, v):
    t = frac * p.T
    out = b_price(p, t, v)
    h = 1e-5
    fd_v = (b_price(p, t, v * (1 + h)).b - b_price(p, t, v * (1 - h)).b) / (2 * h * v)
    assert out.db_dv == pytest.approx(fd_v, rel=1e-5, abs=1e-9)
    alpha = p.derived.alpha
    tau = p.T - t
    fd_a = (b_of(alpha + 1e-6, p.sigma1, p.D, tau, v)[0]
            - b_of(alpha - 1e-6, p.sigma1, p.D, tau, v)[0]) / 2e-6
    assert out.db_dalpha == pytest.approx(float(fd_a), rel=1e-5, abs=1e-6 * p.D * tau)
    ht = 1e-5 * tau
    fd_t = (b_of(alpha, p.sigma1, p.D, tau - ht, v)[0] - b_of(alpha, p.sigma1, p.D, tau + ht, v)[0]) / (2 * ht)
    assert out.db_dt == pytest.approx(float(fd_t), rel=1e-4, abs=1e-7 * p.D)


@settings(max_examples=60, deadline=None)
@given(params_st, st.floats(0.0, 0.999), st.floats(0.1, 1e4))
def test_b_bounds_and_monotone(p, frac, v):
    # b = E[min(X, D)] for a lognormal X with mean v e^{alpha tau}, so b <= min(v e^{alpha tau}, D)
    t = frac * p.T
    out = b_price(p, t, v)
    tau = p.T - t
    assert 0 < out.b <= min(v * math.exp(p.derived.alpha * tau), p.D) * (1 + 1e-14)
    assert out.db_dv >= 0 and out.db_dalpha >= 0 and out.d2b_dv2 <= 0
    if out.d1 > -35:  # strictly positive wherever N(d1) is a normal float
        assert out.db_dv > 0 and out.db_dalpha > 0


def test_b_increasing_in_mu1(params):
    mus = np.linspace(-0.05, 0.1, 16)
    b = [b_price(params.replace(mu1=m), 0.0, 66.0).b for m in mus]
    assert np.all(np.diff(b) > 0)


def test_b_decreasing_in_theta_for_positive_rho(params):
    ths = np.linspace(0.0, 0.8, 9)
    b_pos = [b_price(params.replace(theta_bar=x), 0.0, 66.0).b for x in ths]
    b_neg = [b_price(params.replace(rho=-0.6, theta_bar=x), 0.0, 66.0).b for x in ths]
    b_zero = [b_price(params.replace(rho=0.0, theta_bar=x), 0.0, 66.0).b for x in ths]
    assert np.all(np.diff(b_pos) < 0) and np.all(np.diff(b_neg) > 0)
    np.testing.assert_allclose(b_zero, b_zero[0], rtol=1e-15)
