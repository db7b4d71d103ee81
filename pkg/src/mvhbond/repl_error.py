"""Replication error c(t, v), its normalised form c/v^2, and the v-derivative.

With K1 = -theta_bar^2 - sigma1^2 - 2 theta_bar rho sigma1,

    c(t, v) = sigma1^2 (1 - rho^2) v^2 e^{(2 mu1 + sigma1^2)(T-t)}
              * int_t^T e^{K1 (T-u)} E[N(d)^2] du,

where d ~ Normal(mu(t,u,v), (u-t)/(T-u)).  In the bivariate form E[N(d)^2] =
Phi2(h, h; r) with r = (u-t)/(T-t) and h finite on the whole of [t, T], so the
integrand is bounded and smooth in u except for a sqrt(T-u) cusp at u = T.
Substituting T - u = (T-t) w^2 removes the cusp; Gauss-Legendre in w then
converges geometrically.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from mvhbond.closed_form import TAU_EPS, _as_out, _check_tv
from mvhbond.gaussian import (
    expect_Nphi,
    expect_Nsq,
    hermite_expect,
    legendre_01,
    log_bvn_diag,
    log_bvn_diag_complement,
    log_bvn_diag_dh,
    norm_cdf,
    norm_pdf,
)
from mvhbond.model import DomainError, ModelParams, NumericsConfig

DEFAULT_NUMERICS = NumericsConfig()
_CHUNK = 1 << 21


@dataclass(frozen=True)
class DLaw:
    mean: np.ndarray | float
    std: np.ndarray | float


@dataclass(frozen=True)
class CTildeOutputs:
    c: np.ndarray | float
    c_tilde: np.ndarray | float
    dctilde_dv: np.ndarray | float


def gauss_expect_Nsq(mean, std, n: int = 64):
    """E[N(d)^2] for d ~ Normal(mean, std^2); ``std=inf`` gives the step-function limit."""
    try:
        return _as_out(expect_Nsq(mean, std, n))
    except ValueError as exc:
        raise DomainError("mean/std", str(exc)) from None


def gauss_expect_Nphi(mean, std):
    """E[N(d) phi(d)] for d ~ Normal(mean, std^2)."""
    try:
        return _as_out(expect_Nphi(mean, std))
    except ValueError as exc:
        raise DomainError("mean/std", str(exc)) from None


def _k1(params: ModelParams) -> float:
    th = params.theta_bar
    s1 = params.sigma1
    return -th**2 - s1**2 - 2.0 * th * params.rho * s1


def d_law(params: ModelParams, t, u, v) -> DLaw:
    """Law of d1(u, V_u) given V_t = v under the measure that tilts by V^2."""
    s1 = params.sigma1
    alpha = params.derived.alpha
    t, u, v = (np.asarray(x, dtype=float) for x in (t, u, v))
    ahead = params.T - u
    elapsed = u - t
    with np.errstate(divide="ignore", invalid="ignore"):
        mean = (np.log(params.D) - np.log(v) - (params.mu1 + 1.5 * s1**2) * elapsed
                - (alpha + 0.5 * s1**2) * ahead) / (s1 * np.sqrt(ahead))
        std = np.sqrt(elapsed / ahead)
    return DLaw(mean=_as_out(mean), std=_as_out(std))


def _prefactor(params: ModelParams, tau):
    s1 = params.sigma1
    return s1**2 * (1.0 - params.rho**2) * np.exp((2.0 * params.mu1 + s1**2) * tau)


def _log_bvn_integrals(params: ModelParams, tau, logv, quad: int, inner: int,
                       gap: bool = False):
    """log c/v^2 and log(-v d(c/v^2)/dv) for tau > 0 (1-d arrays).

    With ``gap`` the first output is instead log of (small-v limit - c/v^2),
    the same integral with Phi2 replaced by 1 - Phi2.
    """
    s1 = params.sigma1
    alpha = params.derived.alpha
    k1 = _k1(params)
    w, wt = legendre_01(quad)
    tau = tau[:, None]
    ahead = tau * w * w                     # T - u
    elapsed = tau - ahead                  # u - t
    sq = np.sqrt(tau)
    h = (np.log(params.D) - logv[:, None] - (params.mu1 + 1.5 * s1**2) * elapsed
         - (alpha + 0.5 * s1**2) * ahead) / (s1 * sq)
    r = 1.0 - w * w
    log_kern = k1 * ahead + np.log(2.0 * tau * w * wt)
    with np.errstate(divide="ignore"):
        log_pref = np.log(_prefactor(params, tau[:, 0]))
    level_fn = log_bvn_diag_complement if gap else log_bvn_diag
    log_level = logsumexp(log_kern + level_fn(h, r, inner), axis=1)
    log_slope = logsumexp(log_kern + log_bvn_diag_dh(h, r), axis=1) - np.log(s1 * sq[:, 0])
    return log_pref + log_level, log_pref + log_slope


def log_ctilde(params: ModelParams, tau, v, numerics: NumericsConfig | None = None,
               gap: bool = False):
    """(log c/v^2, log(-v d(c/v^2)/dv)) at time to maturity ``tau``.

    Works for any tau >= 0 (tau may exceed T, which the finite-difference
    stencils need); both logs are -inf at tau = 0.  With ``gap=True`` the first
    entry is log(lim_{v->0} c/v^2 - c/v^2), which resolves the decrease of c/v^2
    at small v where c/v^2 equals its limit to working precision.
    """
    num = numerics or DEFAULT_NUMERICS
    with np.errstate(divide="ignore"):
        tau, v = np.broadcast_arrays(np.asarray(tau, dtype=float), np.asarray(v, dtype=float))
    shape = tau.shape
    tf = tau.ravel()
    logv = np.log(v.ravel())
    out_level = np.full(tf.shape, -np.inf)
    out_slope = np.full(tf.shape, -np.inf)
    idx = np.flatnonzero(tf > TAU_EPS)
    step = max(1, _CHUNK // (num.quad_points * num.inner_quad_points))
    for start in range(0, idx.size, step):
        sel = idx[start:start + step]
        lv, sl = _log_bvn_integrals(params, tf[sel], logv[sel],
                                    num.quad_points, num.inner_quad_points, gap)
        out_level[sel] = lv
        out_slope[sel] = sl
    return out_level.reshape(shape), out_slope.reshape(shape)


def _hermite_integrals(params: ModelParams, t, v, quad: int, inner: int):
    """Same integrals with plain Gauss-Legendre in u and Gauss-Hermite over d."""
    T = params.T
    s1 = params.sigma1
    k1 = _k1(params)
    x, wt = legendre_01(quad)
    t = t[:, None]
    u = t + (T - t) * x
    law = d_law(params, t, u, v[:, None])
    kern = np.exp(k1 * (T - u)) * (T - t) * wt
    esq = hermite_expect(lambda d: norm_cdf(d) ** 2, law.mean, law.std, inner)
    enphi = hermite_expect(lambda d: norm_cdf(d) * norm_pdf(d), law.mean, law.std, inner)
    level = np.sum(kern * esq, axis=1)
    slope = -np.sum(kern * 2.0 * enphi / (s1 * np.sqrt(T - u)), axis=1)
    return level, slope


def c_value(params: ModelParams, t, v, numerics: NumericsConfig | None = None,
            method: str = "bvn") -> CTildeOutputs:
    """Replication error c, c/v^2 and d(c/v^2)/dv at (t, v); broadcasts over arrays.

    ``method="bvn"`` is the production path; ``"hermite"`` evaluates the inner
    Gaussian expectation by Gauss-Hermite on untransformed time nodes and is
    kept only as a cross-check (it degrades close to maturity).
    """
    num = numerics or DEFAULT_NUMERICS
    t, v = _check_tv(params, t, v)
    t, v = np.broadcast_arrays(t, v)
    if method == "bvn":
        log_ct, log_sl = log_ctilde(params, params.T - t, v, num)
        c_tilde = np.exp(log_ct)
        dct = -np.exp(log_sl) / v
    elif method == "hermite":
        live = params.T - t > TAU_EPS
        level = np.zeros(t.shape)
        slope = np.zeros(t.shape)
        if np.any(live):
            lv, sl = _hermite_integrals(params, t[live], v[live],
                                        num.quad_points, num.inner_quad_points)
            pref = _prefactor(params, params.T - t[live])
            level[live] = pref * lv
            slope[live] = pref * sl / v[live]
        c_tilde, dct = level, slope
    else:
        raise ValueError(f"unknown method {method!r}")
    return CTildeOutputs(c=_as_out(c_tilde * v * v), c_tilde=_as_out(c_tilde),
                         dctilde_dv=_as_out(dct))


def c_tilde_curve(params: ModelParams, t: float, v_grid,
                  numerics: NumericsConfig | None = None) -> list[tuple[float, float]]:
    v_grid = np.asarray(v_grid, dtype=float)
    if v_grid.ndim != 1 or v_grid.size == 0:
        raise DomainError("v_grid", "must be a non-empty 1-d sequence")
    if np.any(v_grid <= 0) or np.any(np.diff(v_grid) <= 0):
        raise DomainError("v_grid", "must be positive and strictly increasing")
    out = c_value(params, np.full_like(v_grid, t), v_grid, numerics)
    return list(zip(v_grid.tolist(), np.atleast_1d(out.c_tilde).tolist()))


def ctilde_small_v_limit(params: ModelParams, tau):
    """lim_{v->0} c/v^2: every N(d) -> 1, leaving an elementary time integral."""
    tau = np.asarray(tau, dtype=float)
    k1 = _k1(params)
    integral = tau if k1 == 0 else np.expm1(k1 * tau) / k1
    return _as_out(_prefactor(params, tau) * integral)


def ctilde_slope_bound(params: ModelParams, tau):
    """Bound K(tau) with |d(c/v^2)/dv| * v <= K(tau) = O(sqrt(tau)) uniformly in v.

    Uses N <= 1 and exp(-d^2/2) <= 1 inside the derivative of E[N(d)^2].
    """
    tau = np.asarray(tau, dtype=float)
    k1 = _k1(params)
    s1 = params.sigma1
    # int_0^tau e^{k1 s} s^{-1/2} ds <= 2 sqrt(tau) e^{max(k1, 0) tau}
    return _as_out(_prefactor(params, tau) * 2.0 / (np.sqrt(2 * np.pi) * s1)
                   * 2.0 * np.sqrt(tau) * np.exp(max(k1, 0.0) * tau))
