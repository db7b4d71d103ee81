"""Closed forms for a(t), the optimal-replication cost b(t, v), and yields."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mvhbond.gaussian import norm_cdf, norm_pdf
from mvhbond.model import DomainError, ModelParams

# Below this time to maturity the terminal payoff is returned directly.
TAU_EPS = 1e-12


@dataclass(frozen=True)
class BOutputs:
    b: np.ndarray | float
    d1: np.ndarray | float
    d2: np.ndarray | float
    db_dv: np.ndarray | float
    db_dalpha: np.ndarray | float
    db_dt: np.ndarray | float
    d2b_dv2: np.ndarray | float


def _as_out(x):
    return float(x) if np.ndim(x) == 0 else x


def _check_tv(params: ModelParams, t, v):
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(~(v > 0)):
        raise DomainError("v", "firm value must be > 0")
    if np.any(~((t >= 0) & (t <= params.T))):
        raise DomainError("t", f"must lie in [0, T={params.T}]")
    return t, v


def a_of_t(params: ModelParams, t):
    """Coefficient of the squared wealth gap in the value function: exp(-theta_bar^2 (T-t))."""
    t = np.asarray(t, dtype=float)
    return _as_out(np.exp(-params.theta_bar**2 * (params.T - t)))


def _b_core(alpha, sigma, D, tau, v):
    """b and its sensitivities for time to maturity ``tau`` (arrays, tau > 0)."""
    sq = np.sqrt(tau)
    sig_sq = sigma * sq
    log_ratio = np.log(D) - np.log(v)
    d1 = (log_ratio - (alpha + 0.5 * sigma**2) * tau) / sig_sq
    d2 = d1 + sig_sq
    growth = np.exp(alpha * tau)
    n1 = norm_cdf(d1)
    b = v * growth * n1 + D * norm_cdf(-d2)
    db_dv = growth * n1
    pdf1 = norm_pdf(d1)
    pdf2 = norm_pdf(d2)
    d2b_dv2 = -growth * pdf1 / (v * sig_sq)
    db_dalpha = v * tau * growth * n1
    # d/dtau of the closed form, term by term
    dd1 = -(alpha + 0.5 * sigma**2) / sig_sq - d1 / (2.0 * tau)
    dd2 = dd1 + 0.5 * sigma / sq
    db_dtau = alpha * v * growth * n1 + v * growth * pdf1 * dd1 - D * pdf2 * dd2
    return b, d1, d2, db_dv, db_dalpha, -db_dtau, d2b_dv2


def b_of(alpha: float, sigma: float, D: float, tau, v):
    """b as a function of the drift combination ``alpha`` directly (tau >= 0)."""
    tau = np.asarray(tau, dtype=float)
    v = np.asarray(v, dtype=float)
    tau, v = np.broadcast_arrays(tau, v)
    live = tau > TAU_EPS
    safe_tau = np.where(live, tau, 1.0)
    with np.errstate(over="ignore", invalid="ignore"):
        out = _b_core(alpha, sigma, D, safe_tau, v)
    b = np.where(live, out[0], np.minimum(v, D))
    return b, out, live


def b_price(params: ModelParams, t, v) -> BOutputs:
    """Optimal-replication cost b(t, v) with d1, d2 and analytic sensitivities.

    At (or within 1e-12 of) maturity the payoff min(v, D) is returned and the
    derivatives take their one-sided limits: db/dv = 1{v<D} (1/2 at v=D),
    d2b/dv2 = 0, db/dt = -alpha v 1{v<D}.
    """
    t, v = _check_tv(params, t, v)
    alpha = params.derived.alpha
    tau = params.T - t
    b, core, live = b_of(alpha, params.sigma1, params.D, tau, v)
    _, d1, d2, db_dv, db_da, db_dt, d2b = core
    below = np.where(v < params.D, 1.0, np.where(v > params.D, 0.0, 0.5))
    inf_sign = np.where(v < params.D, np.inf, np.where(v > params.D, -np.inf, 0.0))
    return BOutputs(
        b=_as_out(b),
        d1=_as_out(np.where(live, d1, inf_sign)),
        d2=_as_out(np.where(live, d2, inf_sign)),
        db_dv=_as_out(np.where(live, db_dv, below)),
        db_dalpha=_as_out(np.where(live, db_da, 0.0)),
        db_dt=_as_out(np.where(live, db_dt, -alpha * v * below)),
        d2b_dv2=_as_out(np.where(live, d2b, 0.0)),
    )


def merton_baseline(v, D: float, sigma1: float, tau):
    """Merton's zero-rate (discounted) bond value D N(d2) + v N(-d1)."""
    v = np.asarray(v, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if np.any(~(v > 0)):
        raise DomainError("v", "firm value must be > 0")
    if np.any(tau < 0):
        raise DomainError("tau", "must be >= 0")
    v, tau = np.broadcast_arrays(v, tau)
    live = tau > TAU_EPS
    sq = np.sqrt(np.where(live, tau, 1.0))
    d1 = (np.log(v) - np.log(D) + 0.5 * sigma1**2 * tau) / (sigma1 * sq)
    d2 = d1 - sigma1 * sq
    value = D * norm_cdf(d2) + v * norm_cdf(-d1)
    return _as_out(np.where(live, value, np.minimum(v, D)))


def yield_spread(B, D: float, tau):
    """(ln D - ln B) / tau; prices are discounted so this is also the spread."""
    B = np.asarray(B, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if np.any(~(B > 0)):
        raise DomainError("B", "price must be > 0")
    if np.any(~(tau > 0)):
        raise DomainError("tau", "must be > 0")
    return _as_out((np.log(D) - np.log(B)) / tau)
