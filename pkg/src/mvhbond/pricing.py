"""Risk-adjusted bond price B = b exp(-kappa c/v^2), the drift/diffusion pair (M, N)
of B(t, V_t), the ratio theta = M/N, and no-arbitrage diagnostics.

Writing L = d/dt + mu1 v d/dv + 1/2 sigma1^2 v^2 d^2/dv^2 for the generator of V,
Ito's formula gives dB = M dt + N dW1 with

    M = e^{-kappa c~} [L b - kappa b L c~ + 1/2 kappa^2 b sigma1^2 v^2 c~_v^2
                       - kappa sigma1^2 v^2 b_v c~_v],
    N = e^{-kappa c~} sigma1 v (b_v - kappa b c~_v).

Derivatives of b are analytic.  For c~ the first v-derivative is analytic and
the t- and second v-derivatives are central differences.  All differencing is
done on log c~ in x = ln v, because c~, c~_v and b_v underflow together near
maturity when v >> D and the ratio M/N is only meaningful after the common
scale is divided out.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import log_ndtr

from mvhbond.closed_form import TAU_EPS, _as_out, _check_tv, a_of_t, b_price, yield_spread
from mvhbond.gaussian import LOG_SQRT_2PI
from mvhbond.model import DomainError, ModelParams, NumericsConfig
from mvhbond.repl_error import DEFAULT_NUMERICS, c_value, log_ctilde


@dataclass(frozen=True)
class PriceBreakdown:
    t: np.ndarray | float
    v: np.ndarray | float
    a: np.ndarray | float
    b: np.ndarray | float
    c: np.ndarray | float
    c_tilde: np.ndarray | float
    discount: np.ndarray | float
    B: np.ndarray | float
    yield_spread: np.ndarray | float   # NaN at t = T

    def to_dict(self) -> dict:
        out = asdict(self)
        out["yield"] = out.pop("yield_spread")
        return out


def bond_price(params: ModelParams, t, v, numerics: NumericsConfig | None = None) -> PriceBreakdown:
    """All pricing outputs at (t, v); broadcasts over arrays."""
    t, v = _check_tv(params, t, v)
    t, v = np.broadcast_arrays(t, v)
    b = np.asarray(b_price(params, t, v).b)
    cv = c_value(params, t, v, numerics)
    c_tilde = np.asarray(cv.c_tilde)
    discount = np.exp(-params.kappa * c_tilde)
    B = b * discount
    tau = params.T - t
    live = tau > TAU_EPS
    y = np.full(np.shape(B), np.nan)
    if np.any(live):
        y[live] = yield_spread(B[live], params.D, tau[live])
    return PriceBreakdown(
        t=_as_out(t), v=_as_out(v), a=_as_out(np.broadcast_to(a_of_t(params, t), t.shape)),
        b=_as_out(b), c=cv.c, c_tilde=_as_out(c_tilde), discount=_as_out(discount),
        B=_as_out(B), yield_spread=_as_out(y),
    )


# ---------------------------------------------------------------------------
# Log-scaled pieces of M and N


@dataclass(frozen=True)
class _Pieces:
    """Everything needed for M and N at a set of interior points.

    Quantities that can underflow are carried as logs: ``log_vbv`` = log(v b_v),
    ``log_ct`` = log c~, ``log_slope`` = log(-v c~_v).  ``gen_b`` is L b / (v b_v)
    and ``gen_ct`` is L c~ / c~, both O(1)-ish finite ratios.
    """

    b: np.ndarray
    log_vbv: np.ndarray
    log_ct: np.ndarray
    log_slope: np.ndarray
    gen_b: np.ndarray
    gen_ct: np.ndarray


def _interior(params: ModelParams, t, v):
    t, v = _check_tv(params, t, v)
    t, v = np.broadcast_arrays(t, v)
    if np.any(params.T - t <= TAU_EPS):
        raise DomainError("t", "M and N are evaluated for t < T only")
    return t, v


def _pieces(params: ModelParams, t, v, num: NumericsConfig) -> _Pieces:
    s1 = params.sigma1
    alpha = params.derived.alpha
    tau = params.T - t
    sq = np.sqrt(tau)
    bo = b_price(params, t, v)
    d1 = np.asarray(bo.d1)
    log_n1 = log_ndtr(d1)
    log_vbv = np.log(v) + alpha * tau + log_n1
    # Mills-type ratio phi(d1)/N(d1), finite even when both underflow
    mills = np.exp(-0.5 * d1 * d1 - LOG_SQRT_2PI - log_n1)
    # b_t / b_v, v b_vv / b_v from the closed form, divided by the common e^{alpha tau} N(d1)
    bt_over = v * (-alpha + mills * s1 / (2.0 * sq))
    vbvv_over = -mills / (s1 * sq)
    gen_b = bt_over / v + params.mu1 + 0.5 * s1**2 * vbvv_over

    log_ct, log_slope = log_ctilde(params, tau, v, num)
    b = np.asarray(bo.b)
    if params.kappa == 0.0 or abs(params.rho) == 1.0:
        # c~ drops out of B (or vanishes identically); skip the finite differences
        return _Pieces(b, log_vbv, log_ct, log_slope, gen_b, np.zeros_like(log_ct))
    # l = log c~ as a function of (tau, x = ln v)
    ell_x = -np.exp(log_slope - log_ct)
    h_x = num.fd_bump
    lct_up, slope_up = log_ctilde(params, tau, v * math.exp(h_x), num)
    lct_dn, slope_dn = log_ctilde(params, tau, v * math.exp(-h_x), num)
    ell_x_up = -np.exp(slope_up - lct_up)
    ell_x_dn = -np.exp(slope_dn - lct_dn)
    ell_xx = (ell_x_up - ell_x_dn) / (2.0 * h_x)
    h_t = num.fd_bump * tau
    lct_tp, _ = log_ctilde(params, tau + h_t, v, num)
    lct_tm, _ = log_ctilde(params, tau - h_t, v, num)
    ell_t = -(lct_tp - lct_tm) / (2.0 * h_t)          # d/dt = -d/dtau
    gen_ct = ell_t + params.mu1 * ell_x + 0.5 * s1**2 * (ell_xx + ell_x**2 - ell_x)
    return _Pieces(b, log_vbv, log_ct, log_slope, gen_b, gen_ct)


def _signed_terms(params: ModelParams, pc: _Pieces):
    """Signed log-magnitude terms of e^{kappa c~} M, and log of e^{kappa c~} N."""
    k = params.kappa
    s1 = params.sigma1
    with np.errstate(divide="ignore"):
        log_kb = np.log(k) + np.log(pc.b)
        log_den = np.log(s1) + np.logaddexp(pc.log_vbv, log_kb + pc.log_slope)
        terms = [
            (np.sign(pc.gen_b), pc.log_vbv + np.log(np.abs(pc.gen_b))),
            (-np.sign(pc.gen_ct), log_kb + pc.log_ct + np.log(np.abs(pc.gen_ct))),
            (1.0, np.log(0.5 * k * k * s1 * s1) + np.log(pc.b) + 2.0 * pc.log_slope),
            (1.0, np.log(k * s1 * s1) + pc.log_slope + pc.log_vbv),
        ]
    return terms, log_den


def _theta_from(terms, log_den):
    total = np.zeros(np.shape(log_den))
    for sign, log_mag in terms:
        with np.errstate(invalid="ignore"):
            part = sign * np.exp(log_mag - log_den)
        total = total + np.where(np.isneginf(log_mag), 0.0, part)
    return total


def N_process(params: ModelParams, t, v, numerics: NumericsConfig | None = None):
    """Diffusion coefficient of B(t, V_t): e^{-kappa c~} sigma1 v (b_v - kappa b c~_v)."""
    num = numerics or DEFAULT_NUMERICS
    t, v = _interior(params, t, v)
    return _as_out(np.exp(log_N_process(params, t, v, num)))


def log_N_process(params: ModelParams, t, v, numerics: NumericsConfig | None = None):
    """log N(t, v); finite wherever N > 0 even if N itself underflows."""
    num = numerics or DEFAULT_NUMERICS
    t, v = _interior(params, t, v)
    s1 = params.sigma1
    bo = b_price(params, t, v)
    log_vbv = np.log(v) + params.derived.alpha * (params.T - t) + log_ndtr(np.asarray(bo.d1))
    log_ct, log_slope = log_ctilde(params, params.T - t, v, num)
    with np.errstate(divide="ignore"):
        log_kb = np.log(params.kappa) + np.log(np.asarray(bo.b))
    log_inner = np.logaddexp(log_vbv, log_kb + log_slope)
    return _as_out(-params.kappa * np.exp(log_ct) + np.log(s1) + log_inner)


def theta_ratio(params: ModelParams, t, v, numerics: NumericsConfig | None = None):
    """theta(t, v) = M/N, evaluated from log-scaled terms."""
    num = numerics or DEFAULT_NUMERICS
    t, v = _interior(params, t, v)
    terms, log_den = _signed_terms(params, _pieces(params, t, v, num))
    return _as_out(_theta_from(terms, log_den))


def M_process(params: ModelParams, t, v, numerics: NumericsConfig | None = None):
    """Drift of B(t, V_t) under the physical measure: the generator of V applied to B."""
    num = numerics or DEFAULT_NUMERICS
    t, v = _interior(params, t, v)
    pc = _pieces(params, t, v, num)
    terms, _ = _signed_terms(params, pc)
    scale = np.exp(-params.kappa * np.exp(pc.log_ct))
    total = np.zeros(np.shape(pc.b))
    for sign, log_mag in terms:
        total = total + np.where(np.isneginf(log_mag), 0.0, sign * np.exp(log_mag))
    return _as_out(scale * total)


# ---------------------------------------------------------------------------
# Diagnostics


@dataclass(frozen=True)
class DiagnosticsReport:
    t_range: tuple[float, float]
    v_range: tuple[float, float]
    shape_coarse: tuple[int, int]
    shape_fine: tuple[int, int]
    min_N: float
    min_log_N: float
    sup_theta_coarse: float
    sup_theta_fine: float
    theta_growth: float
    violations_monotone_ctilde: int
    violations_sign_dbdv: int
    violations_sign_dctildedv: int
    novikov_condition: bool
    lambda2: float
    passed: bool

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("t_range", "v_range", "shape_coarse", "shape_fine"):
            out[key] = list(out[key])
        return out


def novikov_condition(params: ModelParams) -> bool:
    """The sufficient condition 1/2 + alpha/sigma1^2 > 0 for bounded M/N."""
    return 0.5 + params.derived.alpha / params.sigma1**2 > 0


def diagnostics_grid(params: ModelParams, nt: int, nv: int, eps: float,
                     v_decades: float = 2.0):
    """Uniform t in [0, T(1-eps)] and log-uniform v in [D 10^-k, D 10^k]."""
    t = np.linspace(0.0, params.T * (1.0 - eps), nt)
    v = params.D * np.logspace(-v_decades, v_decades, nv)
    return t, v


def monotone_violations(params: ModelParams, t, v, log_ct=None,
                        numerics: NumericsConfig | None = None) -> int:
    """Count adjacent pairs along the last axis of v where c~ fails to decrease strictly.

    Where c~ is within a factor 2 of its small-v limit the comparison uses the
    gap (limit - c~), which must increase; elsewhere it uses log c~.  Each side
    is the smaller of the two quantities and so carries full relative precision.
    """
    num = numerics or DEFAULT_NUMERICS
    tau = params.T - np.asarray(t, dtype=float)
    if log_ct is None:
        log_ct, _ = log_ctilde(params, tau, v, num)
    log_gap, _ = log_ctilde(params, tau, v, num, gap=True)
    near_limit = log_gap < log_ct
    use_gap = near_limit[..., :-1] & near_limit[..., 1:]
    ok = np.where(use_gap, np.diff(log_gap, axis=-1) > 0, np.diff(log_ct, axis=-1) < 0)
    return int(np.count_nonzero(~ok))


def nflvr_diagnostics(params: ModelParams, numerics: NumericsConfig | None = None,
                      v_decades: float = 2.0) -> DiagnosticsReport:
    """Scan N > 0, sup |M/N| on nested grids, and the sign/monotonicity conditions.

    The fine grid is the coarse grid with every interval halved, so the coarse
    nodes are a subset of the fine ones and sup|theta| can only grow under
    refinement.  Growth above ``numerics.theta_growth_tol`` counts as a failure.
    """
    num = numerics or DEFAULT_NUMERICS
    if abs(params.rho) >= 1.0:
        raise DomainError("rho", "diagnostics need |rho| < 1 (complete market is degenerate)")
    flag = novikov_condition(params)
    if not flag:
        warnings.warn("1/2 + alpha/sigma1^2 <= 0: the boundedness condition for M/N fails",
                      RuntimeWarning, stacklevel=2)
    nt_f, nv_f = 2 * num.diag_nt - 1, 2 * num.diag_nv - 1
    t_f, v_f = diagnostics_grid(params, nt_f, nv_f, num.diag_eps, v_decades)
    tt, vv = np.meshgrid(t_f, v_f, indexing="ij")

    pc = _pieces(params, tt, vv, num)
    terms, log_den = _signed_terms(params, pc)
    theta = np.abs(_theta_from(terms, log_den))
    log_n = -params.kappa * np.exp(pc.log_ct) + log_den
    coarse = (slice(None, None, 2), slice(None, None, 2))
    sup_c = float(np.max(theta[coarse]))
    sup_f = float(np.max(theta))
    growth = (sup_f - sup_c) / sup_c if sup_c > 0 else 0.0

    # sign conditions: b_v > 0 and c~_v < 0 read off their logs (finite means nonzero)
    bad_bv = int(np.count_nonzero(~np.isfinite(pc.log_vbv)))
    bad_cv = int(np.count_nonzero(~np.isfinite(pc.log_slope)))
    bad_mono = monotone_violations(params, tt, vv, pc.log_ct, num)
    finite = bool(np.all(np.isfinite(theta)) and np.all(np.isfinite(log_n)))
    passed = (finite and bad_bv == 0 and bad_cv == 0 and bad_mono == 0
              and growth <= num.theta_growth_tol)
    return DiagnosticsReport(
        t_range=(float(t_f[0]), float(t_f[-1])),
        v_range=(float(v_f[0]), float(v_f[-1])),
        shape_coarse=(num.diag_nt, num.diag_nv),
        shape_fine=(nt_f, nv_f),
        min_N=float(np.min(np.exp(log_n))),
        min_log_N=float(np.min(log_n)),
        sup_theta_coarse=sup_c,
        sup_theta_fine=sup_f,
        theta_growth=float(growth),
        violations_monotone_ctilde=bad_mono,
        violations_sign_dbdv=bad_bv,
        violations_sign_dctildedv=bad_cv,
        novikov_condition=bool(flag),
        lambda2=params.theta_bar,
        passed=bool(passed),
    )
