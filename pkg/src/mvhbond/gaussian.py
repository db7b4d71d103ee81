"""Normal-distribution primitives: CDF, density, and Gaussian expectations of N(d)^2.

``bvn_diag(h, r)`` is the bivariate normal CDF on the diagonal, P(X <= h, Y <= h)
for standard normals with correlation ``r`` in [0, 1].  It starts from the
arcsine representation

    Phi2(h, h; r) = N(h)^2 + 1/(2 pi) * int_0^{asin r} exp(-h^2 / (1 + sin t)) dt,

whose integrand is positive, so there is no cancellation in either tail.  The
substitution tan(t/2 + pi/4) = 1/x turns the integral into an Owen-T-type
integral that can be truncated where the integrand becomes negligible, which
keeps Gauss-Legendre accurate in log space for |h| in the hundreds.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite import hermgauss
from numpy.polynomial.legendre import leggauss
from scipy.special import log_ndtr, logsumexp, ndtr

INV_SQRT_2PI = 0.3989422804014327
LOG_SQRT_2PI = 0.9189385332046728


def norm_cdf(x):
    return ndtr(x)


def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    return INV_SQRT_2PI * np.exp(-0.5 * x * x)


@lru_cache(maxsize=None)
def legendre_01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = leggauss(n)
    nodes = 0.5 * (x + 1.0)
    weights = 0.5 * w
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@lru_cache(maxsize=None)
def _hermite(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = hermgauss(n)
    return np.sqrt(2.0) * x, w / np.sqrt(np.pi)


# The correction term is truncated where its integrand falls below e^{-_TRUNC}
# of its peak value.
_TRUNC = 45.0


def _log_bvn_correction(h, r, n: int):
    """log of Phi2(h, h; r) - N(h)^2 for r in [0, 1].

    With a = sqrt((1-r)/(1+r)) the correction equals

        (1/pi) e^{-h^2 (1+a^2)/2} int_a^1 e^{-h^2 (x^2 - a^2)/2} / (1 + x^2) dx.

    The integrand is largest at x = a; integrating over x = a + z with z
    truncated where the exponent reaches -_TRUNC keeps every node useful for
    any h, so the logarithm is accurate deep into the lower tail.
    """
    h, r = np.broadcast_arrays(np.asarray(h, dtype=float), np.asarray(r, dtype=float))
    if np.any((r < 0) | (r > 1)):
        raise ValueError("correlation must lie in [0, 1]")
    a = np.sqrt((1.0 - r) / (1.0 + r))
    h2 = h * h
    with np.errstate(divide="ignore", over="ignore"):
        reach = -a + np.sqrt(a * a + 2.0 * _TRUNC / h2)
        upper = np.minimum(1.0 - a, np.where(h2 > 0, reach, np.inf))
        nodes, weights = legendre_01(n)
        z = upper[..., None] * nodes
        x = a[..., None] + z
        expo = -0.5 * h2[..., None] * z * (2.0 * a[..., None] + z) - np.log1p(x * x)
        return (-np.log(np.pi) - 0.5 * h2 * (1.0 + a * a) + np.log(upper)
                + logsumexp(expo, axis=-1, b=weights))


def bvn_diag(h, r, n: int = 64):
    """P(X <= h, Y <= h) for a standard bivariate normal with correlation r in [0, 1]."""
    h = np.asarray(h, dtype=float)
    return norm_cdf(h) ** 2 + np.exp(_log_bvn_correction(h, r, n))


def log_bvn_diag(h, r, n: int = 64):
    """log of ``bvn_diag``; accurate for any finite h, including the far lower tail."""
    h = np.asarray(h, dtype=float)
    return np.logaddexp(2.0 * log_ndtr(h), _log_bvn_correction(h, r, n))


def log_bvn_diag_complement(h, r, n: int = 64):
    """log(1 - Phi2(h, h; r)), accurate when Phi2 is within rounding of 1.

    Uses 1 - Phi2(h, h; r) = 2 N(-h) - Phi2(-h, -h; r), where the subtracted
    term is at most half of the first, so there is no cancellation.
    """
    h = np.asarray(h, dtype=float)
    head = np.log(2.0) + log_ndtr(-h)
    return head + np.log1p(-np.exp(log_bvn_diag(-h, r, n) - head))


def log_bvn_diag_dh(h, r):
    h = np.asarray(h, dtype=float)
    r = np.asarray(r, dtype=float)
    a = np.sqrt(np.clip((1.0 - r) / (1.0 + r), 0.0, None))
    return np.log(2.0) - 0.5 * h * h - LOG_SQRT_2PI + log_ndtr(a * h)


def bvn_diag_dh(h, r):
    """d/dh of ``bvn_diag(h, r)``: 2 phi(h) N(h sqrt((1-r)/(1+r)))."""
    h = np.asarray(h, dtype=float)
    r = np.asarray(r, dtype=float)
    a = np.sqrt(np.clip((1.0 - r) / (1.0 + r), 0.0, None))
    return 2.0 * norm_pdf(h) * norm_cdf(a * h)


def _law_to_diag(mean, std):
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    if np.any(np.isnan(mean)) or np.any(np.isnan(std)):
        raise ValueError("NaN input")
    if np.any(std < 0):
        raise ValueError("std must be >= 0")
    var = std * std
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.sqrt(1.0 + var)
        h = np.where(np.isinf(std), 0.0, mean / scale)
        r = np.where(np.isinf(std), 1.0, var / (1.0 + var))
    return h, r, scale


def expect_Nsq(mean, std, n: int = 64):
    """E[N(d)^2] for d ~ Normal(mean, std^2).

    Writing N(d)^2 = P(X1 <= d, X2 <= d) with X1, X2 independent of d gives
    Phi2(m, m; r) with m = mean / sqrt(1 + std^2) and r = std^2 / (1 + std^2).
    """
    h, r, _ = _law_to_diag(mean, std)
    return bvn_diag(h, r, n)


def expect_Nphi(mean, std):
    """E[N(d) phi(d)] for d ~ Normal(mean, std^2); half the mean-derivative of E[N(d)^2]."""
    h, r, scale = _law_to_diag(mean, std)
    with np.errstate(invalid="ignore"):
        out = 0.5 * bvn_diag_dh(h, r) / scale
    return np.where(np.isinf(scale), 0.0, out)


def hermite_expect(fn, mean, std, n: int = 64):
    """E[fn(d)] for d ~ Normal(mean, std^2) by n-point Gauss-Hermite quadrature."""
    x, w = _hermite(n)
    mean = np.asarray(mean, dtype=float)[..., None]
    std = np.asarray(std, dtype=float)[..., None]
    return fn(mean + std * x) @ w
