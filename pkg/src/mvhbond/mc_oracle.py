"""Monte-Carlo oracle: correlated GBM paths, the optimal discrete hedge, and the
quadratic value-function fit.

Random numbers come in blocks of ``mc_block`` paths.  Block ``k`` draws from its
own Philox stream keyed by ``SeedSequence(seed, spawn_key=(k,))`` and always
draws a full block, so the seed and the global path index fully determine a path
whatever the total path count or the number of worker threads.  Per-block sums are
combined with ``math.fsum`` in block order.

The optimal control is affine in wealth,

    theta* = rho sigma1 v b_v / (sigma2 s) - mu2 (p - b) / (sigma2^2 s),

so the hedged wealth is P_k = X_k + p0 delta_k with delta_0 = 1,
delta_{k+1} = delta_k (1 - mu2 dS_k / (sigma2^2 S_k)).  One pass over the paths
therefore yields the terminal error for every initial wealth in a sweep, with
common random numbers.  The same pass also hedges on every other time node
(holding the position fixed for two steps) to estimate the rebalancing bias by
steps doubling.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from mvhbond.closed_form import b_of, b_price
from mvhbond.model import DomainError, ModelParams, NumericsConfig

DEFAULT_NUMERICS = NumericsConfig()


class FitError(RuntimeError):
    """The quadratic fit of the sweep failed (non-convex or poor fit)."""


def num_threads() -> int:
    """Worker count from MVH_NUM_THREADS (default 1); results do not depend on it."""
    raw = os.environ.get("MVH_NUM_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise DomainError("MVH_NUM_THREADS", f"expected an integer, got {raw!r}") from None
    return max(1, n)


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


@dataclass(frozen=True)
class PathBatch:
    """A reproducible set of exact-lognormal paths of (V, S) on a uniform grid over [t0, T].

    Paths are generated on demand block by block (``blocks()``); ``V`` and ``S``
    materialise the full (n_steps + 1, n_paths) arrays, which is only sensible
    for small batches.
    """

    params: ModelParams
    t0: float
    v0: float
    s0: float
    n_paths: int
    n_steps: int
    rng_seed: int
    block_size: int = 4096

    def __post_init__(self):
        if not 0.0 <= self.t0 < self.params.T:
            raise DomainError("t0", f"must lie in [0, T={self.params.T})")
        for name in ("v0", "s0"):
            if not getattr(self, name) > 0:
                raise DomainError(name, "must be > 0")
        for name in ("n_paths", "n_steps", "block_size"):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 1:
                raise DomainError(name, "must be a positive integer")

    @property
    def dt(self) -> float:
        return (self.params.T - self.t0) / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_steps + 1)

    @property
    def n_blocks(self) -> int:
        return -(-self.n_paths // self.block_size)

    def block(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """(V, S) for block ``k``, each of shape (n_steps + 1, m)."""
        p = self.params
        m = min(self.block_size, self.n_paths - k * self.block_size)
        z = _block_rng(self.rng_seed, k).standard_normal((self.n_steps, 2, self.block_size))
        z = z[:, :, :m]
        sq = math.sqrt(self.dt)
        w1 = z[:, 0]
        w2 = p.rho * w1 + math.sqrt(max(0.0, 1.0 - p.rho**2)) * z[:, 1]
        logv = (p.mu1 - 0.5 * p.sigma1**2) * self.dt + p.sigma1 * sq * w1
        logs = (p.mu2 - 0.5 * p.sigma2**2) * self.dt + p.sigma2 * sq * w2
        V = np.empty((self.n_steps + 1, m))
        S = np.empty((self.n_steps + 1, m))
        V[0] = self.v0
        S[0] = self.s0
        V[1:] = self.v0 * np.exp(np.cumsum(logv, axis=0))
        S[1:] = self.s0 * np.exp(np.cumsum(logs, axis=0))
        return V, S

    def blocks(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        for k in range(self.n_blocks):
            yield self.block(k)

    @property
    def V(self) -> np.ndarray:
        return np.concatenate([blk[0] for blk in self.blocks()], axis=1)

    @property
    def S(self) -> np.ndarray:
        return np.concatenate([blk[1] for blk in self.blocks()], axis=1)


def simulate_paths(params: ModelParams, t0: float, v0: float, s0: float, n_paths: int,
                   n_steps: int, seed: int, block_size: int = 4096) -> PathBatch:
    """Exact lognormal paths with corr(dW1, dW2) = rho; deterministic given ``seed``."""
    return PathBatch(params, float(t0), float(v0), float(s0), int(n_paths), int(n_steps),
                     int(seed), int(block_size))


def optimal_theta(params: ModelParams, t, v, s, p):
    """Units of S held by the mean-variance optimal strategy at (t, v, s, p)."""
    bo = b_price(params, t, v)
    s = np.asarray(s, dtype=float)
    if np.any(~(s > 0)):
        raise DomainError("s", "must be > 0")
    out = (params.rho * params.sigma1 * np.asarray(v) * bo.db_dv / (params.sigma2 * s)
           - params.mu2 * (np.asarray(p) - bo.b) / (params.sigma2**2 * s))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Hedging


@dataclass(frozen=True)
class HedgeSimResult:
    p0: float
    mean_sq_error: float
    std_error: float
    fitted_quadratic: tuple[float, float, float] | None
    n_paths: int
    n_steps: int
    seed: int
    mean_sq_error_coarse: float = float("nan")   # same paths, rebalanced every other step
    neg_wealth_fraction: float = float("nan")     # paths with P_t < 0 at some step
    r_squared: float = float("nan")
    sweep_p0: tuple[float, ...] = ()
    sweep_mse: tuple[float, ...] = ()
    sweep_se: tuple[float, ...] = ()
    extra: dict = field(default_factory=dict)

    @property
    def bias_band(self) -> float:
        """Steps-doubling estimate of the O(dt) rebalancing bias at ``n_steps``."""
        return abs(self.mean_sq_error_coarse - self.mean_sq_error)

    def to_dict(self) -> dict:
        a_hat, b_hat, c_hat = self.fitted_quadratic or (None, None, None)
        out = {
            "p0": self.p0, "mean_sq_error": self.mean_sq_error, "std_error": self.std_error,
            "a_hat": a_hat, "b_hat": b_hat, "c_hat": c_hat,
            "n_paths": self.n_paths, "n_steps": self.n_steps, "seed": self.seed,
            "mean_sq_error_coarse": self.mean_sq_error_coarse,
            "bias_band": self.bias_band,
            "neg_wealth_fraction": self.neg_wealth_fraction,
            "r_squared": self.r_squared,
            "sweep_p0": list(self.sweep_p0), "sweep_mse": list(self.sweep_mse),
            "sweep_se": list(self.sweep_se),
        }
        out.update(self.extra)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _affine_hedge(params: ModelParams, times: np.ndarray, V: np.ndarray, S: np.ndarray,
                  every: int):
    """Terminal (X, delta) with wealth X + p0 delta, rebalancing on every ``every``-th node."""
    idx = np.arange(0, V.shape[0], every)
    if idx[-1] != V.shape[0] - 1:
        raise DomainError("n_steps", f"must be divisible by {every}")
    Vk, Sk = V[idx], S[idx]
    tau = params.T - times[idx[:-1]]
    b, core, live = b_of(params.derived.alpha, params.sigma1, params.D, tau[:, None], Vk[:-1])
    b_v = np.where(live, core[3], 0.0)
    s_now = Sk[:-1]
    dS = np.diff(Sk, axis=0)
    gain = params.mu2 / (params.sigma2**2 * s_now)
    base = params.rho * params.sigma1 * Vk[:-1] * b_v / (params.sigma2 * s_now) + gain * b
    X = np.zeros(V.shape[1])
    delta = np.ones(V.shape[1])
    xs, ds = [X], [delta]
    for k in range(dS.shape[0]):
        X = X + (base[k] - gain[k] * X) * dS[k]
        delta = delta * (1.0 - gain[k] * dS[k])
        xs.append(X)
        ds.append(delta)
    return np.array(xs), np.array(ds)


def _block_stats(batch: PathBatch, k: int, p0s: np.ndarray, p_ref: float):
    params = batch.params
    V, S = batch.block(k)
    payoff = np.minimum(V[-1], params.D)
    xs, ds = _affine_hedge(params, batch.times, V, S, 1)
    err = xs[-1][None, :] + p0s[:, None] * ds[-1][None, :] - payoff[None, :]
    sq = err * err
    wealth_ref = xs + p_ref * ds
    negative = np.count_nonzero(np.any(wealth_ref < 0.0, axis=0))
    coarse = None
    if batch.n_steps % 2 == 0:
        xc, dc = _affine_hedge(params, batch.times, V, S, 2)
        ec = xc[-1] + p_ref * dc[-1] - payoff
        coarse = float(np.sum(ec * ec))
    return np.sum(sq, axis=1), np.sum(sq * sq, axis=1), negative, coarse


def _run_sweep(batch: PathBatch, p0s: Sequence[float], p_ref: float):
    p0s = np.asarray(p0s, dtype=float)
    workers = num_threads()
    blocks = range(batch.n_blocks)
    if workers == 1:
        stats = [_block_stats(batch, k, p0s, p_ref) for k in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            stats = list(pool.map(lambda k: _block_stats(batch, k, p0s, p_ref), blocks))
    n = batch.n_paths
    s1 = np.array([math.fsum(st[0][j] for st in stats) for j in range(p0s.size)])
    s2 = np.array([math.fsum(st[1][j] for st in stats) for j in range(p0s.size)])
    mse = s1 / n
    var = np.maximum(s2 / n - mse**2, 0.0)
    se = np.sqrt(var / n)
    neg = sum(st[2] for st in stats) / n
    coarse = (math.fsum(st[3] for st in stats) / n) if stats[0][3] is not None else float("nan")
    return mse, se, neg, coarse


def hedge_once(params: ModelParams, t0: float, v0: float, s0: float, p0: float,
               batch: PathBatch) -> HedgeSimResult:
    """Mean and standard error of (P_T - min(V_T, D))^2 starting from wealth ``p0``."""
    _check_batch(params, t0, v0, s0, batch)
    mse, se, neg, coarse = _run_sweep(batch, [p0], p0)
    return HedgeSimResult(p0=float(p0), mean_sq_error=float(mse[0]), std_error=float(se[0]),
                          fitted_quadratic=None, n_paths=batch.n_paths, n_steps=batch.n_steps,
                          seed=batch.rng_seed, mean_sq_error_coarse=coarse,
                          neg_wealth_fraction=float(neg))


def default_p0_grid(params: ModelParams, t0: float, v0: float, points: int = 7,
                    spread: float = 0.1) -> np.ndarray:
    """``points`` initial wealths b (1 + spread k), centred on b(t0, v0)."""
    b = float(b_price(params, t0, v0).b)
    half = (points - 1) / 2
    return b * (1.0 + spread * (np.arange(points) - half) / max(half / 3.0, 1.0))


def fit_value_function(params: ModelParams, t0: float, v0: float, s0: float, p0_grid,
                       batch: PathBatch, r2_min: float = 0.999) -> HedgeSimResult:
    """Least-squares fit of MSE(p0) = a (p0 - b)^2 + c over a sweep with common paths.

    The reported ``mean_sq_error`` and ``std_error`` are those at the closed-form
    b(t0, v0), which is hedged alongside the sweep.
    """
    _check_batch(params, t0, v0, s0, batch)
    p0_grid = np.asarray(p0_grid, dtype=float)
    if p0_grid.ndim != 1 or p0_grid.size < 5:
        raise DomainError("p0_grid", "need at least 5 initial wealths")
    b_ref = float(b_price(params, t0, v0).b)
    if not p0_grid.min() < b_ref < p0_grid.max():
        raise DomainError("p0_grid", "must straddle b(t0, v0)")
    points = np.append(p0_grid, b_ref)
    mse, se, neg, coarse = _run_sweep(batch, points, b_ref)
    sweep_mse, sweep_se = mse[:-1], se[:-1]
    q2, q1, q0 = np.polyfit(p0_grid, sweep_mse, 2)
    fitted = np.polyval([q2, q1, q0], p0_grid)
    ss_res = float(np.sum((sweep_mse - fitted) ** 2))
    ss_tot = float(np.sum((sweep_mse - sweep_mse.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")
    if not q2 > 0:
        raise FitError(f"quadratic coefficient {q2:.6g} is not positive")
    if not r2 >= r2_min:
        raise FitError(f"R^2 = {r2:.6g} below {r2_min}")
    a_hat = q2
    b_hat = -q1 / (2.0 * q2)
    c_hat = q0 - q1 * q1 / (4.0 * q2)
    return HedgeSimResult(
        p0=b_ref, mean_sq_error=float(mse[-1]), std_error=float(se[-1]),
        fitted_quadratic=(float(a_hat), float(b_hat), float(c_hat)),
        n_paths=batch.n_paths, n_steps=batch.n_steps, seed=batch.rng_seed,
        mean_sq_error_coarse=coarse, neg_wealth_fraction=float(neg), r_squared=float(r2),
        sweep_p0=tuple(float(x) for x in p0_grid), sweep_mse=tuple(float(x) for x in sweep_mse),
        sweep_se=tuple(float(x) for x in sweep_se),
    )


def _check_batch(params, t0, v0, s0, batch: PathBatch):
    if batch.params != params or batch.t0 != t0 or batch.v0 != v0 or batch.s0 != s0:
        raise DomainError("batch", "path batch was simulated for a different start or params")


def run_hedge_experiment(params: ModelParams, t0: float, v0: float, s0: float = 1.0,
                         numerics: NumericsConfig | None = None, p0_grid=None,
                         seed: int | None = None) -> HedgeSimResult:
    """Simulate, sweep and fit in one call with the NumericsConfig path budget."""
    num = numerics or DEFAULT_NUMERICS
    batch = simulate_paths(params, t0, v0, s0, num.mc_paths, num.mc_steps,
                           num.rng_seed if seed is None else seed, num.mc_block)
    grid = default_p0_grid(params, t0, v0) if p0_grid is None else p0_grid
    return fit_value_function(params, t0, v0, s0, grid, batch)


def estimate_drift(params: ModelParams, fn, t: float, v: float, dt: float, n_paths: int,
                   seed: int) -> tuple[float, float]:
    """MC estimate of (E[fn(t+dt, V_{t+dt})] - fn(t, v)) / dt and its standard error.

    Antithetic pairs are used; the estimate converges to the generator of V
    applied to ``fn`` as dt -> 0.
    """
    z = _block_rng(seed, 0).standard_normal(n_paths // 2)
    z = np.concatenate([z, -z])
    step = (params.mu1 - 0.5 * params.sigma1**2) * dt + params.sigma1 * math.sqrt(dt) * z
    incr = (np.asarray(fn(t + dt, v * np.exp(step))) - fn(t, v)) / dt
    half = incr.size // 2
    pairs = 0.5 * (incr[:half] + incr[half:])
    return float(pairs.mean()), float(pairs.std(ddof=1) / math.sqrt(half))
