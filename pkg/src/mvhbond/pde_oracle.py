"""Finite-difference oracle for b and c.

Both equations are solved in u = ln v and tau = T - t after the exponential
changes of variable that turn them into heat equations:

    b = b~ e^{eta u + beta tau},          b~_tau = 1/2 sigma1^2 b~_uu,
    c = q e^{alpha1 u + beta1 tau},       q_tau  = 1/2 sigma1^2 q_uu
                                                   + e^{-alpha1 u - beta1 tau} a sigma1^2 (1-rho^2) b_u^2.

The scheme is Crank-Nicolson with Rannacher start-up (the first few steps are
replaced by pairs of implicit half-steps to damp the payoff kink), Dirichlet
data at both ends of the u-grid, and a banded solve per step.  The grid puts
ln D on a node.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from mvhbond.closed_form import b_of, b_price
from mvhbond.model import ModelParams, NumericsConfig
from mvhbond.repl_error import ctilde_small_v_limit, log_ctilde

DEFAULT_NUMERICS = NumericsConfig()


class GridError(RuntimeError):
    """Degenerate grid specification or a non-finite solution."""


@dataclass(frozen=True)
class GridSpec:
    nu: int = 400            # space intervals; even so ln D is the middle node
    ntau: int = 400          # time steps over [0, T]
    width: float = 8.0       # half-width of the u-domain in sigma1 sqrt(T) units
    rannacher_steps: int = 2

    def __post_init__(self):
        if not isinstance(self.nu, int) or self.nu < 4 or self.nu % 2:
            raise GridError(f"nu must be an even integer >= 4, got {self.nu!r}")
        if not isinstance(self.ntau, int) or self.ntau < 2:
            raise GridError(f"ntau must be an integer >= 2, got {self.ntau!r}")
        if not self.width > 0:
            raise GridError("width must be > 0")
        if self.rannacher_steps < 0 or self.rannacher_steps > self.ntau:
            raise GridError("rannacher_steps must lie in [0, ntau]")

    @classmethod
    def from_numerics(cls, num: NumericsConfig) -> "GridSpec":
        return cls(num.grid_nu, num.grid_ntau, num.grid_width, num.rannacher_steps)

    def refined(self) -> "GridSpec":
        return GridSpec(2 * self.nu, 2 * self.ntau, self.width, 2 * self.rannacher_steps)

    def axes(self, params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
        half = self.width * params.sigma1 * np.sqrt(params.T)
        du = 2.0 * half / self.nu
        u = np.log(params.D) + du * (np.arange(self.nu + 1) - self.nu // 2)
        tau = params.T * np.arange(self.ntau + 1) / self.ntau
        return u, tau


@dataclass(frozen=True)
class GridSolution:
    """A solution surface values[i, j] at (tau_grid[i], u_grid[j])."""

    which: str
    u_grid: np.ndarray
    tau_grid: np.ndarray
    values: np.ndarray
    lower_bc: str
    upper_bc: str
    du: float
    dtau: float
    T: float

    @property
    def v_grid(self) -> np.ndarray:
        return np.exp(self.u_grid)

    @property
    def t_grid(self) -> np.ndarray:
        return self.T - self.tau_grid

    def row(self, t: float) -> np.ndarray:
        """Values on the time node t (must be a grid time)."""
        i = int(round((self.T - t) / self.dtau))
        if i < 0 or i >= self.tau_grid.size or abs(self.tau_grid[i] - (self.T - t)) > 1e-9 * self.T:
            raise GridError(f"t={t} is not a grid time")
        return self.values[i]

    def interpolate(self, t: float, v) -> np.ndarray | float:
        """Cubic-spline interpolation in u along the time node ``t``."""
        spline = CubicSpline(self.u_grid, self.row(t))
        out = spline(np.log(np.asarray(v, dtype=float)))
        return float(out) if np.ndim(out) == 0 else out

    def to_csv(self, path, header_lines=(), every: int = 1) -> None:
        """Write (tau, u, v, value) rows; ``header_lines`` are emitted as '# ' comments."""
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["tau", "u", "v", "value"])
            for i in range(0, self.tau_grid.size, every):
                for j in range(0, self.u_grid.size, every):
                    writer.writerow([format(self.tau_grid[i], ".17g"), format(self.u_grid[j], ".17g"),
                                     format(np.exp(self.u_grid[j]), ".17g"),
                                     format(self.values[i, j], ".17g")])


def _heat_solve(u, tau, sigma, initial, lower, upper, source, rannacher):
    """Solve w_tau = 1/2 sigma^2 w_uu + source(tau, u) with Dirichlet data.

    ``lower(tau)``/``upper(tau)`` give boundary values; ``source`` may be None.
    Returns the full (len(tau), len(u)) surface.
    """
    n = u.size
    du = u[1] - u[0]
    dtau = tau[1] - tau[0]
    lam = 0.5 * sigma**2 / du**2
    out = np.empty((tau.size, n))
    out[0] = initial
    w = initial.copy()
    src = (lambda s: np.zeros(n)) if source is None else source

    def step(w, t_old, h, theta):
        # (I - theta h A) w_new = (I + (1-theta) h A) w_old + h [theta f_new + (1-theta) f_old]
        m = n - 2
        rhs = w[1:-1].copy()
        if theta < 1.0:
            lap = w[:-2] - 2.0 * w[1:-1] + w[2:]
            rhs += (1.0 - theta) * h * lam * lap
        t_new = t_old + h
        f_new = src(t_new)[1:-1]
        rhs += h * theta * f_new
        if theta < 1.0:
            rhs += h * (1.0 - theta) * src(t_old)[1:-1]
        lo, hi = lower(t_new), upper(t_new)
        rhs[0] += theta * h * lam * lo
        rhs[-1] += theta * h * lam * hi
        ab = np.empty((3, m))
        ab[0] = -theta * h * lam
        ab[1] = 1.0 + 2.0 * theta * h * lam
        ab[2] = -theta * h * lam
        new = np.empty(n)
        new[1:-1] = solve_banded((1, 1), ab, rhs)
        new[0], new[-1] = lo, hi
        return new

    for i in range(1, tau.size):
        t_old = tau[i - 1]
        if i <= rannacher:
            w = step(w, t_old, 0.5 * dtau, 1.0)
            w = step(w, t_old + 0.5 * dtau, 0.5 * dtau, 1.0)
        else:
            w = step(w, t_old, dtau, 0.5)
        out[i] = w
    if not np.all(np.isfinite(out)):
        raise GridError("non-finite values in the finite-difference solution")
    return out


def solve_b_pde(params: ModelParams, spec: GridSpec | None = None) -> GridSolution:
    """b on the grid from the heat-equation form; boundary data b = v e^{alpha tau}, b = D."""
    spec = spec or GridSpec.from_numerics(DEFAULT_NUMERICS)
    u, tau = spec.axes(params)
    dc = params.derived
    s1 = params.sigma1
    eta, beta, alpha = dc.eta, dc.beta, dc.alpha

    def to_tilde(b_val, tt, uu):
        return b_val * np.exp(-eta * uu - beta * tt)

    initial = to_tilde(np.minimum(np.exp(u), params.D), 0.0, u)
    lower = lambda tt: to_tilde(np.exp(u[0] + alpha * tt), tt, u[0])
    upper = lambda tt: to_tilde(params.D, tt, u[-1])
    w = _heat_solve(u, tau, s1, initial, lower, upper, None, spec.rannacher_steps)
    values = w * np.exp(eta * u[None, :] + beta * tau[:, None])
    values[0] = np.minimum(np.exp(u), params.D)      # exact payoff row
    return GridSolution("b", u, tau, values, "b = v exp(alpha tau)", "b = D",
                        float(u[1] - u[0]), float(tau[1] - tau[0]), params.T)


def solve_c_pde(params: ModelParams, spec: GridSpec | None = None,
                b_surface: GridSolution | None = None, source: str = "analytic") -> GridSolution:
    """c on the grid; the source uses b_u = v b_v either analytically or from ``b_surface``.

    Boundary data: c = v^2 * lim_{v->0} c/v^2 at the lower end, c = 0 at the upper end.
    """
    spec = spec or GridSpec.from_numerics(DEFAULT_NUMERICS)
    u, tau = spec.axes(params)
    dc = params.derived
    s1 = params.sigma1
    a1, b1 = dc.alpha1, dc.beta1
    weight = s1**2 * (1.0 - params.rho**2)
    if source == "analytic":
        def b_u(tt):
            _, core, live = b_of(dc.alpha, s1, params.D, tt, np.exp(u))
            return np.where(live, np.exp(u) * core[3], np.exp(u) * (u < np.log(params.D)))
    elif source == "grid":
        if b_surface is None:
            b_surface = solve_b_pde(params, spec)
        if b_surface.values.shape != (tau.size, u.size):
            raise GridError("b_surface grid does not match the c grid")
        grad = np.gradient(b_surface.values, b_surface.du, axis=1)
        dtau = tau[1] - tau[0]

        def b_u(tt):
            # linear in tau between nodes (Rannacher half-steps fall between them)
            x = tt / dtau
            lo = min(int(np.floor(x + 1e-9)), tau.size - 2)
            frac = x - lo
            return (1.0 - frac) * grad[lo] + frac * grad[lo + 1]
    else:
        raise ValueError(f"unknown source {source!r}")

    def f(tt):
        return (np.exp(-a1 * u - b1 * tt) * np.exp(-params.theta_bar**2 * tt)
                * weight * b_u(tt) ** 2)

    to_q = lambda c_val, tt, uu: c_val * np.exp(-a1 * uu - b1 * tt)
    lower = lambda tt: to_q(np.exp(2 * u[0]) * ctilde_small_v_limit(params, tt), tt, u[0])
    upper = lambda tt: 0.0
    q = _heat_solve(u, tau, s1, np.zeros(u.size), lower, upper, f, spec.rannacher_steps)
    values = q * np.exp(a1 * u[None, :] + b1 * tau[:, None])
    return GridSolution("c", u, tau, values, "c = v^2 lim c/v^2", "c = 0",
                        float(u[1] - u[0]), float(tau[1] - tau[0]), params.T)


def interior_mask(params: ModelParams, sol: GridSolution, half_width: float = 3.0,
                  tau_min_frac: float = 0.05) -> np.ndarray:
    """Nodes with |u - ln D| <= half_width sigma1 sqrt(T) and tau >= tau_min_frac T."""
    du = np.abs(sol.u_grid - np.log(params.D)) <= half_width * params.sigma1 * np.sqrt(params.T)
    dt = sol.tau_grid >= tau_min_frac * params.T - 1e-12
    return dt[:, None] & du[None, :]


def b_grid_error(params: ModelParams, sol: GridSolution, **mask_kw) -> float:
    """max |b_pde - b_closed| / D over the interior mask."""
    mask = interior_mask(params, sol, **mask_kw)
    tt, vv = np.meshgrid(sol.t_grid, sol.v_grid, indexing="ij")
    exact = np.asarray(b_price(params, np.clip(tt, 0.0, params.T), vv).b)
    return float(np.max(np.abs(sol.values - exact)[mask]) / params.D)


def residual_check(params: ModelParams, surface, which: str,
                   numerics: NumericsConfig | None = None) -> float:
    """Max absolute residual of the a, b or c equation on interior points.

    ``surface`` is either a GridSolution (derivatives by central differences
    on the grid) or a pair (t_points, v_points) at which the closed forms are
    differentiated: analytically for a and b, and for c with an analytic
    v-derivative plus central differences in t and for the second v-derivative.
    """
    num = numerics or DEFAULT_NUMERICS
    s1, rho = params.sigma1, params.rho
    if which == "a":
        t = np.asarray(surface[0] if not isinstance(surface, GridSolution) else surface.t_grid)
        a = np.exp(-params.theta_bar**2 * (params.T - t))
        a_t = params.theta_bar**2 * np.exp(-params.theta_bar**2 * (params.T - t))
        return float(np.max(np.abs(a_t - params.theta_bar**2 * a)))
    if isinstance(surface, GridSolution):
        return _grid_residual(params, surface, which)
    t, v = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in surface))
    alpha = params.derived.alpha
    bo = b_price(params, t, v)
    if which == "b":
        res = bo.db_dt + alpha * v * bo.db_dv + 0.5 * s1**2 * v**2 * bo.d2b_dv2
        return float(np.max(np.abs(res)))
    if which == "c":
        h = num.fd_bump

        def cv(tau, vv):
            # via log_ctilde, which accepts tau > T for the stencil at t = 0
            log_ct, log_sl = log_ctilde(params, tau, vv, num)
            ct = np.exp(log_ct)
            return ct * vv**2, vv * (2.0 * ct - np.exp(log_sl))

        tau = params.T - t
        _, c_v = cv(tau, v)
        ht = h * tau
        c_t = (cv(tau - ht, v)[0] - cv(tau + ht, v)[0]) / (2.0 * ht)
        c_vv = (cv(tau, v * (1 + h))[1] - cv(tau, v * (1 - h))[1]) / (2.0 * h * v)
        a = np.exp(-params.theta_bar**2 * (params.T - t))
        src = a * s1**2 * (1.0 - rho**2) * v**2 * np.asarray(bo.db_dv) ** 2
        res = c_t + params.mu1 * v * c_v + 0.5 * s1**2 * v**2 * c_vv + src
        return float(np.max(np.abs(res)))
    raise ValueError(f"which must be 'a', 'b' or 'c', got {which!r}")


def _grid_residual(params: ModelParams, sol: GridSolution, which: str) -> float:
    """Residual of the original-variable PDE on interior grid nodes (tau, u)."""
    s1 = params.sigma1
    V = sol.values
    du, dtau = sol.du, sol.dtau
    w_t = (V[2:, 1:-1] - V[:-2, 1:-1]) / (2 * dtau)          # d/dtau
    w_u = (V[1:-1, 2:] - V[1:-1, :-2]) / (2 * du)
    w_uu = (V[1:-1, 2:] - 2 * V[1:-1, 1:-1] + V[1:-1, :-2]) / du**2
    tau = sol.tau_grid[1:-1, None]
    u = sol.u_grid[None, 1:-1]
    if which == "b":
        drift = params.derived.alpha
        src = 0.0
    elif which == "c":
        drift = params.mu1
        _, core, live = b_of(params.derived.alpha, s1, params.D, tau, np.exp(u))
        src = (np.exp(-params.theta_bar**2 * tau) * s1**2 * (1 - params.rho**2)
               * (np.exp(u) * core[3]) ** 2)
    else:
        raise ValueError(f"which must be 'b' or 'c' for a grid surface, got {which!r}")
    res = -w_t + (drift - 0.5 * s1**2) * w_u + 0.5 * s1**2 * w_uu + src
    mask = interior_mask(params, sol)[1:-1, 1:-1]
    return float(np.max(np.abs(res[mask])))

