"""Parameter and state types shared by the pricing, simulation and PDE modules."""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping


class DomainError(ValueError):
    """An input lies outside the domain of the model; ``field`` names the culprit."""

    def __init__(self, field: str, message: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if message else field)


PARAM_FIELDS = ("mu1", "sigma1", "mu2", "sigma2", "rho", "T", "D", "kappa")


@dataclass(frozen=True)
class DerivedConstants:
    alpha: float
    theta_bar: float
    eta: float
    alpha1: float
    beta1: float
    beta: float


@dataclass(frozen=True)
class ModelParams:
    """Market and preference parameters.

    Firm value ``V`` and traded asset ``S`` follow correlated geometric Brownian
    motions with drifts ``mu1``/``mu2`` and volatilities ``sigma1``/``sigma2``.
    Prices are already discounted, so there is no interest-rate field. ``kappa``
    is the risk-aversion constant of the bond-price discount factor.
    """

    mu1: float
    sigma1: float
    mu2: float
    sigma2: float
    rho: float
    T: float
    D: float
    kappa: float = 0.0

    def __post_init__(self):
        for name in PARAM_FIELDS:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise DomainError(name, f"expected a real number, got {value!r}")
            if not math.isfinite(value):
                raise DomainError(name, "must be finite")
            object.__setattr__(self, name, float(value))
        if self.sigma1 <= 0:
            raise DomainError("sigma1", "must be > 0")
        if self.sigma2 <= 0:
            raise DomainError("sigma2", "must be > 0")
        if abs(self.rho) > 1:
            raise DomainError("rho", "must lie in [-1, 1]")
        if self.T <= 0:
            raise DomainError("T", "must be > 0")
        if self.D <= 0:
            raise DomainError("D", "must be > 0")
        if self.kappa < 0:
            raise DomainError("kappa", "must be >= 0")

    @property
    def theta_bar(self) -> float:
        return self.mu2 / self.sigma2

    @property
    def derived(self) -> DerivedConstants:
        return derived(self)

    def replace(self, **changes: float) -> "ModelParams":
        """Copy with some fields changed; ``theta_bar`` rescales ``mu2`` at fixed ``sigma2``."""
        if "theta_bar" in changes:
            changes["mu2"] = changes.pop("theta_bar") * changes.get("sigma2", self.sigma2)
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in PARAM_FIELDS}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], base: "ModelParams | None" = None) -> "ModelParams":
        unknown = sorted(set(data) - set(PARAM_FIELDS))
        if unknown:
            raise DomainError(unknown[0], "unknown parameter key")
        if base is None:
            missing = [name for name in PARAM_FIELDS if name not in data]
            if missing:
                raise DomainError(missing[0], "missing parameter")
            return cls(**{name: data[name] for name in PARAM_FIELDS})
        return dataclasses.replace(base, **dict(data))


def validate(params: ModelParams | Mapping[str, Any]) -> ModelParams:
    """Return a validated parameter block; raw mappings are parsed strictly."""
    if isinstance(params, ModelParams):
        return ModelParams(**params.to_dict())
    return ModelParams.from_dict(params)


def derived(params: ModelParams) -> DerivedConstants:
    s1 = params.sigma1
    theta_bar = params.mu2 / params.sigma2
    alpha = params.mu1 - params.rho * theta_bar * s1
    eta = 0.5 + (params.rho * theta_bar * s1 - params.mu1) / s1**2
    alpha1 = 0.5 - params.mu1 / s1**2
    beta1 = -0.5 * s1**2 * alpha1**2
    beta = -0.5 * s1**2 * eta**2
    return DerivedConstants(alpha, theta_bar, eta, alpha1, beta1, beta)


def load_params(path: str | Path, base: ModelParams | None = None) -> ModelParams:
    """Read a JSON parameter file; unknown keys are rejected.

    With ``base`` given the file may be partial and overrides ``base``.
    """
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise DomainError("params", "parameter file must hold a JSON object")
    return ModelParams.from_dict(data, base=base)


@dataclass(frozen=True)
class MarketState:
    t: float
    v: float
    s: float | None = None
    p: float | None = None

    def check(self, params: ModelParams) -> "MarketState":
        if not 0.0 <= self.t <= params.T:
            raise DomainError("t", f"must lie in [0, T={params.T}]")
        if not self.v > 0:
            raise DomainError("v", "must be > 0")
        if self.s is not None and not self.s > 0:
            raise DomainError("s", "must be > 0")
        return self


@dataclass(frozen=True)
class NumericsConfig:
    """Knobs for every numerical method in the package."""

    quad_points: int = 64          # Gauss-Legendre nodes in the time integral of c
    inner_quad_points: int = 64    # nodes for Gaussian expectations of N(d)^2
    fd_bump: float = 1e-5          # relative central-difference step
    grid_nu: int = 400             # PDE space intervals (even, so ln D is a node)
    grid_ntau: int = 400           # PDE time steps
    grid_width: float = 8.0        # half-width of the u-domain in units of sigma1*sqrt(T)
    rannacher_steps: int = 2       # leading CN steps replaced by implicit half-steps
    mc_paths: int = 200_000
    mc_steps: int = 500
    rng_seed: int = 20240607
    mc_block: int = 4096           # paths per RNG stream
    diag_nt: int = 41
    diag_nv: int = 41
    diag_eps: float = 1e-3         # diagnostics stop at t = T*(1 - diag_eps)
    theta_growth_tol: float = 0.10

    def __post_init__(self):
        for name in ("quad_points", "inner_quad_points", "grid_nu", "grid_ntau",
                     "mc_paths", "mc_steps", "mc_block", "diag_nt", "diag_nv"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 2:
                raise DomainError(name, "must be an integer >= 2")
        if not 0 < self.fd_bump <= 1e-2:
            raise DomainError("fd_bump", "must lie in (0, 1e-2]")
        if self.grid_width <= 0:
            raise DomainError("grid_width", "must be > 0")
        if self.rannacher_steps < 0:
            raise DomainError("rannacher_steps", "must be >= 0")
        if not 0 < self.diag_eps < 1:
            raise DomainError("diag_eps", "must lie in (0, 1)")

    def replace(self, **changes: Any) -> "NumericsConfig":
        return dataclasses.replace(self, **changes)


# Reference experiment block: T=10, D=100, mu1=0.02,
# sigma1=0.15, theta_bar=0.4, rho=0.6.  sigma2 is not pinned by the closed
# forms; 0.25 is our choice for the simulator.
REFERENCE_PARAMS = ModelParams(mu1=0.02, sigma1=0.15, mu2=0.1, sigma2=0.25, rho=0.6,
                               T=10.0, D=100.0, kappa=10.0)
