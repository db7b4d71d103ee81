"""Mean-variance-hedging prices for Merton-style bonds on a non-traded firm value."""

__version__ = "0.1.0"

from mvhbond.model import (
    DerivedConstants,
    DomainError,
    MarketState,
    ModelParams,
    NumericsConfig,
    REFERENCE_PARAMS,
    derived,
    load_params,
    validate,
)
from mvhbond.closed_form import BOutputs, a_of_t, b_price, merton_baseline, yield_spread
from mvhbond.repl_error import CTildeOutputs, c_tilde_curve, c_value, gauss_expect_Nsq, log_ctilde
from mvhbond.pricing import (
    DiagnosticsReport,
    PriceBreakdown,
    M_process,
    N_process,
    bond_price,
    nflvr_diagnostics,
    theta_ratio,
)


__all__ = [
    "BOutputs",
    "CTildeOutputs",
    "DerivedConstants",
    "DiagnosticsReport",
    "DomainError",
    "M_process",
    "MarketState",
    "ModelParams",
    "N_process",
    "NumericsConfig",
    "PriceBreakdown",
    "REFERENCE_PARAMS",
    "a_of_t",
    "b_price",
    "bond_price",
    "c_tilde_curve",
    "c_value",
    "derived",
    "gauss_expect_Nsq",
    "load_params",
    "log_ctilde",
    "merton_baseline",
    "nflvr_diagnostics",
    "theta_ratio",
    "validate",
    "yield_spread",
]
