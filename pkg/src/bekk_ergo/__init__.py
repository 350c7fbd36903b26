"""
Stationarity, drift certificates and ergodicity diagnostics for BEKK GARCH
models.
"""
from importlib import metadata

try:
    __version__ = metadata.version("artifact")
except metadata.PackageNotFoundError:  # pragma: no cover
    __version__ = "0.1.0"

from .exceptions import (
    BekkError,
    CertificateFailure,
    DimensionError,
    DomainError,
    InconsistencyError,
    ModelError,
    NumericalError,
)
from .model import BekkModel, load_model, model_hash, save_model
from .state import ChainState
from .stationarity import (
    arch_infinity_coeffs,
    attracting_point,
    check_h3,
    dual_covariance,
    rho_AB,
    stationary_covariance,
    volatility_fixed_point,
)
from .drift import build_certificate, conditional_drift, verify_drift
from .simulate import offstate_probe, run, run_ensemble
from .diagnostics import convergence_probe, moment_check, orbit_dimension

__all__ = [
    "BekkError",
    "CertificateFailure",
    "DimensionError",
    "DomainError",
    "InconsistencyError",
    "ModelError",
    "NumericalError",
    "BekkModel",
    "ChainState",
    "load_model",
    "save_model",
    "model_hash",
    "rho_AB",
    "check_h3",
    "stationary_covariance",
    "dual_covariance",
    "volatility_fixed_point",
    "attracting_point",
    "arch_infinity_coeffs",
    "build_certificate",
    "conditional_drift",
    "verify_drift",
    "run",
    "run_ensemble",
    "offstate_probe",
    "convergence_probe",
    "orbit_dimension",
    "moment_check",
]
