"""Average Oracle covariance filtering: estimators, calibration and benchmarks."""

from .calibration import (
    AOCalibration,
    apply_ao,
    average_overlap,
    calibrate_ao,
    load_calibration,
    save_calibration,
    separability_diagnostic,
)
from .data import ReturnsPanel, filter_assets, load_panel, save_panel, standardize
from .errors import AOCovError, DataError, InfeasibleWindowError, NumericError
from .estimators import apply_rie, nls_cv_eigenvalues, oracle_eigenvalues, rescale_to_covariance
from .linalg import eigendecompose, overlap, sample_covariance
from .metrics import eigenvalue_deviation, frobenius, kl_divergence, overlap_entropy
from .portfolio import gmv_weights, realized_volatility
from .synth import SynthConfig, generate

__version__ = "0.1.0"

__all__ = [
    "AOCalibration",
    "AOCovError",
    "DataError",
    "InfeasibleWindowError",
    "NumericError",
    "ReturnsPanel",
    "SynthConfig",
    "apply_ao",
    "apply_rie",
    "average_overlap",
    "calibrate_ao",
    "eigendecompose",
    "eigenvalue_deviation",
    "filter_assets",
    "frobenius",
    "generate",
    "gmv_weights",
    "kl_divergence",
    "load_calibration",
    "load_panel",
    "nls_cv_eigenvalues",
    "oracle_eigenvalues",
    "overlap",
    "overlap_entropy",
    "realized_volatility",
    "rescale_to_covariance",
    "sample_covariance",
    "save_calibration",
    "save_panel",
    "separability_diagnostic",
    "standardize",
]
