"""Weighted V-statistics, quadratic forms and spectral statistics for piecewise locally stationary series."""
__version__ = "0.1.0"

from ._accel import USE_NUMBA
from .curves import ConfigError, Curve, SmoothingKernel, as_curve, as_kernel
from .pls import (Innovation, PlsModel, SegmentFilter, SeriesPath, custom, dependence_measure, tvar1, tvma)
from .weights import (WeightMatrix, WeightSpec, build_weight_matrix, check_A3, diagnostics, max_abs_eigenvalue)
from .vstat import (KernelH, evaluate_Q, evaluate_V, hoeffding_decompose, kernel_by_name, mean_kernel,
                    product_kernel, variance_kernel)
from .estimators import asymptotic_bias, asymptotic_sd, estimate_with_inference, local_linear_theta
from .spectral import fourier_sums, periodogram, smoothed_periodogram, spectrum
from .limit_laws import MixtureLaw, dejong_normality_check, ks_distance, mixture_cdf, quadform_mixture, sample_mixture
from .mc import McConfig, McReport, ladder, run

__all__ = [
    "ConfigError", "Curve", "SmoothingKernel", "as_curve", "as_kernel", "Innovation", "PlsModel", "SegmentFilter",
    "SeriesPath", "custom", "dependence_measure", "tvar1", "tvma", "WeightMatrix", "WeightSpec",
    "build_weight_matrix", "check_A3", "diagnostics", "max_abs_eigenvalue", "KernelH", "evaluate_Q", "evaluate_V",
    "hoeffding_decompose", "kernel_by_name", "mean_kernel", "product_kernel", "variance_kernel",
    "asymptotic_bias", "asymptotic_sd", "estimate_with_inference", "local_linear_theta", "fourier_sums",
    "periodogram", "smoothed_periodogram", "spectrum", "MixtureLaw", "dejong_normality_check", "ks_distance",
    "mixture_cdf", "quadform_mixture", "sample_mixture", "McConfig", "McReport", "ladder", "run", "USE_NUMBA",
]
