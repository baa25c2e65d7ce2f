"""Kernel deconvolution estimators of density, distribution and hazard rate
for weakly dependent data under additive measurement error, plus a seeded
Monte Carlo experiment harness and a small CLI.
"""

from .errors import (
    CellFailureError,
    ClassificationError,
    ConfigurationError,
    DeconvError,
    InputDataError,
    NoAnalyticTruth,
    NumericalError,
    PartialResultError,
)
from .estimators import (
    EstimatorConfig,
    HazardEstimate,
    Sample,
    cdf_estimate,
    confidence_interval,
    default_bandwidth,
    density_estimate,
    hazard_estimate,
    observed_cdf_estimate,
    observed_density_estimate,
    plugin_variance,
)
from .fourier import (
    ErrorModel,
    KernelGrid,
    SmoothKernel,
    char_fn_error,
    char_fn_kernel,
    constant_D1,
    constant_D2,
    deconv_kernel_grid,
    deconv_kernel_point,
    fan_kernel,
    limit_kernel_L,
    smoothness_params,
)
from .processes import (
    AR1,
    LogNormalMA,
    NoiseSpec,
    TruncatedMAInf,
    WeibullIID,
    contaminate,
    generate_latent,
    latent_sigma,
    read_sample,
    write_sample,
)
from .truth import TruthFunctions, classify_shape, truth_for

__version__ = "0.1.0"
