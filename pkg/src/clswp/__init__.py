"""Evolutionary wavelet spectra of irregularly sampled locally stationary series.

The pipeline runs from a continuous wavelet transform on an arbitrary
sampling grid, through the raw wavelet periodogram and its shrinkage
smoothing, to a non-negative spectrum estimate obtained by iterative
soft-thresholding, and finally to local autocovariances.
"""
__version__ = "0.1.0"

from .acv import (AcvField, default_lags, local_autocorrelation, local_autocovariance,
                  local_autocovariance_fn, local_variance, standard_autocovariance)
from .errors import (ClswpError, ConfigError, DataError, DomainError, QuadratureError,
                     UsageError)
from .fields import LocationGrid, Role, ScaleGrid, ScaleTimeField
from .invert import (IstaConfig, IstaReport, estimate_mu, forward_map, ista_estimate,
                     mercer_invert, parse_schedule, resolve_schedule)
from .io import ingest_csv, read_field, read_series, write_field, write_series
from .kernels import (KernelMatrix, WaveletKind, acw, acw_numeric, ipk, ipk_numeric,
                      kernel_matrix, psi)
from .pipeline import PipelineConfig, run_pipeline
from .shrink import DwtCoefficients, ShrinkConfig, dwt, idwt, mad_sigma, smooth_periodogram
from .simulate import (SimConfig, SpectrumSpec, builtin_spectrum, simulate_clswp,
                       simulate_haar_ma, simulate_white_noise)
from .transform import (BoundaryRule, TimeSeries, average_periodograms, cwt, mean_periodogram,
                        raw_periodogram)
