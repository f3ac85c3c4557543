"""Heavy-tailed session traffic: exact simulation and wavelet estimation
of the memory parameter."""

__version__ = "0.1.0"

from .laws import (custom_law, lognormal_rate, pareto_law, point_rate,
                   stable_law, table_rate, two_regime_law)
from .simulate import (PathSample, Session, SessionSet, evaluate, read_events,
                       sample_grid, simulate, window_averages, write_events)
from .wavelets import (CoefficientArray, WaveletPair, computable_range,
                       continuous_coefficients, discrete_coefficients,
                       make_daubechies, make_haar, make_wavelet)
from .whittle import (ScaleSelection, build_scales, contrast, default_scales,
                      estimate_alpha, hurst_of_alpha, rate_optimal_scales)

__all__ = [
    "__version__",
    "pareto_law", "stable_law", "two_regime_law", "custom_law",
    "point_rate", "lognormal_rate", "table_rate",
    "Session", "SessionSet", "PathSample",
    "simulate", "evaluate", "sample_grid", "window_averages",
    "read_events", "write_events",
    "WaveletPair", "CoefficientArray", "make_haar", "make_daubechies",
    "make_wavelet", "computable_range", "continuous_coefficients",
    "discrete_coefficients",
    "ScaleSelection", "build_scales", "default_scales", "rate_optimal_scales",
    "contrast", "estimate_alpha", "hurst_of_alpha",
]
