"""Exponential-series decomposition of quantum bath correlation functions.

Fits uniformly sampled bath correlation functions to short sums of decaying
complex exponentials through a Hankel con-eigenvalue analysis, with a
rational sum-over-poles baseline, frequency-domain error metrics, and a
hierarchy cost model.
"""

from .analysis import (
    CostEstimate,
    ErrorGridPolicy,
    ErrorReport,
    SpectrumCurve,
    SweepEntry,
    SweepTable,
    ado_count,
    cost_estimate,
    exact_spectrum,
    fit_error,
    matched_term_ratio,
    series_spectrum,
    spectrum_curve,
    sweep_accuracy,
)
from .errors import (
    AccuracyError,
    ConfigError,
    DegeneratePolynomialError,
    NumericalError,
    PronyBathError,
    UnsupportedDensityError,
)
from .prony import (
    HankelFactorization,
    HankelOperator,
    IllConditioningWarning,
    PronyReport,
    PronyRoots,
    RootPolicy,
    amplitudes_least_squares,
    build_hankel,
    candidate_roots,
    exponents_from_roots,
    fit_correlation,
    fit_part,
    fit_part_with_factorization,
    takagi_factorize,
)
from .psd import PadePoles, occupation_approx, pade_poles, psd_correlation_series
from .series import ExponentialSeries, conjugate_pairing_defect
from .spectral import (
    BathParameters,
    Lorentzian,
    Part,
    QuadratureConfig,
    SampledCorrelation,
    Sector,
    Semicircle,
    SpectralDensity,
    Statistics,
    Tabulated,
    TimeGrid,
    analytic_lorentzian_real_part,
    default_omega_cutoff,
    density_value,
    occupation,
    sample_correlation,
    sample_correlation_pair,
)

__version__ = "0.1.0"
