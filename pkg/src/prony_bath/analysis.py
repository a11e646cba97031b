"""Frequency-domain diagnostics, accuracy sweeps, and the hierarchy cost model.

The spectrum of a decaying exponential series, the relative integrated
spectrum error used to score fits, method-versus-method accuracy sweeps,
and the exact auxiliary-density-operator count that turns term counts into
memory/compute cost.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AccuracyError, ConfigError
from .prony import (
    RootPolicy,
    build_hankel,
    fit_part_with_factorization,
    takagi_factorize,
)
from .psd import psd_correlation_series
from .series import ExponentialSeries
from .spectral import (
    BathParameters,
    Lorentzian,
    QuadratureConfig,
    Sector,
    SpectralDensity,
    TimeGrid,
    analytic_lorentzian_real_part,
    default_omega_cutoff,
    density_value,
    occupation,
    sample_correlation_pair,
)

__all__ = [
    "SpectrumCurve",
    "ErrorGridPolicy",
    "ErrorReport",
    "SweepEntry",
    "SweepTable",
    "CostEstimate",
    "series_spectrum",
    "exact_spectrum",
    "spectrum_curve",
    "fit_error",
    "sweep_accuracy",
    "matched_term_ratio",
    "ado_count",
    "cost_estimate",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpectrumCurve:
    omega_grid: np.ndarray
    exact: np.ndarray
    fitted: np.ndarray

    def __post_init__(self):
        om = np.asarray(self.omega_grid, dtype=float)
        ex = np.asarray(self.exact, dtype=float)
        ft = np.asarray(self.fitted, dtype=float)
        if not (om.shape == ex.shape == ft.shape) or om.ndim != 1:
            raise ConfigError("spectrum curve arrays must share one 1-d shape")
        if np.any(np.diff(om) <= 0):
            raise ConfigError("spectrum grid must be strictly ascending")
        if not (np.all(np.isfinite(ex)) and np.all(np.isfinite(ft))):
            raise ConfigError("spectrum values must be finite")
        object.__setattr__(self, "omega_grid", om)
        object.__setattr__(self, "exact", ex)
        object.__setattr__(self, "fitted", ft)


@dataclass(frozen=True)
class ErrorGridPolicy:
    """Composite omega grid: log-dense near zero, linear out to omega_max.

    omega_max None defers to the sampler's density cutoff. Refinement
    doubles the point count until the error value moves less than rel_tol.
    """

    omega_max: float | None = None
    omega_min_factor: float = 1e-6
    log_points: int = 400
    linear_points: int = 2000
    rel_tol: float = 1e-2
    max_refinements: int = 6


@dataclass(frozen=True)
class ErrorReport:
    error: float
    numerator: float
    denominator: float
    grid_spec: str
    argmax_omega: float
    max_abs_diff: float
    refinements: int

    def to_dict(self) -> dict:
        return {
            "error": self.error,
            "numerator": self.numerator,
            "denominator": self.denominator,
            "grid_spec": self.grid_spec,
            "argmax_omega": self.argmax_omega,
            "max_abs_diff": self.max_abs_diff,
            "refinements": self.refinements,
        }


@dataclass(frozen=True)
class SweepEntry:
    method: str
    terms: int
    error: float
    detail: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SweepTable:
    bath: BathParameters
    entries: tuple

    def rows(self, method: str | None = None) -> list:
        rows = [e for e in self.entries if method is None or e.method == method]
        return sorted(rows, key=lambda e: (e.method, e.terms))


@dataclass(frozen=True)
class CostEstimate:
    K: int
    N_alpha: int
    N_u: int
    L: int
    K_tilde: int
    n_ado: int


def _canonical_terms(series: ExponentialSeries):
    """Fixed summation order so the spectrum is bitwise reorder-invariant."""
    order = np.lexsort((series.eta.imag, series.eta.real,
                        series.gamma.imag, series.gamma.real))
    return series.eta[order], series.gamma[order]


def _spectrum_sum(series: ExponentialSeries, omega):
    eta, gamma = _canonical_terms(series)
    om = np.asarray(omega, dtype=float)
    return np.sum(eta / (gamma + 1j * om[..., None]), axis=-1)


def series_spectrum(series: ExponentialSeries, omega):
    """Spectrum of the hermitian extension of the series.

    C(-t) = conj(C(t)) closes the transform in terms of the exponents:
    C(omega) = Re sum_k eta_k / (gamma_k + i*omega).
    """
    out = np.real(_spectrum_sum(series, omega))
    return out if out.ndim else float(out)


def spectrum_imag_defect(series: ExponentialSeries, omega) -> float:
    """Violation of the reflection symmetry h(omega) = conj(h(-omega)).

    h is the half-line transform sum_k eta_k/(gamma_k + i*omega). A real
    signal, i.e. a conjugate-paired series, satisfies the identity exactly;
    the returned maximum is the imaginary residue the Re projection in
    series_spectrum would otherwise hide.
    """
    om = np.asarray(omega, dtype=float)
    forward = _spectrum_sum(series, om)
    mirrored = np.conj(_spectrum_sum(series, -om))
    return float(np.abs(forward - mirrored).max())


def exact_spectrum(J: SpectralDensity, bath: BathParameters, omega):
    """Closed-form spectrum J(omega)*f(omega) implied by the FDT.

    The minus sector satisfies C(omega) = C_plus(-omega); its occupation
    factor is already the hole occupation, so only the density argument
    flips sign.
    """
    om = np.asarray(omega, dtype=float)
    density_arg = -om if bath.sector == Sector.MINUS else om
    out = density_value(J, density_arg) * occupation(bath, om)
    return out if np.ndim(omega) else float(out)


def _composite_grid(bath: BathParameters, omega_max: float,
                    n_log: int, n_lin: int) -> np.ndarray:
    """Symmetric +-omega grid, log-spaced inside |omega| <= 1, linear beyond.

    Zero itself is excluded (bosonic occupations diverge there); the
    omitted sliver |omega| < 1e-6/beta contributes nothing at trapezoid
    accuracy.
    """
    w_min = 1e-6 / bath.beta
    knee = min(1.0, omega_max / 2)
    half_log = np.geomspace(w_min, knee, n_log)
    if omega_max > knee:
        half_lin = np.linspace(knee, omega_max, n_lin)[1:]
        half = np.concatenate([half_log, half_lin])
    else:
        half = half_log
    return np.concatenate([-half[::-1], half])


def fit_error(series: ExponentialSeries, J: SpectralDensity, bath: BathParameters,
              policy: ErrorGridPolicy = ErrorGridPolicy(),
              exact_fn=None) -> ErrorReport:
    """Relative integrated spectrum error of a fitted series.

    Error = integral |C_fit - C_exact| domega / integral |C_exact| domega
    on the composite grid, refined by doubling until the value is stable
    to policy.rel_tol. exact_fn replaces the closed-form spectrum as the
    reference when comparing against something other than J*f.
    """
    omega_max = policy.omega_max
    if omega_max is None:
        omega_max = default_omega_cutoff(J, bath)
    if omega_max <= 0:
        raise ConfigError("error grid needs a positive omega_max")

    previous = None
    for level in range(policy.max_refinements + 1):
        n_log = policy.log_points << level
        n_lin = policy.linear_points << level
        w = _composite_grid(bath, omega_max, n_log, n_lin)
        if exact_fn is None:
            exact = exact_spectrum(J, bath, w)
        else:
            exact = np.asarray(exact_fn(w), dtype=float)
        fitted = series_spectrum(series, w)
        diff = np.abs(fitted - exact)
        numerator = float(np.trapezoid(diff, w))
        denominator = float(np.trapezoid(np.abs(exact), w))
        if denominator == 0.0:
            raise ConfigError("exact spectrum vanishes on the whole grid")
        error = numerator / denominator
        i_max = int(np.argmax(diff))
        if previous is not None:
            scale = max(abs(error), abs(previous), 1e-300)
            if abs(error - previous) <= policy.rel_tol * scale:
                return ErrorReport(
                    error=error,
                    numerator=numerator,
                    denominator=denominator,
                    grid_spec=(
                        f"symmetric log({1e-6 / bath.beta:.1e}..1)x{n_log}"
                        f"+linear(..{omega_max:g})x{n_lin}"
                    ),
                    argmax_omega=float(w[i_max]),
                    max_abs_diff=float(diff[i_max]),
                    refinements=level,
                )
        previous = error
    raise AccuracyError(
        f"error metric failed to converge to {policy.rel_tol:.0e} "
        f"after {policy.max_refinements} grid doublings",
        estimate=previous,
    )


def spectrum_curve(series: ExponentialSeries, J: SpectralDensity,
                   bath: BathParameters, omega_grid) -> SpectrumCurve:
    om = np.asarray(omega_grid, dtype=float)
    return SpectrumCurve(
        omega_grid=om,
        exact=np.asarray(exact_spectrum(J, bath, om), dtype=float),
        fitted=np.asarray(series_spectrum(series, om), dtype=float),
    )


def sweep_accuracy(
    J: SpectralDensity,
    bath: BathParameters,
    grid: TimeGrid,
    pfd_imag_counts,
    psd_orders,
    quad: QuadratureConfig = QuadratureConfig(),
    error_policy: ErrorGridPolicy = ErrorGridPolicy(),
    root_policy: RootPolicy = RootPolicy(),
) -> SweepTable:
    """Error-versus-terms table for the Prony fit and the sum-over-poles baseline.

    For the Lorentzian density the real part is the analytic single term,
    so a Prony entry with K_i imaginary-part exponentials carries
    K_i + 1 total terms; a pole entry of order P carries P + 1. One sample
    pass and one Hankel factorization are shared across all K_i.
    """
    pfd_imag_counts = sorted(set(int(k) for k in pfd_imag_counts))
    psd_orders = sorted(set(int(p) for p in psd_orders))
    if pfd_imag_counts and pfd_imag_counts[0] < 1:
        raise ConfigError("Prony sweep needs K_i >= 1")
    if psd_orders and psd_orders[0] < 1:
        raise ConfigError("pole sweep needs P >= 1")
    if not isinstance(J, Lorentzian):
        raise ConfigError("the accuracy sweep is defined for the Lorentzian density")

    entries = []
    if pfd_imag_counts:
        real_series = analytic_lorentzian_real_part(J)
        _, imag_samples = sample_correlation_pair(J, bath, grid, quad)
        factorization = takagi_factorize(
            build_hankel(imag_samples.samples), max(pfd_imag_counts) + 1
        )
        for K_i in pfd_imag_counts:
            imag_series, report = fit_part_with_factorization(
                imag_samples, factorization, K_i, root_policy
            )
            combined = real_series.concat(imag_series.scaled(1j))
            err = fit_error(combined, J, bath, error_policy)
            entries.append(SweepEntry(
                method="pfd",
                terms=1 + report.K_effective,
                error=err.error,
                detail={"K_i": K_i, "K_effective": report.K_effective,
                        "sample_residual": report.sample_residual,
                        "argmax_omega": err.argmax_omega},
            ))
            logger.debug("sweep pfd K_i=%d error=%.3e", K_i, err.error)

    for P in psd_orders:
        series = psd_correlation_series(J, bath, P)
        err = fit_error(series, J, bath, error_policy)
        entries.append(SweepEntry(
            method="psd",
            terms=P + 1,
            error=err.error,
            detail={"P": P, "argmax_omega": err.argmax_omega},
        ))
        logger.debug("sweep psd P=%d error=%.3e", P, err.error)

    return SweepTable(bath=bath, entries=tuple(entries))


def matched_term_ratio(table: SweepTable, pfd_terms: int) -> dict:
    """Terms the pole baseline needs to match a Prony anchor's error.

    Returns the anchor row, the first baseline row at or below the anchor
    error, and their term ratio; ratio is None when the baseline never
    reaches the target within the sweep.
    """
    pfd_rows = table.rows("pfd")
    anchor = next((e for e in pfd_rows if e.terms == pfd_terms), None)
    if anchor is None:
        raise ConfigError(f"no Prony sweep entry with {pfd_terms} terms")
    target = anchor.error
    matched = None
    for row in table.rows("psd"):
        if row.error <= target:
            matched = row
            break
    return {
        "pfd_terms": anchor.terms,
        "pfd_error": anchor.error,
        "psd_terms": matched.terms if matched else None,
        "psd_error": matched.error if matched else None,
        "ratio": (matched.terms / anchor.terms) if matched else None,
    }


def ado_count(K: int, N_alpha: int, N_u: int, L: int) -> int:
    """Number of auxiliary density operators at truncation tier L.

    K_tilde = 2 * N_alpha * N_u * K exponentials (particles plus holes);
    the count is sum_{l=1}^{L} C(K_tilde, l), exact integer arithmetic.
    """
    for name, v in (("K", K), ("N_alpha", N_alpha), ("N_u", N_u), ("L", L)):
        if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
            raise ConfigError(f"{name} must be a positive integer, got {v!r}")
    k_tilde = 2 * int(N_alpha) * int(N_u) * int(K)
    tier_cap = min(int(L), k_tilde)
    return sum(math.comb(k_tilde, l) for l in range(1, tier_cap + 1))


def cost_estimate(K: int, N_alpha: int, N_u: int, L: int) -> CostEstimate:
    n = ado_count(K, N_alpha, N_u, L)
    return CostEstimate(
        K=int(K), N_alpha=int(N_alpha), N_u=int(N_u), L=int(L),
        K_tilde=2 * int(N_alpha) * int(N_u) * int(K), n_ado=n,
    )
