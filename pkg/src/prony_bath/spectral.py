"""Spectral-density models, occupations, and the FDT correlation sampler.

The central operation turns a spectral density J(w) and bath parameters
into uniform time samples of one part of the bath correlation function

    C(t) = (1/pi) * integral dw  exp(sigma*i*w*t) J(w) f(w)

where f is the thermal occupation and sigma the sign sector.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.fft
from scipy.special import exp1, expit

from .errors import AccuracyError, ConfigError
from .series import ExponentialSeries

__all__ = [
    "Lorentzian",
    "Semicircle",
    "Tabulated",
    "Statistics",
    "Sector",
    "Part",
    "BathParameters",
    "TimeGrid",
    "QuadratureConfig",
    "SampledCorrelation",
    "density_value",
    "occupation",
    "default_omega_cutoff",
    "sample_correlation",
    "sample_correlation_pair",
    "analytic_lorentzian_real_part",
]

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# domain types

@dataclass(frozen=True)
class Lorentzian:
    """J(w) = delta * W**2 / (w**2 + W**2); even, peak value delta at w = 0."""

    delta: float
    W: float

    def __post_init__(self):
        if not (self.delta > 0 and self.W > 0):
            raise ConfigError("Lorentzian requires delta > 0 and W > 0")


@dataclass(frozen=True)
class Semicircle:
    """J(w) = delta * sqrt(1 - (w/W)**2) on [-W, W], zero outside."""

    delta: float
    W: float

    def __post_init__(self):
        if not (self.delta > 0 and self.W > 0):
            raise ConfigError("Semicircle requires delta > 0 and W > 0")


@dataclass(frozen=True)
class Tabulated:
    """Piecewise-linear J on a strictly ascending grid, zero outside its span."""

    omega_grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.omega_grid, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.size < 2 or grid.shape != vals.shape:
            raise ConfigError("tabulated density needs matched 1-d grids, >= 2 points")
        if not (np.all(np.isfinite(grid)) and np.all(np.isfinite(vals))):
            raise ConfigError("tabulated density values must be finite")
        if np.any(np.diff(grid) <= 0):
            raise ConfigError("tabulated frequency grid must be strictly ascending")
        if np.any(vals < 0):
            raise ConfigError("tabulated density values must be nonnegative")
        object.__setattr__(self, "omega_grid", grid)
        object.__setattr__(self, "values", vals)


SpectralDensity = Lorentzian | Semicircle | Tabulated


class Statistics(Enum):
    FERMIONIC = "fermionic"
    BOSONIC = "bosonic"


class Sector(Enum):
    """Sign sector of the FDT phase factor exp(sigma*i*w*t)."""

    PLUS = "plus"
    MINUS = "minus"


class Part(Enum):
    REAL = "real"
    IMAG = "imag"


@dataclass(frozen=True)
class BathParameters:
    beta: float
    statistics: Statistics = Statistics.FERMIONIC
    sector: Sector = Sector.PLUS

    def __post_init__(self):
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise ConfigError("beta must be positive and finite")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_j = j * dt, j = 0..2N, with dt = t_cut / (2N)."""

    t_cut: float
    N: int

    def __post_init__(self):
        if not (math.isfinite(self.t_cut) and self.t_cut > 0):
            raise ConfigError("t_cut must be positive and finite")
        if self.N < 1:
            raise ConfigError("N must be a positive integer")

    @property
    def dt(self) -> float:
        return self.t_cut / (2 * self.N)

    @property
    def num_samples(self) -> int:
        return 2 * self.N + 1

    @property
    def times(self) -> np.ndarray:
        # linspace keeps t_{2N} == t_cut exact
        return np.linspace(0.0, self.t_cut, self.num_samples)


@dataclass(frozen=True)
class QuadratureConfig:
    """Controls for the FDT integral evaluation.

    abs_tol is the per-sample absolute error target, enforced through
    grid-doubling convergence. omega_cut and initial_spacing override the
    built-in defaults when set.
    """

    abs_tol: float = 1e-9
    max_refinements: int = 14
    omega_cut: float | None = None
    initial_spacing: float | None = None
    chebyshev_start: int = 64

    def __post_init__(self):
        if not (self.abs_tol > 0):
            raise ConfigError("abs_tol must be positive")
        if self.max_refinements < 1:
            raise ConfigError("max_refinements must be >= 1")


@dataclass(frozen=True)
class SampledCorrelation:
    grid: TimeGrid
    part: Part
    samples: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.shape != (self.grid.num_samples,):
            raise ConfigError(
                f"expected {self.grid.num_samples} samples, got shape {samples.shape}"
            )
        if not np.all(np.isfinite(samples)):
            raise ConfigError("correlation samples must be finite")
        object.__setattr__(self, "samples", samples)


# ---------------------------------------------------------------------------
# pointwise model evaluation

def density_value(J: SpectralDensity, omega):
    """Evaluate J at a frequency or array of frequencies."""
    w = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(w)):
        raise ConfigError("frequency query must be finite")
    if isinstance(J, Lorentzian):
        out = J.delta * J.W**2 / (w**2 + J.W**2)
    elif isinstance(J, Semicircle):
        s = 1.0 - (w / J.W) ** 2
        out = J.delta * np.sqrt(np.maximum(s, 0.0))
    elif isinstance(J, Tabulated):
        out = np.interp(w, J.omega_grid, J.values, left=0.0, right=0.0)
    else:
        raise ConfigError(f"unknown spectral density {type(J).__name__}")
    return float(out) if np.ndim(omega) == 0 else out


def occupation(bath: BathParameters, omega):
    """Thermal occupation factor entering the FDT integrand.

    Fermionic: f(w) = 1/(1 + exp(beta*w)) for sector Plus and the hole
    counterpart 1 - f(w) for sector Minus. Bosonic: 1/(exp(beta*w) - 1),
    with 1 + f for sector Minus; the bosonic pole at w = 0 is rejected.
    """
    w = np.asarray(omega, dtype=float)
    x = bath.beta * w
    if bath.statistics is Statistics.FERMIONIC:
        out = expit(-x) if bath.sector is Sector.PLUS else expit(x)
    else:
        if np.any(w == 0.0):
            raise ConfigError("bosonic occupation has a pole at omega = 0")
        with np.errstate(over="ignore"):
            if bath.sector is Sector.PLUS:
                out = 1.0 / np.expm1(x)
            else:
                out = -1.0 / np.expm1(-x)
    return float(out) if np.ndim(omega) == 0 else out


def default_omega_cutoff(J: SpectralDensity, bath: BathParameters) -> float:
    """Frequency cutoff for the FDT integral.

    Compact-support densities are cut at their support edge. The Lorentzian
    window is finite-energy only; its remainder beyond the cutoff is added
    back analytically by the sampler, so the role of the 30/beta margin is
    to make the occupation indistinguishable from its asymptote there.
    """
    if isinstance(J, Semicircle):
        return J.W
    if isinstance(J, Tabulated):
        return float(max(abs(J.omega_grid[0]), abs(J.omega_grid[-1])))
    return max(50.0 * J.delta, 5.0 * J.W) + 30.0 / bath.beta


def analytic_lorentzian_real_part(J: Lorentzian) -> ExponentialSeries:
    """Closed-form one-term series for the real correlation part.

    For a fermionic bath the real part of C(t) is temperature independent
    and equals (delta*W/2) * exp(-W*t), by residue evaluation of the
    half-sum FDT integral. Realizes a single real exponential without any
    fitting.
    """
    if not isinstance(J, Lorentzian):
        raise ConfigError("analytic real part is available for the Lorentzian model only")
    return ExponentialSeries(
        np.array([0.5 * J.delta * J.W], dtype=complex),
        np.array([J.W], dtype=complex),
    )


# ---------------------------------------------------------------------------
# sampler internals

def _sector_sign(sector: Sector) -> int:
    return +1 if sector is Sector.PLUS else -1


def _occupation_asymptotes(bath: BathParameters) -> tuple[float, float]:
    """Limits of the occupation factor at w -> -inf and w -> +inf."""
    if bath.statistics is Statistics.FERMIONIC:
        return (1.0, 0.0) if bath.sector is Sector.PLUS else (0.0, 1.0)
    return (-1.0, 0.0) if bath.sector is Sector.PLUS else (0.0, 1.0)


def _e1_scaled(z: np.ndarray) -> np.ndarray:
    """exp(z) * E1(z) for complex z off the negative real axis.

    Direct evaluation below |z| = 600 (the exp factor stays representable
    there), asymptotic series beyond, which is accurate to ~1e-29 at that
    radius for any argument angle away from the cut.
    """
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < 600.0
    if small.any():
        out[small] = np.exp(z[small]) * exp1(z[small])
    big = ~small
    if big.any():
        zb = z[big]
        acc = np.ones_like(zb)
        term = np.ones_like(zb)
        for k in range(1, 16):
            term = term * (-k) / zb
            acc += term
        out[big] = acc / zb
    return out


def _lorentzian_half_tail(J: Lorentzian, omega_cut: float, sign: int, t: np.ndarray):
    """integral_{omega_cut}^{inf} exp(sign*i*w*t) J(w) dw for t >= 0."""
    out = np.empty(t.shape, dtype=complex)
    at_zero = t == 0.0
    if at_zero.any():
        out[at_zero] = J.delta * J.W * (np.pi / 2 - np.arctan(omega_cut / J.W))
    pos = ~at_zero
    if pos.any():
        tp = t[pos]
        # partial fractions over the poles +-iW; the phase exp(sign*i*a*t)
        # combines with the E1 scaling into a pure oscillation exp(sign*i*cut*t)
        z_plus = -1j * sign * tp * (omega_cut - 1j * J.W)
        z_minus = -1j * sign * tp * (omega_cut + 1j * J.W)
        phase = np.exp(1j * sign * omega_cut * tp)
        out[pos] = (
            J.delta * J.W / 2j * phase * (_e1_scaled(z_plus) - _e1_scaled(z_minus))
        )
    return out


def _dft_time_samples(coeffs: np.ndarray, m_lo: int, L: int, sign: int, n_out: int):
    """sum_m coeffs[m] * exp(sign * 2*pi*i * (m_lo + m) * j / L) for j < n_out.

    Frequency indices are folded modulo L; congruent indices contribute to
    the same time harmonic, which is exact, not an approximation.
    """
    b = np.zeros(L, dtype=complex)
    idx = (m_lo + np.arange(coeffs.size)) % L
    if coeffs.size <= L:
        b[idx] = coeffs
    else:
        np.add.at(b, idx, coeffs)
    if sign > 0:
        full = scipy.fft.ifft(b)
        full *= L
    else:
        full = scipy.fft.fft(b)
    return full[:n_out]


def _tabulated_edge_corrections(J: Tabulated, bath, sign: int, spacing: float,
                                t: np.ndarray) -> np.ndarray:
    """Repair the trapezoid sum at the support edges of a tabulated density.

    The integrand drops to zero outside the tabulated span. When that jump
    falls between grid nodes the plain trapezoid sum is only first-order
    accurate, so the half panel beyond the last interior node is removed
    and the true partial panel up to the edge is added back.
    """
    def g_at(w: float) -> float:
        v = density_value(J, w)
        return 0.0 if v == 0.0 else v * occupation(bath, w)

    corr = np.zeros(t.size, dtype=complex)
    for edge, inward in ((float(J.omega_grid[0]), +1), (float(J.omega_grid[-1]), -1)):
        # last node on the support side of the edge
        node = (math.floor(edge / spacing) if inward < 0 else math.ceil(edge / spacing))
        node_omega = node * spacing
        r = abs(edge - node_omega)
        g_node = g_at(node_omega)
        edge_value = float(J.values[0] if inward > 0 else J.values[-1])
        g_edge = 0.0 if edge_value == 0.0 else edge_value * occupation(bath, edge)
        phase_node = np.exp(1j * sign * node_omega * t)
        phase_edge = np.exp(1j * sign * edge * t)
        corr += (0.5 * r * g_node - 0.5 * spacing * g_node) * phase_node
        corr += 0.5 * r * g_edge * phase_edge
    return corr


def _fdt_integrand(J, bath, omega: np.ndarray, spacing: float) -> np.ndarray:
    g_omega = omega
    if bath.statistics is Statistics.BOSONIC and np.any(omega == 0.0):
        # J(0) = 0 is a precondition; fill the removable singularity by limit
        eps = spacing * 1e-6
        g_omega = np.where(omega == 0.0, eps, omega)
        left = density_value(J, -eps) * occupation(bath, -eps)
        right = density_value(J, eps) * occupation(bath, eps)
        base = density_value(J, g_omega) * occupation(bath, g_omega)
        return np.where(omega == 0.0, 0.5 * (left + right), base)
    return density_value(J, omega) * occupation(bath, omega)


def _sample_uniform_fft(J, bath, grid: TimeGrid, quad: QuadratureConfig):
    """Trapezoid evaluation of the FDT integral on a uniform frequency grid.

    All 2N+1 time samples come from one FFT per refinement level. Levels
    double the grid density with the window endpoints held fixed, so the
    trapezoid error expands in even powers of the spacing and a short
    Romberg table accelerates the ladder; the interior error of the
    trapezoid rule on an analytic integrand dies exponentially once the
    spacing resolves the occupation's pole strip.
    """
    dt = grid.dt
    n_out = grid.num_samples
    sign = _sector_sign(bath.sector)
    omega_cut = quad.omega_cut or default_omega_cutoff(J, bath)

    if isinstance(J, Lorentzian):
        scale = J.delta
    elif isinstance(J, Tabulated):
        scale = (J.omega_grid[-1] - J.omega_grid[0]) / 100.0
    else:
        scale = J.W
    spacing0 = quad.initial_spacing or min(np.pi / (4.0 * grid.t_cut), scale / 50.0)

    L0 = scipy.fft.next_fast_len(max(math.ceil(2 * np.pi / (spacing0 * dt)), n_out))
    spacing0 = 2 * np.pi / (L0 * dt)
    h0 = math.ceil(omega_cut / spacing0)
    omega_eff = h0 * spacing0

    use_romberg = isinstance(J, Lorentzian)  # tabulated kinks break the expansion
    rows: list[np.ndarray] = []  # Romberg columns 0..2, latest entries only
    best_prev = None
    for level in range(quad.max_refinements):
        L = L0 << level
        h = h0 << level
        spacing = 2 * np.pi / (L * dt)
        omega = np.arange(-h, h + 1) * spacing
        coeffs = _fdt_integrand(J, bath, omega, spacing) * spacing
        coeffs[0] *= 0.5
        coeffs[-1] *= 0.5
        s = _dft_time_samples(coeffs, -h, L, sign, n_out)
        if isinstance(J, Tabulated):
            s = s + _tabulated_edge_corrections(J, bath, sign, spacing, grid.times)
        if use_romberg:
            new_rows = [s]
            for j in range(min(level, 2)):
                f = 4.0 ** (j + 1)
                new_rows.append((f * new_rows[j] - rows[j]) / (f - 1.0))
            rows = new_rows
            best = rows[-1]
        else:
            best = s
        if best_prev is not None and best_prev.size == best.size:
            change = float(np.abs(best - best_prev).max())
            logger.debug("fdt fft level %d: L=%d change=%.3e", level, L, change)
            if change < quad.abs_tol:
                prov = (
                    f"fdt-fft(levels={level + 1}, L={L}, "
                    f"omega_cut={omega_eff!r}, romberg={use_romberg})"
                )
                return best / np.pi, omega_eff, prov
        best_prev = best
    raise AccuracyError(
        "FDT quadrature did not converge to abs_tol="
        f"{quad.abs_tol:g} within {quad.max_refinements} refinements "
        f"(last change {change:.3e})",
        estimate=change,
    )


def _sample_chebyshev(J: Semicircle, bath, grid: TimeGrid, quad: QuadratureConfig):
    """Gauss-Chebyshev (second kind) evaluation for the semicircle density.

    The quadrature weight absorbs the square-root band edges exactly, which
    a uniform grid cannot do at any useful resolution.
    """
    t = grid.times
    sign = _sector_sign(bath.sector)
    prev = None
    n = max(8, quad.chebyshev_start)
    for level in range(quad.max_refinements):
        theta = np.arange(1, n + 1) * (np.pi / (n + 1))
        x = np.cos(theta)
        wgt = (np.pi / (n + 1)) * np.sin(theta) ** 2
        occ = occupation(bath, J.W * x)
        s = np.zeros(t.size, dtype=complex)
        for lo in range(0, n, 4096):
            hi = min(lo + 4096, n)
            phase = np.exp((1j * sign * J.W) * np.outer(x[lo:hi], t))
            s += (wgt[lo:hi] * occ[lo:hi]) @ phase
        s *= J.delta * J.W / np.pi
        if prev is not None:
            change = float(np.abs(s - prev).max())
            logger.debug("fdt chebyshev level %d: n=%d change=%.3e", level, n, change)
            if change < quad.abs_tol:
                return s, f"fdt-chebyshev(levels={level + 1}, nodes={n})"
        prev = s
        n *= 2
    raise AccuracyError(
        f"semicircle quadrature did not converge (last change {change:.3e}); "
        "sharp occupation features need more node doublings than allowed",
        estimate=change,
    )


def _sample_complex(J, bath, grid, quad):
    if isinstance(J, Semicircle):
        return _sample_chebyshev(J, bath, grid, quad)
    values, omega_eff, prov = _sample_uniform_fft(J, bath, grid, quad)
    if isinstance(J, Lorentzian):
        # remainder of the infinite window, with the occupation replaced by
        # its asymptote on each side (error ~ exp(-beta*omega_cut) there)
        sign = _sector_sign(bath.sector)
        left, right = _occupation_asymptotes(bath)
        t = grid.times
        tail = np.zeros(t.size, dtype=complex)
        if left != 0.0:
            tail += left * _lorentzian_half_tail(J, omega_eff, -sign, t)
        if right != 0.0:
            tail += right * _lorentzian_half_tail(J, omega_eff, +sign, t)
        values = values + tail / np.pi
        prov += "+analytic-tail"
    return values, prov


# ---------------------------------------------------------------------------
# public sampling API

def sample_correlation_pair(
    J: SpectralDensity,
    bath: BathParameters,
    grid: TimeGrid,
    quad: QuadratureConfig = QuadratureConfig(),
) -> tuple[SampledCorrelation, SampledCorrelation]:
    """Sample both parts of C(t) from a single quadrature pass."""
    if isinstance(J, (Lorentzian, Semicircle)) and bath.statistics is Statistics.BOSONIC:
        raise ConfigError(
            "bosonic sampling requires a density vanishing at omega = 0; "
            "use a tabulated density with J(0) = 0"
        )
    values, prov = _sample_complex(J, bath, grid, quad)
    return (
        SampledCorrelation(grid, Part.REAL, values.real, prov),
        SampledCorrelation(grid, Part.IMAG, values.imag, prov),
    )


def sample_correlation(
    J: SpectralDensity,
    bath: BathParameters,
    grid: TimeGrid,
    part: Part,
    quad: QuadratureConfig = QuadratureConfig(),
) -> SampledCorrelation:
    """Uniform time samples of one part of the FDT correlation function.

    Every sample carries an absolute quadrature error at most quad.abs_tol,
    enforced by doubling the frequency resolution until the whole sample
    vector moves by less than that tolerance.
    """
    pair = sample_correlation_pair(J, bath, grid, quad)
    return pair[0] if part is Part.REAL else pair[1]
