"""Exponential-sum fitting of sampled correlation parts.

Pipeline: Hankel matrix from the 2N+1 samples, con-eigenvalue (Takagi)
factorization, roots of the selected con-eigenvector polynomial, exponent
recovery from the interior roots, and amplitude least squares over all
samples. Each real-valued part (real or imaginary component of C) is
fitted separately; the combined complex series is assembled at the end.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.signal

from .errors import ConfigError, DegeneratePolynomialError, NumericalError
from .series import ExponentialSeries
from .spectral import (
    BathParameters,
    Lorentzian,
    QuadratureConfig,
    SampledCorrelation,
    SpectralDensity,
    TimeGrid,
    analytic_lorentzian_real_part,
    sample_correlation_pair,
)

__all__ = [
    "HankelOperator",
    "HankelFactorization",
    "PronyRoots",
    "RootPolicy",
    "PronyReport",
    "IllConditioningWarning",
    "build_hankel",
    "takagi_factorize",
    "candidate_roots",
    "exponents_from_roots",
    "amplitudes_least_squares",
    "fit_part",
    "fit_part_with_factorization",
    "fit_correlation",
]

logger = logging.getLogger(__name__)

ANALYTIC = "analytic"


class IllConditioningWarning(UserWarning):
    """Vandermonde system condition estimate exceeded the trust threshold."""


@dataclass(frozen=True)
class HankelOperator:
    """Implicit (N+1)x(N+1) Hankel matrix H[j,k] = phi[j+k].

    Stores only the 2N+1 defining samples; dense materialization and
    FFT-convolution matrix-vector products are both available.
    """

    phi: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        if phi.ndim != 1 or phi.size < 3 or phi.size % 2 == 0:
            raise ConfigError("a Hankel operator needs an odd number (2N+1) of samples")
        if not np.all(np.isfinite(phi)):
            raise ConfigError("Hankel samples must be finite")
        object.__setattr__(self, "phi", phi)

    @property
    def order(self) -> int:
        return (self.phi.size + 1) // 2

    def to_dense(self) -> np.ndarray:
        n = self.order
        return scipy.linalg.hankel(self.phi[:n], self.phi[n - 1:])

    def matvec(self, x: np.ndarray) -> np.ndarray:
        # (Hx)_j = sum_k phi[j+k] x_k, a correlation computable by FFT
        n = self.order
        return scipy.signal.fftconvolve(self.phi, x[::-1])[n - 1: 2 * n - 1]


@dataclass(frozen=True)
class HankelFactorization:
    """Leading con-eigenpairs of a real symmetric Hankel matrix.

    Satisfies H u_m = sigma_m * conj(u_m) columnwise with sigma_m >= 0,
    columns ordered by descending sigma and unit Euclidean norm.
    """

    order: int
    sigma: np.ndarray
    vectors: np.ndarray

    @property
    def num_pairs(self) -> int:
        return self.sigma.size


@dataclass(frozen=True)
class PronyRoots:
    all_roots: np.ndarray
    interior: np.ndarray
    boundary: np.ndarray
    exterior: np.ndarray


@dataclass(frozen=True)
class RootPolicy:
    """Thresholds controlling root selection and series cleanup."""

    boundary_tol: float = 1e-8
    prune_tol: float = 1e-8
    pair_tol: float = 1e-8
    min_magnitude: float = 1e-12


@dataclass(frozen=True)
class PronyReport:
    K_requested: int
    K_effective: int
    sample_residual: float
    sigma_tail: float
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "K_requested": self.K_requested,
            "K_effective": self.K_effective,
            "sample_residual": self.sample_residual,
            "sigma_tail": self.sigma_tail,
            "diagnostics": self.diagnostics,
        }


def build_hankel(samples) -> HankelOperator:
    """Hankel operator from a SampledCorrelation or a raw sample vector."""
    phi = getattr(samples, "samples", samples)
    return HankelOperator(np.asarray(phi, dtype=float))


def takagi_factorize(hankel: HankelOperator, num_pairs: int,
                     method: str = "auto") -> HankelFactorization:
    """Leading con-eigenpairs of the real symmetric Hankel matrix.

    For a real symmetric matrix the con-eigenvalue problem reduces to the
    ordinary symmetric eigenproblem: sigma = |lambda| with u equal to the
    eigenvector for lambda >= 0 and i times it otherwise. Ties in sigma
    keep the original eigenvalue order.

    method 'dense' diagonalizes fully; 'iterative' extracts only the
    requested leading pairs through FFT-based matrix products and is
    experimental, intended for orders in the many thousands where dense
    work is infeasible. 'auto' picks dense up to order 4096.
    """
    n = hankel.order
    if not 1 <= num_pairs <= n:
        raise ConfigError(f"num_pairs must be in 1..{n}, got {num_pairs}")
    if method not in ("auto", "dense", "iterative"):
        raise ConfigError(f"unknown factorization method {method!r}")
    if method == "auto":
        method = "dense" if n <= 4096 else "iterative"
    if method == "iterative" and num_pairs >= n:
        method = "dense"

    if method == "dense":
        lam, q = np.linalg.eigh(hankel.to_dense())
    else:
        from scipy.sparse.linalg import LinearOperator, eigsh

        op = LinearOperator((n, n), matvec=hankel.matvec, dtype=float)
        v0 = np.full(n, 1.0 / math.sqrt(n))  # fixed start keeps runs reproducible
        try:
            lam, q = eigsh(op, k=num_pairs, which="LM", v0=v0)
        except Exception as exc:  # scipy raises its own no-convergence type
            raise NumericalError(f"iterative con-eigensolver failed: {exc}") from exc

    order_idx = np.argsort(-np.abs(lam), kind="stable")[:num_pairs]
    lam = lam[order_idx]
    q = q[:, order_idx]
    vectors = q.astype(complex)
    vectors[:, lam < 0] *= 1j
    sigma = np.abs(lam)

    # con-eigen residual check on the retained columns
    h_u = hankel.to_dense() @ vectors if method == "dense" else (
        np.column_stack([hankel.matvec(vectors[:, m].real) for m in range(num_pairs)])
        + 1j * np.column_stack([hankel.matvec(vectors[:, m].imag) for m in range(num_pairs)])
    )
    scale = max(sigma[0], np.abs(hankel.phi).max(), 1e-300)
    residual = np.abs(h_u - sigma * np.conj(vectors)).max() / scale
    if residual > 1e-8:
        raise NumericalError(
            f"con-eigen residual {residual:.2e} exceeds trust threshold; "
            f"method={method}, order={n}, pairs={num_pairs}"
        )
    return HankelFactorization(order=n, sigma=sigma, vectors=vectors)


def candidate_roots(factorization: HankelFactorization, K: int,
                    policy: RootPolicy = RootPolicy()) -> PronyRoots:
    """Roots of the degree-N polynomial built from con-eigenvector K.

    The vector index is zero based in the descending-sigma order, so K
    exponentials use vector number K. Trailing (high-degree) coefficients
    below 1e-14 of the vector norm are trimmed before the companion-matrix
    root solve; expected interior count is K.
    """
    if not 0 <= K < factorization.num_pairs:
        raise ConfigError(
            f"con-eigenvector {K} not available, factorization holds "
            f"{factorization.num_pairs} pairs"
        )
    u = factorization.vectors[:, K]
    # a global phase does not move roots; reduce to real coefficients
    if np.all(u.imag == 0.0):
        coeffs = u.real
    elif np.all(u.real == 0.0):
        coeffs = u.imag
    else:
        coeffs = u

    keep = np.abs(coeffs) > 1e-14 * np.linalg.norm(coeffs)
    if not keep.any():
        raise DegeneratePolynomialError(
            "all polynomial coefficients fell below the trim threshold"
        )
    degree_end = int(np.nonzero(keep)[0][-1]) + 1
    trimmed = coeffs[:degree_end]
    try:
        roots = np.roots(trimmed[::-1])
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"companion-matrix root solve failed: {exc}") from exc

    mag = np.abs(roots)
    interior = roots[mag < 1.0 - policy.boundary_tol]
    boundary = roots[(mag >= 1.0 - policy.boundary_tol) & (mag <= 1.0 + policy.boundary_tol)]
    exterior = roots[mag > 1.0 + policy.boundary_tol]
    return PronyRoots(all_roots=roots, interior=interior,
                      boundary=boundary, exterior=exterior)


def exponents_from_roots(roots, grid: TimeGrid) -> np.ndarray:
    """Map unit-disk roots w to decay exponents.

    lambda = -(2N/t_cut) * (ln|w| + i*arg(w)) with arg in (-pi, pi], so
    Re lambda > 0 exactly when |w| < 1.
    """
    w = np.asarray(roots, dtype=complex)
    mag = np.abs(w)
    if np.any(mag == 0.0):
        raise ConfigError("root at zero maps to an infinite decay rate")
    if np.any(mag >= 1.0):
        raise ConfigError("exponent recovery requires roots inside the unit disk")
    rate = 2 * grid.N / grid.t_cut  # = 1/dt
    return -rate * (np.log(mag) + 1j * np.angle(w))


def _min_pairwise_distance(w: np.ndarray) -> float:
    if w.size < 2:
        return np.inf
    diff = np.abs(w[:, None] - w[None, :])
    np.fill_diagonal(diff, np.inf)
    return float(diff.min())


def amplitudes_least_squares(samples, roots) -> tuple[np.ndarray, float, float]:
    """Least-squares amplitudes for phi_j ~ sum_k zeta_k w_k^j.

    All 2N+1 equations enter; the solve runs through an orthogonalization
    based routine rather than normal equations. Returns (zeta, max-abs
    residual, condition estimate of the power-basis design matrix).
    """
    phi = np.asarray(getattr(samples, "samples", samples), dtype=float)
    w = np.asarray(roots, dtype=complex)
    if w.size == 0:
        return np.zeros(0, dtype=complex), float(np.abs(phi).max(initial=0.0)), 1.0
    if _min_pairwise_distance(w) <= 1e-12:
        raise ConfigError("amplitude solve requires distinct roots")
    V = np.vander(w, phi.size, increasing=True).T
    zeta, _, _, sv = np.linalg.lstsq(V, phi.astype(complex), rcond=None)
    cond = float(sv[0] / sv[-1]) if sv.size and sv[-1] > 0 else np.inf
    if cond > 1e12:
        warnings.warn(
            f"amplitude design matrix condition ~{cond:.2e}; "
            "fitted amplitudes may be unreliable",
            IllConditioningWarning,
            stacklevel=2,
        )
    residual = float(np.abs(phi - V @ zeta).max())
    return zeta, residual, cond


def _symmetrize_conjugate_roots(w: np.ndarray, pair_tol: float):
    """Snap near-real roots to the axis and average near-conjugate pairs.

    Returns (real_roots, paired_roots) where paired_roots holds one
    representative per pair with positive imaginary part. Roots without a
    conjugate partner stay as singletons in the paired list and are
    flagged by the caller.
    """
    w = np.array(w, dtype=complex)
    scale = np.maximum(np.abs(w), 1e-300)
    real_mask = np.abs(w.imag) <= pair_tol * scale
    reals = w[real_mask].real
    rest = w[~real_mask]
    used = np.zeros(rest.size, dtype=bool)
    pairs = []
    lone = []
    for i in range(rest.size):
        if used[i]:
            continue
        best_j, best_d = -1, np.inf
        for j in range(i + 1, rest.size):
            if used[j]:
                continue
            d = abs(rest[i] - np.conj(rest[j]))
            if d < best_d:
                best_j, best_d = j, d
        if best_j >= 0 and best_d <= pair_tol * max(abs(rest[i]), 1.0):
            used[i] = used[best_j] = True
            merged = 0.5 * (rest[i] + np.conj(rest[best_j]))
            pairs.append(merged if merged.imag > 0 else np.conj(merged))
        else:
            used[i] = True
            lone.append(rest[i])
    return reals, np.array(pairs, dtype=complex), np.array(lone, dtype=complex)


def _paired_least_squares(phi: np.ndarray, reals: np.ndarray, pairs: np.ndarray,
                          lone: np.ndarray):
    """Real-arithmetic amplitude solve that enforces conjugate closure.

    Real roots get one real amplitude column; each conjugate pair (w,
    conj w) contributes 2*Re(w^j) and -2*Im(w^j) columns whose real
    coefficients encode one complex amplitude shared by the pair. Lone
    complex roots (no partner) fall back to two independent columns.
    """
    n_eq = phi.size
    blocks = []
    if reals.size:
        blocks.append(np.vander(reals, n_eq, increasing=True).T)
    if pairs.size:
        pair_powers = np.vander(pairs, n_eq, increasing=True).T
        blocks.append(2.0 * pair_powers.real)
        blocks.append(-2.0 * pair_powers.imag)
    if lone.size:
        lone_powers = np.vander(lone, n_eq, increasing=True).T
        blocks.append(lone_powers.real)
        blocks.append(-lone_powers.imag)
    if not blocks:
        return (np.zeros(0, dtype=complex), np.zeros(0, dtype=complex),
                np.zeros(0, dtype=complex), float(np.abs(phi).max(initial=0.0)), 1.0)
    A = np.hstack(blocks)
    x, _, _, sv = np.linalg.lstsq(A, phi, rcond=None)
    cond = float(sv[0] / sv[-1]) if sv.size and sv[-1] > 0 else np.inf
    residual = float(np.abs(phi - A @ x).max())

    n_r, n_p, n_l = reals.size, pairs.size, lone.size
    zeta_real = x[:n_r].astype(complex)
    a = x[n_r: n_r + n_p]
    b = x[n_r + n_p: n_r + 2 * n_p]
    zeta_pair = a + 1j * b
    c = x[n_r + 2 * n_p: n_r + 2 * n_p + n_l]
    d = x[n_r + 2 * n_p + n_l:]
    zeta_lone = c + 1j * d
    return zeta_real, zeta_pair, zeta_lone, residual, cond


def fit_part(samples: SampledCorrelation, K: int,
             policy: RootPolicy = RootPolicy()) -> tuple[ExponentialSeries, PronyReport]:
    """Full exponential fit of one real-valued correlation part.

    Runs the Hankel factorization, selects con-eigenvector K, maps its
    interior polynomial roots to exponents, and solves for amplitudes in
    conjugate-closed form. Interior-root surplus is pruned by amplitude;
    deficit is reported in the diagnostics and fitted as is.
    """
    grid = samples.grid
    if K < 1:
        raise ConfigError("K must be at least 1")
    if K + 1 > grid.N + 1:
        raise ConfigError(f"K={K} needs con-eigenvector {K}, but order is {grid.N + 1}")
    factorization = takagi_factorize(build_hankel(samples.samples), K + 1)
    return fit_part_with_factorization(samples, factorization, K, policy)


def fit_part_with_factorization(
    samples: SampledCorrelation,
    factorization: HankelFactorization,
    K: int,
    policy: RootPolicy = RootPolicy(),
) -> tuple[ExponentialSeries, PronyReport]:
    """fit_part on a precomputed factorization; K+1 pairs must be available.

    Lets accuracy sweeps amortize one eigendecomposition across many K.
    """
    phi = np.asarray(samples.samples, dtype=float)
    grid = samples.grid
    if K + 1 > factorization.num_pairs:
        raise ConfigError(
            f"K={K} needs {K + 1} con-eigenpairs, factorization holds "
            f"{factorization.num_pairs}"
        )
    sigma = factorization.sigma
    sigma_tail = float(sigma[K] / sigma[0]) if sigma[0] > 0 else 0.0
    roots = candidate_roots(factorization, K, policy)

    interior = roots.interior[np.abs(roots.interior) >= policy.min_magnitude]
    diagnostics = {
        "interior": int(roots.interior.size),
        "boundary": int(roots.boundary.size),
        "exterior": int(roots.exterior.size),
        "warnings": [],
    }
    if interior.size < roots.interior.size:
        diagnostics["warnings"].append(
            f"dropped {roots.interior.size - interior.size} near-zero roots"
        )
    if interior.size < K:
        msg = f"only {interior.size} interior roots for requested K={K}"
        diagnostics["warnings"].append(msg)
        warnings.warn(msg, stacklevel=2)

    def solve(roots_now: np.ndarray):
        reals, pairs, lone = _symmetrize_conjugate_roots(roots_now, policy.pair_tol)
        if lone.size:
            diagnostics["warnings"].append(
                f"{lone.size} interior roots lack conjugate partners"
            )
        z_r, z_p, z_l, residual, cond = _paired_least_squares(phi, reals, pairs, lone)
        w_full = np.concatenate([reals.astype(complex), pairs, np.conj(pairs), lone])
        z_full = np.concatenate([z_r, z_p, np.conj(z_p), z_l])
        return w_full, z_full, residual, cond

    w_full, zeta, residual, cond = solve(interior)
    if w_full.size and np.abs(zeta).max() > 0:
        keep = np.abs(zeta) >= policy.prune_tol * np.abs(zeta).max()
        if keep.sum() < w_full.size:
            diagnostics["warnings"].append(
                f"pruned {int(w_full.size - keep.sum())} negligible amplitudes"
            )
            w_full, zeta, residual, cond = solve(w_full[keep])

    if cond > 1e12:
        diagnostics["warnings"].append(f"ill-conditioned amplitude solve, cond~{cond:.2e}")
    diagnostics["condition"] = cond

    lam = exponents_from_roots(w_full, grid) if w_full.size else np.zeros(0, complex)
    series = ExponentialSeries(zeta, lam)
    report = PronyReport(
        K_requested=K,
        K_effective=len(series),
        sample_residual=residual,
        sigma_tail=sigma_tail,
        diagnostics=diagnostics,
    )
    logger.debug("fit_part K=%d -> K_eff=%d residual=%.3e sigma_tail=%.3e",
                 K, report.K_effective, residual, sigma_tail)
    return series, report


def fit_correlation(
    J: SpectralDensity,
    bath: BathParameters,
    grid: TimeGrid,
    K_r,
    K_i: int,
    quad: QuadratureConfig = QuadratureConfig(),
    policy: RootPolicy = RootPolicy(),
) -> tuple[ExponentialSeries, PronyReport]:
    """Fit both parts of C(t) and assemble the complex series.

    K_r may be the string 'analytic', replacing the real-part fit by the
    closed-form single exponential available for the Lorentzian density.
    Real-part terms enter with eta = zeta, imaginary-part terms with
    eta = i*zeta, so the total term count is K_r + K_i. The combined
    series represents a complex-valued function; conjugate closure holds
    within each part, not for the assembled amplitude list.
    """
    real_samples, imag_samples = sample_correlation_pair(J, bath, grid, quad)

    if K_r == ANALYTIC:
        if not isinstance(J, Lorentzian):
            raise ConfigError("analytic real part requires the Lorentzian density")
        real_series = analytic_lorentzian_real_part(J)
        real_residual = float(
            np.abs(real_series.evaluate(grid.times).real - real_samples.samples).max()
        )
        real_report = PronyReport(
            K_requested=1, K_effective=1, sample_residual=real_residual,
            sigma_tail=0.0, diagnostics={"mode": "analytic"},
        )
    else:
        real_series, real_report = fit_part(real_samples, int(K_r), policy)

    imag_series, imag_report = fit_part(imag_samples, K_i, policy)

    combined = real_series.concat(imag_series.scaled(1j))
    report = PronyReport(
        K_requested=real_report.K_requested + imag_report.K_requested,
        K_effective=real_report.K_effective + imag_report.K_effective,
        sample_residual=max(real_report.sample_residual, imag_report.sample_residual),
        sigma_tail=max(real_report.sigma_tail, imag_report.sigma_tail),
        diagnostics={
            "real_part": real_report.to_dict(),
            "imag_part": imag_report.to_dict(),
        },
    )
    return combined, report
