"""Sum-over-poles expansion of thermal occupation functions.

Rational [P-1/P] approximants to the Fermi and Bose functions, built from
small symmetric tridiagonal eigenproblems, plus the closed-form exponential
correlation series they induce for the Lorentzian density via contour
integration. Serves as the calibration baseline for the Prony fits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigError, NumericalError, UnsupportedDensityError
from .series import ExponentialSeries
from .spectral import BathParameters, Lorentzian, Sector, SpectralDensity, Statistics

__all__ = [
    "PadePoles",
    "pade_poles",
    "occupation_approx",
    "psd_correlation_series",
]


@dataclass(frozen=True)
class PadePoles:
    """Pole pairs of the occupation approximant in the scaled variable x = beta*omega.

    The approximant is f_P(x) = 1/2 - sum_j 2*eta_j*x/(x^2 + xi_j^2)
    (fermionic) or the bosonic analogue with a 1/x principal term. Poles
    sit at x = +-i*xi_j; xi ascending, all weights positive.
    """

    order: int
    xi: np.ndarray
    eta: np.ndarray
    statistics: Statistics

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        eta = np.asarray(self.eta, dtype=float)
        if xi.shape != (self.order,) or eta.shape != (self.order,):
            raise ConfigError("pole and weight arrays must both have length P")
        if np.any(xi <= 0) or np.any(np.diff(xi) <= 0):
            raise NumericalError("poles must be positive and ascending")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "eta", eta)


def _tridiag_eigenvalues(diag_free_size: int, base_offset: int) -> np.ndarray:
    """Eigenvalues of the symmetric tridiagonal with A[m,m+1] = 1/sqrt(b_m b_{m+1}),
    b_m = 2(m + base_offset) - 1 for m = 1..size."""
    m = np.arange(1, diag_free_size)
    b = 2 * (np.arange(1, diag_free_size + 1) + base_offset) - 1
    off = 1.0 / np.sqrt(b[:-1] * b[1:])
    return scipy.linalg.eigh_tridiagonal(
        np.zeros(diag_free_size), off, eigvals_only=True
    )


def pade_poles(statistics: Statistics, P: int) -> PadePoles:
    """Pole/weight construction for the [P-1/P] occupation approximant.

    Poles: xi_j = 2/e_j with e_j the positive eigenvalues of the 2P x 2P
    coupling matrix (fermionic base 2m-1, bosonic base 2m+1). Zeros chi_j
    come from the same construction at size 2P-1 with the base shifted by
    one. Weights follow from the residue product formula, accumulated in
    log space because the raw products overflow past P ~ 15.
    """
    if P < 1:
        raise ConfigError("P must be at least 1")
    if statistics == Statistics.FERMIONIC:
        base, prefactor = 0, P * (2 * P + 1) / 2.0
    else:
        base, prefactor = 1, P * (2 * P + 3) / 2.0

    eig_poles = _tridiag_eigenvalues(2 * P, base)
    pos = np.sort(eig_poles[eig_poles > 0])[::-1]
    if pos.size != P:
        raise NumericalError(f"expected {P} positive pole eigenvalues, got {pos.size}")
    xi = 2.0 / pos  # ascending because eigenvalues were descending

    if P > 1:
        eig_zeros = _tridiag_eigenvalues(2 * P - 1, base + 1)
        zpos = np.sort(eig_zeros[eig_zeros > 1e-14])
        if zpos.size != P - 1:
            raise NumericalError(
                f"expected {P - 1} positive zero eigenvalues, got {zpos.size}"
            )
        chi = np.sort(2.0 / zpos)
    else:
        chi = np.zeros(0)

    # eta_j = prefactor * prod_k (chi_k^2 - xi_j^2) / prod_{k != j} (xi_k^2 - xi_j^2)
    xi2 = xi**2
    chi2 = chi**2
    eta = np.empty(P)
    for j in range(P):
        num = chi2 - xi2[j]
        den = np.delete(xi2, j) - xi2[j]
        sign = np.prod(np.sign(num)) * np.prod(np.sign(den))
        log_mag = np.sum(np.log(np.abs(num))) - np.sum(np.log(np.abs(den)))
        eta[j] = prefactor * sign * np.exp(log_mag)
    return PadePoles(order=P, xi=xi, eta=eta, statistics=statistics)


def occupation_approx(poles: PadePoles, x) -> np.ndarray:
    """Evaluate the sum-over-poles occupation at scaled frequency x = beta*omega."""
    x = np.asarray(x, dtype=float)
    terms = np.sum(
        2.0 * poles.eta * x[..., None] / (x[..., None] ** 2 + poles.xi**2),
        axis=-1,
    )
    if poles.statistics == Statistics.FERMIONIC:
        return 0.5 - terms
    # bosonic form 1/x - 1/2 + sum, so that f(x) + f(-x) = -1 like the
    # exact Bose function
    with np.errstate(divide="ignore"):
        principal = 1.0 / x
    return principal - 0.5 + terms


def psd_correlation_series(J: SpectralDensity, bath: BathParameters,
                           P: int) -> ExponentialSeries:
    """Closed-form exponential series for the Lorentzian fermionic correlation.

    Closing the transform contour in the upper half plane picks up the
    J pole at omega = iW and the P approximant poles at omega = i*xi_j/beta,
    giving P+1 exponentials in total. Densities without a rational
    continuation (semicircle, tabulated) have no such contour form.
    """
    if not isinstance(J, Lorentzian):
        raise UnsupportedDensityError(
            "sum-over-poles correlation series needs a rational density; "
            f"got {type(J).__name__}"
        )
    if bath.statistics != Statistics.FERMIONIC:
        raise UnsupportedDensityError(
            "sum-over-poles correlation series implemented for fermionic baths"
        )
    poles = pade_poles(bath.statistics, P)
    beta, W, delta = bath.beta, J.W, J.delta
    bw = beta * W
    gap = np.abs(poles.xi - bw).min() if P else np.inf
    if gap < 1e-8 * bw:
        raise NumericalError(
            "an occupation pole collides with the density pole; "
            "perturb beta*W or change P"
        )

    # residue at the density pole omega = iW needs the approximant there:
    # f_P(ix) = 1/2 - sum 2 eta_j (ix)/((ix)^2+xi^2) = 1/2 - i sum 2 eta_j x/(xi^2-x^2)
    f_upper = 0.5 - 1j * np.sum(2.0 * poles.eta * bw / (poles.xi**2 - bw**2))
    eta_list = [delta * W * f_upper]
    gamma_list = [complex(W)]

    # residues at occupation poles omega = i*xi_j/beta
    for xi_j, eta_j in zip(poles.xi, poles.eta):
        gamma = xi_j / beta
        eta_list.append(2j * eta_j * delta * W**2 * beta / (xi_j**2 - bw**2))
        gamma_list.append(complex(gamma))

    sign = 1.0 if bath.sector == Sector.PLUS else -1.0
    eta_arr = np.asarray(eta_list, dtype=complex)
    if sign < 0:
        # opposite phase sector: imaginary part flips, real part unchanged
        eta_arr = np.conj(eta_arr)
    return ExponentialSeries(eta_arr, np.asarray(gamma_list, dtype=complex))
