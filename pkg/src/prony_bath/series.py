"""Exponential series container shared by the fitting and baseline modules."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

__all__ = ["ExponentialSeries", "conjugate_pairing_defect"]


@dataclass(frozen=True)
class ExponentialSeries:
    """Finite sum of decaying complex exponentials.

    Represents ``C(t) = sum_k eta[k] * exp(-gamma[k] * t)`` for ``t >= 0``.
    Every exponent must decay, i.e. ``Re gamma[k] > 0``.

    Parameters
    ----------
    eta : array_like of complex
        Term amplitudes.
    gamma : array_like of complex
        Term exponents, one per amplitude.
    """

    eta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        eta = np.atleast_1d(np.asarray(self.eta, dtype=complex))
        gamma = np.atleast_1d(np.asarray(self.gamma, dtype=complex))
        if eta.shape != gamma.shape or eta.ndim != 1:
            raise ConfigError(
                f"amplitudes and exponents must be 1-d and matched, "
                f"got {eta.shape} and {gamma.shape}"
            )
        if not (np.all(np.isfinite(eta)) and np.all(np.isfinite(gamma))):
            raise ConfigError("series terms must be finite")
        if eta.size and np.any(gamma.real <= 0):
            worst = gamma.real.min()
            raise ConfigError(f"every exponent must decay, found Re gamma = {worst}")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "gamma", gamma)

    def __len__(self) -> int:
        return self.eta.size

    def evaluate(self, t) -> np.ndarray:
        """Evaluate the series at times ``t >= 0`` (scalar or array)."""
        t = np.asarray(t, dtype=float)
        if self.eta.size == 0:
            return np.zeros(t.shape, dtype=complex)
        # outer product over terms, summed; fine for the K values in use here
        return np.exp(-np.multiply.outer(t, self.gamma)) @ self.eta

    def concat(self, other: "ExponentialSeries") -> "ExponentialSeries":
        return ExponentialSeries(
            np.concatenate([self.eta, other.eta]),
            np.concatenate([self.gamma, other.gamma]),
        )

    def scaled(self, factor: complex) -> "ExponentialSeries":
        return ExponentialSeries(self.eta * factor, self.gamma)

    def to_records(self) -> list[dict]:
        """Plain-float record list, the on-disk JSON form of the terms."""
        return [
            {
                "eta_re": float(e.real),
                "eta_im": float(e.imag),
                "gamma_re": float(g.real),
                "gamma_im": float(g.imag),
            }
            for e, g in zip(self.eta, self.gamma)
        ]

    @classmethod
    def from_records(cls, records: list[dict]) -> "ExponentialSeries":
        try:
            # complex(a, b) rather than a + 1j*b: the sum turns -0.0 parts
            # into +0.0 and would break byte-identical JSON round-trips
            eta = np.array([complex(r["eta_re"], r["eta_im"]) for r in records],
                           dtype=complex)
            gamma = np.array(
                [complex(r["gamma_re"], r["gamma_im"]) for r in records], dtype=complex
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed series record: {exc}") from exc
        return cls(eta, gamma)


def conjugate_pairing_defect(series: ExponentialSeries) -> float:
    """Worst-case deviation of a series from conjugate closure.

    Each term must be either real (up to the returned defect) or matched by
    a partner term with conjugated exponent and amplitude. Returns the
    largest mismatch relative to the series scale, 0.0 for an empty series.
    """
    if len(series) == 0:
        return 0.0
    scale = max(np.abs(series.eta).max(), np.abs(series.gamma).max(), 1e-300)
    defect = 0.0
    for k in range(len(series)):
        g, e = series.gamma[k], series.eta[k]
        # candidate partners include the term itself (covers real terms)
        d = np.abs(series.gamma - np.conj(g)) + np.abs(series.eta - np.conj(e))
        defect = max(defect, d.min() / scale)
    return float(defect)
