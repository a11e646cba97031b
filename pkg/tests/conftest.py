import numpy as np
import pytest

from prony_bath import (
    BathParameters,
    Lorentzian,
    QuadratureConfig,
    Semicircle,
    TimeGrid,
    sample_correlation_pair,
)

DELTA = 1.0
WIDTH = 10.0


@pytest.fixture(scope="session")
def lorentzian():
    return Lorentzian(DELTA, WIDTH)


@pytest.fixture(scope="session")
def semicircle():
    return Semicircle(DELTA, WIDTH)


@pytest.fixture(scope="session")
def bath_beta10():
    return BathParameters(beta=10.0)


@pytest.fixture(scope="session")
def grid_small():
    return TimeGrid(t_cut=80.0, N=400)


@pytest.fixture(scope="session")
def lorentz_pair_small(lorentzian, bath_beta10, grid_small):
    """Cached (real, imag) sample pair reused across tests."""
    return sample_correlation_pair(lorentzian, bath_beta10, grid_small, QuadratureConfig())


@pytest.fixture(scope="session")
def semicircle_pair_small(semicircle, bath_beta10, grid_small):
    return sample_correlation_pair(semicircle, bath_beta10, grid_small, QuadratureConfig())


def matsubara_imag_part(delta, W, beta, t, n_terms=200_000):
    """Independent oracle for the imaginary correlation part (Lorentzian).

    Sum over thermal poles of the occupation plus the density pole; slow
    near t = 0, so callers should stick to t >= a few grid steps.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    nu = (2.0 * np.arange(1, n_terms + 1) - 1.0) * np.pi / beta
    pole_sum = np.exp(-np.multiply.outer(t, nu)) @ (1.0 / (W * W - nu * nu))
    return (
        -(delta * W / 2.0) * np.tan(beta * W / 2.0) * np.exp(-W * t)
        - (2.0 * delta * W * W / beta) * pole_sum
    )
