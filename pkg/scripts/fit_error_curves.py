"""Plot-ready spectrum curves for the two reference fits.

Writes, per density, a CSV with the exact thermal spectrum, the fitted
series spectrum, and their absolute difference over the analysis window.
Plotting happens elsewhere; this only produces the data.

Usage: python3 scripts/fit_error_curves.py [--out data/]
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from prony_bath import (
    BathParameters,
    Lorentzian,
    Semicircle,
    TimeGrid,
    exact_spectrum,
    fit_correlation,
    fit_error,
    series_spectrum,
)

BATH = BathParameters(10.0)

RECIPES = [
    ("lorentzian_5term", Lorentzian(1.0, 10.0), TimeGrid(80.0, 1000), "analytic", 4, 53.0),
    ("semicircle_15term", Semicircle(1.0, 10.0), TimeGrid(80.0, 400), 7, 8, 12.0),
]


def curve_rows(series, J, omega):
    exact = exact_spectrum(J, BATH, omega)
    fitted = series_spectrum(series, omega)
    for w, e, f in zip(omega, exact, fitted):
        yield [f"{w:.16e}", f"{e:.16e}", f"{f:.16e}", f"{abs(e - f):.16e}"]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data", help="output directory")
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    for name, J, grid, K_r, K_i, window in RECIPES:
        series, report = fit_correlation(J, BATH, grid, K_r, K_i)
        err = fit_error(series, J, BATH)
        print(f"{name}: {len(series)} terms, residual {report.sample_residual:.2e}, "
              f"spectral error {err.error:.3e}")
        omega = np.linspace(-window, window, 4001)
        path = out / f"{name}_spectrum.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["omega", "c_exact", "c_fit", "abs_diff"])
            writer.writerows(curve_rows(series, J, omega))
        print(f"  wrote {path}")


if __name__ == "__main__":
    main()
