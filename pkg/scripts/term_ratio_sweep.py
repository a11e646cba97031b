"""Error-versus-terms sweep of the Prony fit against the sum-over-poles baseline.

Runs three bath temperatures, writes one error-vs-terms CSV per temperature
plus a summary of how many baseline terms match each Prony anchor's accuracy.
The time window grows with beta because the slowest thermal mode decays at
pi/beta; see the per-case grids below.

Usage: python3 scripts/term_ratio_sweep.py [--out data/] [--quick]
"""
import argparse
import csv
import json
import time
from pathlib import Path

from prony_bath import (
    BathParameters,
    Lorentzian,
    TimeGrid,
    matched_term_ratio,
    sweep_accuracy,
)

J = Lorentzian(1.0, 10.0)

# (beta, grid, Prony ladder, anchor terms, pole ladder)
CASES = [
    (10.0, TimeGrid(80.0, 1000), range(1, 6), 5, range(1, 17)),
    (100.0, TimeGrid(160.0, 2000), range(1, 8), 8, range(20, 49, 2)),
    (1000.0, TimeGrid(320.0, 2000), range(3, 10), 10, range(76, 125, 4)),
]

QUICK_CASES = [
    (10.0, TimeGrid(80.0, 400), range(1, 6), 5, range(1, 17)),
]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data", help="output directory")
    parser.add_argument("--quick", action="store_true",
                        help="single warm case on a coarse grid, for smoke runs")
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    summary = []
    for beta, grid, k_ladder, anchor, p_ladder in (QUICK_CASES if args.quick else CASES):
        started = time.monotonic()
        bath = BathParameters(beta)
        table = sweep_accuracy(J, bath, grid, list(k_ladder), list(p_ladder))
        path = out / f"error_vs_terms_beta{int(beta)}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "terms", "error"])
            for entry in table.rows():
                writer.writerow([entry.method, entry.terms, f"{entry.error:.16e}"])
        matched = matched_term_ratio(table, anchor)
        matched["beta"] = beta
        summary.append(matched)
        print(f"beta={beta:g}: anchor {anchor} terms at error "
              f"{matched['pfd_error']:.3e} -> baseline needs {matched['psd_terms']} "
              f"(ratio {matched['ratio']}) [{time.monotonic() - started:.1f}s]")

    spath = out / "matched_ratio_summary.json"
    spath.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"wrote {spath}")


if __name__ == "__main__":
    main()
