"""Hierarchy state counts for matched-accuracy term budgets.

Tabulates the auxiliary-operator count for the Prony term budget against
the baseline budget that reaches the same accuracy (4x, 8x, 16x terms at
beta = 10, 100, 1000), across truncation depths.

Usage: python3 scripts/cost_table.py [--depths 2 4 6]
"""
import argparse
from fractions import Fraction

from prony_bath import ado_count

# (beta, Prony terms, matched baseline terms)
BUDGETS = [(10.0, 5, 20), (100.0, 8, 64), (1000.0, 10, 160)]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--depths", type=int, nargs="+", default=[2, 4, 6])
    parser.add_argument("--n-alpha", type=int, default=1)
    parser.add_argument("--n-u", type=int, default=2)
    args = parser.parse_args()

    header = f"{'beta':>8} {'L':>3} {'n_ado(pfd)':>14} {'n_ado(psd)':>18} {'ratio':>12}"
    print(header)
    print("-" * len(header))
    for beta, k_pfd, k_psd in BUDGETS:
        for L in args.depths:
            n_pfd = ado_count(k_pfd, args.n_alpha, args.n_u, L)
            n_psd = ado_count(k_psd, args.n_alpha, args.n_u, L)
            ratio = Fraction(n_pfd, n_psd)
            print(f"{beta:>8g} {L:>3} {n_pfd:>14} {n_psd:>18} {float(ratio):>12.3e}")


if __name__ == "__main__":
    main()
