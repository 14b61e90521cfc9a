"""Exponent table for the family of all k-subsets of {1..n}.

Prints p, q, the naive exponent, and the spectral value 1 - lambda for
the coordinate subspace family (with unit weights; equal to p for restriction and q for image maps).
"""

import argparse
from itertools import combinations

from blv.bl import exponent_formulas
from blv.geo import coordinate_family_lambda


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--n-max", type=int, default=7)
    ap.add_argument("--spectral-n-max", type=int, default=6)
    args = ap.parse_args()
    print(f"{'n':>3} {'k':>3} {'p':>6} {'q':>6} {'naive':>6} {'1-lam(restr)':>13} {'1-lam(image)':>13}")
    for n in range(2, args.n_max + 1):
        for k in range(1, n):
            ef = exponent_formulas(n, k)
            spec_r = spec_i = ""
            if n <= args.spectral_n_max:
                subsets = [list(s) for s in combinations(range(1, n + 1), k)]
                spec_r = f"{1 - coordinate_family_lambda(n, [(s, 'restriction', 1) for s in subsets]):.6f}"
                spec_i = f"{1 - coordinate_family_lambda(n, [(s, 'image', 1) for s in subsets]):.6f}"
            print(f"{n:>3} {k:>3} {ef.p:>6} {ef.q:>6} {ef.naive:>6} {spec_r:>13} {spec_i:>13}")


if __name__ == "__main__":
    main()
