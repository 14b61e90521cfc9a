"""LP optimum, sharpness and adversarial search for S_n with coordinate maps.

For each n the LP gives c = 1/2; the random suite and the adversarial search
find no violation there, while c slightly above 1/2 is falsified.
"""

import argparse
import time

from blv.bl import edge_active_sets, falsify_bl, optimize_exponents
from blv.verify import adversarial_search, random_trial_suite
from blv.zoo import coordinate_maps, symmetric_group_model


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--n", type=int, nargs="+", default=[3, 4, 5])
    ap.add_argument("--trials", type=int, default=300)
    ap.add_argument("--restarts", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    for n in args.n:
        t0 = time.perf_counter()
        model = symmetric_group_model(n)
        maps = coordinate_maps(model)
        c, _ = optimize_exponents(edge_active_sets(model, maps))
        suite = random_trial_suite(model, maps, c, args.trials, seed=args.seed)
        _, adv = adversarial_search(model, maps, c, iters=args.restarts, seed=args.seed)
        over = falsify_bl(model, maps, "51/100")
        print(f"S_{n}: c = {c[0]}  violations {suite.n_violations}/{args.trials}  "
              f"min global {suite.min_global_gap:.3e}  adversarial {adv:.3e}  "
              f"c=0.51 residual {over.residual:.3e}  ({time.perf_counter() - t0:.1f}s)")


if __name__ == "__main__":
    main()
