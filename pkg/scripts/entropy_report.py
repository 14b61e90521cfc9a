"""Entropy and Fisher information gaps on the symmetric group and slice models."""

import argparse

import numpy as np

from blv.entropy import debruijn_check, entropy_gap, fisher_gap, equivalence_consistency, random_density
from blv.zoo import coordinate_maps, slice_model, symmetric_group_model


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--densities", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    models = {"S_3": symmetric_group_model(3), "S_4": symmetric_group_model(4),
              "Omega(4,2)": slice_model(4, 2), "Omega(6,3)": slice_model(6, 3)}
    for name, model in models.items():
        maps = coordinate_maps(model)
        dens = [random_density(model, rng) for _ in range(args.densities)]
        ent = min(entropy_gap(model, maps, "1/2", f) for f in dens)
        fis = min(fisher_gap(model, maps, "1/2", f) for f in dens)
        db = debruijn_check(model, dens[0]).residual
        over = equivalence_consistency(model, maps, 1, trials=50, seed=args.seed, restarts=5)
        print(f"{name:>11}: min Ent gap {ent:.4f}  min Fisher gap {fis:.4f}  de Bruijn {db:.1e}  "
              f"c=1: correlation {over['min_global_gap']:.4f} entropy {over['min_entropy_gap']:.4f} "
              f"consistent {over['consistent']}")


if __name__ == "__main__":
    main()
