"""Solution types of the cubic Henon problem on the unit disk, grouped by energy."""
import argparse

import numpy as np

from multisol.analysis import interior_peaks
from multisol.experiments import henon_census


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--M", type=int, default=16)
    p.add_argument("--N", type=int, default=16)
    p.add_argument("--seed", type=int, default=2)
    args = p.parse_args()
    dp, res, classes = henon_census(args.M, args.N, args.seed)
    print(f"{len(classes)} types from {len(res.nontrivial(dp))} records")
    for g in classes:
        rec = g[0]
        peaks = interior_peaks(dp, rec.xi)
        signs = "".join("+" if q.value > 0 else "-" for q in sorted(peaks, key=lambda q: q.theta))
        print(f"  J = {rec.J:11.4f}  copies {len(g):2d}  peaks {len(peaks):2d} {signs}  |F| {rec.residual_inf:.1e}")


if __name__ == "__main__":
    main()
