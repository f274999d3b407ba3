"""J along b for a non-radial Henon record and its 90 degree rotation."""
import argparse

import numpy as np

from multisol.experiments import henon_census, rotated_pair_energies
from multisol.galerkin import rotate_coefficients


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--b-end", type=float, default=0.8)
    p.add_argument("--steps", type=int, default=4)
    p.add_argument("--seed", type=int, default=2)
    args = p.parse_args()
    dp, _, classes = henon_census(seed=args.seed)
    for g in classes:
        x = g[0].xi
        if np.linalg.norm(rotate_coefficients(x, dp.M, dp.N, 0.5 * np.pi) - x) > 1e-6 * np.linalg.norm(x):
            break
    else:
        raise SystemExit("no non-radial record found")
    print("b       J(aligned)   J(rotated)   int u_y^2 (aligned, rotated)")
    for row in rotated_pair_energies(dp, x, args.b_end, args.steps):
        print(f"{row.b:.3f}  {row.J[0]:11.5f}  {row.J[1]:11.5f}  {row.grad_y[0]:9.3f} {row.grad_y[1]:9.3f}")


if __name__ == "__main__":
    main()
