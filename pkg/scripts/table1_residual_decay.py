"""Residual history of the trust-region solve from each amplitude root (sine-Gordon, unit disk)."""
import argparse

from multisol.experiments import residual_decay


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--M", type=int, default=16)
    p.add_argument("--N", type=int, default=16)
    args = p.parse_args()
    checkpoints = (0, 5, 10, 20, 30)
    print("bc         lambda  alpha     " + "  ".join(f"k={k:<8d}" for k in checkpoints))
    for bc, lam in (("dirichlet", 30.0), ("neumann", 20.0)):
        for row in residual_decay(bc, lam, args.M, args.N, checkpoints=checkpoints):
            cells = "  ".join(f"{row.residuals[k]:<10.2e}" for k in checkpoints)
            print(f"{bc:<10s} {lam:<7g} {row.alpha:+.4f}  {cells}")


if __name__ == "__main__":
    main()
