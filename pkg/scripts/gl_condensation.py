"""Half-height radius of the single-peak Ginzburg-Landau state as delta decreases."""
import argparse

from multisol.experiments import condensation_ladder


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--delta", type=float, nargs="+", default=[2e-2, 2e-3, 2e-4])
    args = p.parse_args()
    out = condensation_ladder(tuple(args.delta))
    print("delta      r_half     peak     |F|_inf")
    for d in sorted(out, reverse=True):
        r, peak, res = out[d]
        print(f"{d:<9.1e}  {r:.6f}  {peak:.5f}  {res:.1e}")


if __name__ == "__main__":
    main()
