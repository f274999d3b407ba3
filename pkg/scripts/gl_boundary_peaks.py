"""Boundary-peak records of Ginzburg-Landau on ellipses and their angular offsets from the vertices."""
import argparse

import numpy as np

from multisol.experiments import boundary_peak_survey


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--delta", type=float, default=0.2)
    p.add_argument("--b", type=float, nargs="+", default=[1.0, 0.8, 0.6])
    args = p.parse_args()
    for row in boundary_peak_survey(args.delta, tuple(args.b)):
        angles = " ".join(f"{a:6.1f}" for a in np.degrees(row.peaks))
        print(f"b={row.b:.2f}  J={row.J:9.4f}  {row.source:9s}  worst {row.worst_deg:5.1f} deg  peaks at {angles}")


if __name__ == "__main__":
    main()
