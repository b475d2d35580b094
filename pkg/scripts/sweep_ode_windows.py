"""Detected blow-up time of D^a u = u^2 against its closed-form window over an (alpha, u0) lattice."""

import argparse

import numpy as np

from fracblow.blowup_ode import solve_comparison_ode


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alphas", type=float, nargs="+", default=[0.3, 0.5, 0.7, 0.9, 1.0])
    ap.add_argument("--u0", type=float, nargs="+", default=[0.5, 1.0, 2.0, 5.0])
    args = ap.parse_args()
    print(f"{'alpha':>6} {'u0':>6} {'lower':>10} {'detected':>10} {'upper':>10} {'position':>9}")
    for a in args.alphas:
        for u0 in args.u0:
            tr = solve_comparison_ode(a, u0)
            w, ts = tr.window, tr.detected_tstar
            # 0 at the lower bound, 1 at the upper bound, on a log scale
            pos = np.log(ts / w.lower) / np.log(w.upper / w.lower) if ts else float("nan")
            print(f"{a:6.2f} {u0:6.2f} {w.lower:10.5f} {ts or float('nan'):10.5f} {w.upper:10.5f} {pos:9.3f}")


if __name__ == "__main__":
    main()
