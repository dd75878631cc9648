#!/usr/bin/env python3
"""Print the ratio schedule of the cubic coalescence bound against the lower bound on the exit time."""

import argparse

from coflow.bounds import G_MAX, X_STAR, BoundsProfile, liminf_schedule
from coflow.drift import PRESETS


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--n-max", type=int, default=20)
    ap.add_argument("--drift", choices=sorted(PRESETS), default="zero")
    args = ap.parse_args()
    print(f"maximizer of g: {X_STAR:.6f}, max value {G_MAX:.6f}")
    s = liminf_schedule(BoundsProfile(drift=PRESETS[args.drift]), args.n_max)
    print(f"{'n':>3} {'eps':>10} {'w bound':>12} {'ratio':>12} {'asymptotic':>12}")
    for r in s["rows"]:
        print(f"{r['n']:3d} {r['eps']:10.3g} {r['w_bound']:12.5g} {r['ratio']:12.5g} {r['asymptotic']:12.5g}")
    print(f"decreasing from n = {s['decreasing_from']}, fall factor {s['fall_factor']:.3g}")


if __name__ == "__main__":
    main()
