#!/usr/bin/env python3
"""Exhaustively enumerate arrow configurations of a discrete web window and check forward/dual consistency."""

import argparse
import json

from coflow.web_oracle import WebWindow, exhaustive_check, interlaced_cases, web_duality_relation


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--T", type=int, default=4)
    ap.add_argument("--Z", type=int, default=8)
    ap.add_argument("--no-embed", action="store_true")
    args = ap.parse_args()
    w = WebWindow(args.T, 0, args.Z - 1)
    rep = exhaustive_check(w, embed=not args.no_embed)
    print(json.dumps(rep.to_dict(), indent=2, default=str))
    for t in range(1, args.T + 1):
        for n in (1, 2):
            cases = interlaced_cases(w, t, n)
            bad = [c for c in cases if not web_duality_relation(w, *c, t)["equal"]]
            print(f"t={t} n={n}: {len(cases)} interlaced cases, {len(bad)} unequal")


if __name__ == "__main__":
    main()
