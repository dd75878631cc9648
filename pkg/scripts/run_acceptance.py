#!/usr/bin/env python3
"""Run the acceptance criteria and print one pass/fail line each.

    python3 scripts/run_acceptance.py            # all twelve, full sizes
    python3 scripts/run_acceptance.py --quick 1 9 10
"""

import argparse
import sys

from coflow.acceptance import FULL, QUICK, run_acceptance


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("criteria", nargs="*", type=int, default=list(range(1, 13)))
    ap.add_argument("--seed", type=int, default=20240611)
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args()
    res = run_acceptance(args.seed, args.criteria, QUICK if args.quick else FULL, echo=lambda s: print(s, flush=True))
    return 0 if all(r.ok for r in res.values()) else 1


if __name__ == "__main__":
    sys.exit(main())
