"""Zoom-refined QHD on the shifted Ackley function; prints best value per level.

    python scripts/run_ackley.py --levels 19 --out ackley.jsonl
"""

import argparse
import sys

from alqhd import cli


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--levels", type=int, default=19)
    ap.add_argument("--grid", type=int, default=32)
    ap.add_argument("--out", default="ackley.jsonl")
    a = ap.parse_args()
    zooms = ",".join(str(z) for z in range(1, a.levels + 1))
    return cli.main(["bench-ackley", "--zoom", zooms, "--grid", str(a.grid), "--out", a.out])


if __name__ == "__main__":
    sys.exit(main())
