"""AL-QHD against the multistart baseline on the constrained Rastrigin problem.

Each zoom depth is an independent solve, so this takes several minutes.
"""

import argparse
import sys

from alqhd import cli


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--zoom", default="1,2,3,4")
    ap.add_argument("--baseline-starts", default="10,100,500")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="rastrigin.jsonl")
    a = ap.parse_args()
    return cli.main([
        "bench-rastrigin", "--zoom", a.zoom, "--baseline-starts", a.baseline_starts,
        "--seed", str(a.seed), "--out", a.out,
    ])


if __name__ == "__main__":
    sys.exit(main())
