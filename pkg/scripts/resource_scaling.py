"""Gate-count scaling of the penalised ACOPF encoding over growing subgraphs.

Defaults to a synthetic 120-bus network; pass a MATPOWER file to use a real
case, e.g. ``python scripts/resource_scaling.py case118.m --sizes 4,8,16,32``.
"""

import argparse
import sys

from alqhd import cli


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("case", nargs="?", default="synthetic:120")
    ap.add_argument("--sizes", default="4,8,16,32,64,120")
    ap.add_argument("--resolution", type=int, default=4)
    ap.add_argument("--out", default="resources.jsonl")
    a = ap.parse_args()
    return cli.main(["resources", a.case, "--sizes", a.sizes, "--resolution", str(a.resolution),
                     "--out", a.out])


if __name__ == "__main__":
    sys.exit(main())
