"""Print register accounting for a grid of small lattices as CSV."""

import argparse
import csv
import itertools
import sys

from qbrainsim.config_state import LatticeConfig, register_accounting
from qbrainsim.errors import IndexOverflowError


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-sites", type=int, default=6)
    ap.add_argument("--max-fields", type=int, default=2)
    ap.add_argument("--max-half-range", type=int, default=3)
    args = ap.parse_args(argv)

    w = csv.writer(sys.stdout, lineterminator="\n")
    header = None
    for n, m, l in itertools.product(
        range(1, args.max_sites + 1), range(1, args.max_fields + 1), range(0, args.max_half_range + 1)
    ):
        try:
            row = register_accounting(LatticeConfig(n, m, l)).to_dict()
        except IndexOverflowError:
            continue
        row = {"n_sites": n, "n_fields": m, "half_range": l, **row}
        if header is None:
            header = list(row)
            w.writerow(header)
        w.writerow([row[k] for k in header])


if __name__ == "__main__":
    main()
