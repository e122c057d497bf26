"""Compare collapse placements over many seeds and report the paired sign test."""

import argparse
import json

from qbrainsim.experiments import ExperimentConfig, collapse_level_sign_test, sign_test_csv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", help="experiment config file (key = value lines)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n-seeds", type=int, default=None)
    ap.add_argument("--csv", action="store_true", help="print the per-seed CSV instead of JSON")
    args = ap.parse_args(argv)

    cfg = ExperimentConfig()
    if args.config:
        with open(args.config) as fh:
            cfg = ExperimentConfig.from_text(fh.read())
    cfg = cfg.with_(seed=args.seed)
    if args.n_seeds is not None:
        cfg = cfg.with_(n_seeds=args.n_seeds)
    summary = collapse_level_sign_test(cfg)
    print(sign_test_csv(summary) if args.csv else json.dumps(summary, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
