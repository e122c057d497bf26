"""Run the no-collapse branching model next to its collapse control."""

import argparse

from qbrainsim.experiments import BRANCH_LEVEL, NO_COLLAPSE, ExperimentConfig, run_many_worlds_comparison


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--branchings", type=int, default=10)
    ap.add_argument("--bias", type=float, default=0.9)
    args = ap.parse_args(argv)

    cfg = ExperimentConfig(seed=args.seed, n_branchings=args.branchings, branching_bias=args.bias)
    for policy in (NO_COLLAPSE, BRANCH_LEVEL):
        rep = run_many_worlds_comparison(cfg.with_(policy=policy))
        stats = rep.branch_weight_stats
        print(
            f"{policy:32s} branches={rep.branch_count_trace[-1]:6d} "
            f"min_weight={stats['min']:.3e} truncated={rep.truncated}"
        )


if __name__ == "__main__":
    main()
