"""Command-line entry point.

Exit codes: 0 success, 2 config error, 3 state-space cap exceeded,
4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .amplitudes import collapse_full, lift, unitary_step
from .config_state import (
    LATTICE_KEYS,
    DynamicalState,
    LatticeConfig,
    decode,
    dynamical_count,
    encode,
    evolve_classical,
    parse_config_text,
    register_accounting,
    require_dense,
    successor_table,
)
from .ensemble import point_ensemble, push_forward
from .errors import ConfigError, InvariantViolation, StateSpaceTooLarge
from .experiments import (
    BRANCH_LEVEL,
    NO_COLLAPSE,
    STREAM_TEST,
    ExperimentConfig,
    collapse_level_sign_test,
    corrupt,
    make_prototypes,
    run_collapse_level_experiment,
    run_many_worlds_comparison,
    sign_test_csv,
    trial_rng,
)
from .schema import SchemaMemory, facilitate, recall_trace, trace_csv

EXIT_OK, EXIT_CONFIG, EXIT_CAP, EXIT_INVARIANT = 0, 2, 3, 4
INITIAL_KEYS = ("initial_current", "initial_previous")
MODES = ("classical", "statistical", "quantum")


class _Outputs:
    def __init__(self, out_dir: Path):
        self.dir = out_dir
        self.files = []

    def write(self, name: str, text: str):
        self.dir.mkdir(parents=True, exist_ok=True)
        data = text.encode("utf-8")
        (self.dir / name).write_bytes(data)
        self.files.append({"path": name, "sha256": hashlib.sha256(data).hexdigest()})

    def manifest(self, args):
        body = {
            "subcommand": args.command,
            "config": args.config,
            "seed": getattr(args, "seed", None),
            "out": args.out,
            "files": self.files,
            "version": __version__,
        }
        self.dir.mkdir(parents=True, exist_ok=True)
        (self.dir / "manifest.json").write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None


def load_lattice(path: str):
    values, linenos = parse_config_text(_read(path), allowed=LATTICE_KEYS + INITIAL_KEYS)
    cfg = LatticeConfig.from_mapping(
        {k: v for k, v in values.items() if k in LATTICE_KEYS}, linenos
    )
    try:
        initial = DynamicalState.from_values(
            cfg, values.get("initial_current", [0] * cfg.n_slots), values.get("initial_previous")
        )
    except (TypeError, ValueError) as exc:
        key = "initial_current" if "initial_current" in linenos else "initial_previous"
        raise ConfigError(f"bad initial state: {exc}", linenos.get(key)) from None
    return cfg, initial


def _trajectory_csv(cfg, indices) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "index", "current", "previous"])
    for t, m in enumerate(indices):
        s = decode(int(m), cfg, dynamical=True)
        w.writerow([t, int(m), " ".join(map(str, s.current.values)), " ".join(map(str, s.previous.values))])
    return buf.getvalue()


def cmd_count(args, out: _Outputs):
    cfg, _ = load_lattice(args.config)
    text = json.dumps(register_accounting(cfg).to_dict(), indent=2, sort_keys=True) + "\n"
    sys.stdout.write(text)
    out.write("register_report.json", text)


def cmd_simulate(args, out: _Outputs):
    cfg, initial = load_lattice(args.config)
    steps = cfg.n_timesteps if args.steps is None else args.steps
    if steps < 0:
        raise ConfigError("--steps must be >= 0")
    if args.mode == "classical":
        traj = evolve_classical(initial, steps)
        out.write("trajectory.csv", _trajectory_csv(cfg, [encode(s) for s in traj]))
        return
    size = dynamical_count(cfg)
    require_dense(size, cfg)
    m0 = encode(initial)
    if args.mode == "statistical":
        e = point_ensemble(m0, size)
        succ = successor_table(cfg)
        snaps, idx = [e.probabilities.tolist()], [m0]
        for _ in range(steps):
            e = push_forward(e, succ)
            snaps.append(e.probabilities.tolist())
            idx.append(int(np.argmax(e.probabilities)))
        out.write("trajectory.csv", _trajectory_csv(cfg, idx))
        out.write("ensembles.jsonl", "".join(json.dumps(s) + "\n" for s in snaps))
        return
    rng = np.random.default_rng(args.seed)
    a = lift(point_ensemble(m0, size))
    snaps, idx = [a.to_json()], [m0]
    log = io.StringIO()
    w = csv.writer(log, lineterminator="\n")
    w.writerow(["step", "outcome", "probability"])
    for t in range(1, steps + 1):
        a = unitary_step(a, cfg)
        if not args.no_collapse:
            prior = a.moduli**2
            m, a = collapse_full(a, rng)
            w.writerow([t, m, repr(float(prior[m]))])
        else:
            m = int(np.argmax(a.moduli))
        if abs(a.norm - 1.0) > 1e-10:
            raise InvariantViolation("amplitude norm drifted")
        snaps.append(a.to_json())
        idx.append(m)
    out.write("trajectory.csv", _trajectory_csv(cfg, idx))
    out.write("amplitudes.jsonl", "".join(s + "\n" for s in snaps))
    if not args.no_collapse:
        out.write("collapse_log.csv", log.getvalue())


def load_experiment(path: str, seed: int) -> ExperimentConfig:
    return ExperimentConfig.from_text(_read(path)).with_(seed=seed)


def cmd_experiment(args, out: _Outputs):
    cfg = load_experiment(args.config, args.seed)
    reports = run_collapse_level_experiment(cfg)
    rows = io.StringIO()
    w = csv.writer(rows, lineterminator="\n")
    w.writerow(["policy", "learning_score", "disruption_index", "mean_branch_count"])
    for policy, rep in reports.items():
        out.write(f"collapse_level_{policy}.json", rep.to_json())
        w.writerow(
            [policy, repr(rep.learning_score), repr(rep.disruption_index),
             repr(float(np.mean(rep.branch_count_trace)))]
        )
    out.write("collapse_level.csv", rows.getvalue())
    summary = collapse_level_sign_test(cfg)
    out.write("sign_test.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    out.write("sign_test.csv", sign_test_csv(summary))
    out.write("many_worlds.json", run_many_worlds_comparison(cfg.with_(policy=NO_COLLAPSE)).to_json())
    out.write(
        "many_worlds_control.json",
        run_many_worlds_comparison(cfg.with_(policy=BRANCH_LEVEL)).to_json(),
    )


def cmd_recall_demo(args, out: _Outputs):
    cfg = load_experiment(args.config, args.seed)
    prototypes = make_prototypes(cfg)
    mem = SchemaMemory.empty(cfg.n_neurons, cfg.learning_rate, cfg.facilitation_threshold)
    for p in prototypes:
        mem = facilitate(mem, p, cfg.facilitation_threshold)
    cue = corrupt(prototypes[0], cfg.test_flips, trial_rng(cfg.seed, STREAM_TEST))
    got, converged, trace = recall_trace(mem, cue)
    out.write("recall_trace.csv", trace_csv(trace))
    result = {
        "target": prototypes[0].to_dict(),
        "cue": cue.to_dict(),
        "recalled": got.to_dict(),
        "converged": converged,
        "recovered": got.units == prototypes[0].units,
        "memory": mem.to_dict(),
    }
    out.write("recall.json", json.dumps(result, indent=2, sort_keys=True) + "\n")
    sys.stdout.write(json.dumps({"converged": converged, "recovered": result["recovered"]}) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qbrainsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed_required):
        p.add_argument("--config", required=True, metavar="PATH")
        p.add_argument("--out", default="out", metavar="DIR")
        if seed_required is not None:
            p.add_argument("--seed", type=int, required=seed_required, metavar="U64")

    common(sub.add_parser("count", help="register arithmetic for a lattice config"), None)
    sim = sub.add_parser("simulate", help="evolve a lattice in one description tier")
    common(sim, False)
    sim.add_argument("--mode", choices=MODES, default="classical")
    sim.add_argument("--steps", type=int, default=None)
    sim.add_argument("--no-collapse", action="store_true", help="quantum mode: skip collapses")
    common(sub.add_parser("experiment", help="collapse-placement and many-worlds runs"), True)
    common(sub.add_parser("recall-demo", help="associative recall trace"), True)
    return parser


COMMANDS = {
    "count": cmd_count,
    "simulate": cmd_simulate,
    "experiment": cmd_experiment,
    "recall-demo": cmd_recall_demo,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.command == "simulate" and args.mode == "quantum" and args.seed is None:
        print("error: --seed is required for quantum simulation", file=sys.stderr)
        return EXIT_CONFIG
    out = _Outputs(Path(args.out))
    try:
        COMMANDS[args.command](args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StateSpaceTooLarge as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_CAP
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    out.manifest(args)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
