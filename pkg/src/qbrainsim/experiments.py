"""Collapse-placement and no-collapse experiments, plus Born-rule trial harnesses.

Collapse-placement model
------------------------
Each training episode the environment shows a noisy cue of one of
``n_patterns`` prototype patterns. Cue-driven alternatives (every
prototype, weighted by ``exp(selectivity * overlap(cue, prototype))``) are
superposed with ``form_branches``. The brain state is then

    sum_b  w_b |b>  (x)  prod_a |phi_{b,a}>

a branch register entangled with a product state over the units. Every unit
starts at rest (-1). Over ``n_steps`` steps each branch drives its units
coherently toward its own pattern: a unit whose target differs from rest is
rotated by ``pi / (2 n_steps)`` per step in the {rest, target} plane, so the
collapse-free evolution lands exactly on the branch pattern.

Placements:

``per_site_every_step``
    After every step each unit is projectively measured (Lüders rule on the
    full state). Frequent low-level jumps freeze the coherent drive.
``branch_level_after_separation``
    No measurement until all pairwise branch-state overlaps drop below
    ``separation_threshold``; then one branch is actualized.
``none``
    No collapse. The memory receives every branch's pattern weighted by
    its squared amplitude.

The actualized pattern is facilitated into the memory. ``learning_score`` is
recall accuracy on held-out corrupted cues after training;
``disruption_index`` is the mean infidelity ``1 - |<baseline|state>|^2``
against the collapse-free state, averaged over steps and episodes.

Seeds
-----
Every random draw comes from ``SeedSequence([seed, stream, counter])`` with a
fixed stream id per purpose (prototypes, environment, collapse, test cues,
branching), so trials are order-independent and the environment is
identical across policies.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__
from .amplitudes import AmplitudeVector, BranchSet, sparse_collapse, split_branches
from .config_state import (
    DENSE_STATE_CAP,
    LATTICE_KEYS,
    LatticeConfig,
    dynamical_count,
    parse_config_text,
    require_dense,
)
from .ensemble import sample_indices
from .errors import ConfigError, InvariantViolation
from .schema import Pattern, SchemaMemory, facilitate, form_branches, overlap, recall
from .stats import ChiSquareReport, chi_square_test, sign_test

PER_SITE = "per_site_every_step"
BRANCH_LEVEL = "branch_level_after_separation"
NO_COLLAPSE = "none"
POLICIES = (PER_SITE, BRANCH_LEVEL, NO_COLLAPSE)

STREAM_PROTOTYPES = 0
STREAM_ENVIRONMENT = 1
STREAM_COLLAPSE = 2
STREAM_TEST = 3
STREAM_BRANCHING = 4

CHECK_TOL = 1e-9


def trial_rng(seed: int, stream: int, counter: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream, counter]))


@dataclass(frozen=True)
class ExperimentConfig:
    lattice: LatticeConfig | None = None
    n_neurons: int = 16
    n_patterns: int = 3
    policy: str = BRANCH_LEVEL
    n_trials: int = 200
    n_steps: int = 8
    seed: int = 0
    separation_threshold: float = 0.5
    cue_flips: int = 2
    selectivity: float = 4.0
    n_test_cues: int = 20
    test_flips: int = 2
    learning_rate: float = 1.0
    facilitation_threshold: int = 1
    n_branchings: int = 10
    branching_bias: float = 0.9
    n_seeds: int = 20

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ConfigError(f"policy must be one of {POLICIES}, got {self.policy!r}")
        for name in ("n_neurons", "n_patterns", "n_trials", "n_steps", "n_test_cues", "n_seeds"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("cue_flips", "test_flips", "n_branchings"):
            if not 0 <= getattr(self, name):
                raise ConfigError(f"{name} must be >= 0")
        if max(self.cue_flips, self.test_flips) > self.n_neurons:
            raise ConfigError("cannot flip more units than the pattern has")
        if not 0 < self.separation_threshold <= 1:
            raise ConfigError("separation_threshold must lie in (0, 1]")
        if not 0 < self.branching_bias < 1:
            raise ConfigError("branching_bias must lie in (0, 1)")
        if self.lattice is not None:
            require_dense(dynamical_count(self.lattice), self.lattice)

    def with_(self, **changes) -> "ExperimentConfig":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(changes)
        return ExperimentConfig(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lattice"] = None if self.lattice is None else asdict(self.lattice)
        return d

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)} - {"lattice"}
        values, linenos = parse_config_text(text, allowed=names | set(LATTICE_KEYS))
        lattice_vals = {k: v for k, v in values.items() if k in LATTICE_KEYS}
        lattice = LatticeConfig.from_mapping(lattice_vals, linenos) if lattice_vals else None
        kwargs = {}
        for f in fields(cls):
            if f.name == "lattice" or f.name not in values:
                continue
            v = values[f.name]
            expected = str if f.name == "policy" else (float if f.type == "float" else int)
            if expected is float and isinstance(v, int) and not isinstance(v, bool):
                v = float(v)
            if isinstance(v, bool) or not isinstance(v, expected):
                raise ConfigError(f"{f.name} must be of type {expected.__name__}", linenos[f.name])
            kwargs[f.name] = v
        try:
            return cls(lattice=lattice, **kwargs)
        except ConfigError as exc:
            if exc.lineno is None:
                key = next((k for k in kwargs if k in str(exc)), None)
                if key is not None:
                    raise ConfigError(str(exc), linenos[key]) from None
            raise


@dataclass(frozen=True)
class MetricsReport:
    policy: str
    learning_score: float | None
    disruption_index: float | None
    branch_count_trace: tuple
    branch_weight_stats: dict
    seed: int
    config: dict
    truncated: bool = False
    extra: dict = field(default_factory=dict)
    version: str = __version__

    def to_dict(self) -> dict:
        d = asdict(self)
        d["branch_count_trace"] = list(self.branch_count_trace)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _weight_stats(weights) -> dict:
    w = np.asarray(weights, dtype=np.float64)
    return {"min": float(w.min()), "max": float(w.max()), "mean": float(w.mean())}


def make_prototypes(cfg: ExperimentConfig) -> list:
    rng = trial_rng(cfg.seed, STREAM_PROTOTYPES)
    return [Pattern.random(cfg.n_neurons, rng) for _ in range(cfg.n_patterns)]


def corrupt(p: Pattern, n_flips: int, rng: np.random.Generator) -> Pattern:
    if n_flips == 0:
        return p
    return p.flipped(rng.choice(p.n, size=n_flips, replace=False))


# -- coherent drive --------------------------------------------------------
# Unit amplitude arrays have shape (branches, units, 2); index 0 is the -1
# value (rest), index 1 is +1.


class _DriveState:
    def __init__(self, weights: np.ndarray, targets: np.ndarray):
        n_b, n_u = targets.shape
        self.w = weights.astype(np.complex128)
        self.phi = np.zeros((n_b, n_u, 2), dtype=np.complex128)
        self.phi[:, :, 0] = 1.0
        self.driven = targets > 0

    def copy(self) -> "_DriveState":
        out = object.__new__(_DriveState)
        out.w, out.phi, out.driven = self.w.copy(), self.phi.copy(), self.driven
        return out

    def rotate(self, delta: float):
        c, s = math.cos(delta), math.sin(delta)
        lo, hi = self.phi[..., 0].copy(), self.phi[..., 1].copy()
        self.phi[..., 0] = np.where(self.driven, c * lo - s * hi, lo)
        self.phi[..., 1] = np.where(self.driven, s * lo + c * hi, hi)

    def check(self):
        norm = float(np.sum(np.abs(self.w) ** 2))
        unit_norms = np.sum(np.abs(self.phi) ** 2, axis=-1)
        if abs(norm - 1.0) > CHECK_TOL or np.any(np.abs(unit_norms - 1.0) > CHECK_TOL):
            raise InvariantViolation("drive state lost normalization")

    def branch_overlaps(self) -> np.ndarray:
        # |<Phi_b|Phi_c>| over the unit product states, ignoring the register
        inner = np.einsum("bui,cui->bcu", self.phi.conj(), self.phi)
        return np.abs(np.prod(inner, axis=-1))

    def measure_unit(self, a: int, rng: np.random.Generator) -> int:
        probs = np.abs(self.w) ** 2 @ (np.abs(self.phi[:, a, :]) ** 2)
        v = sample_indices(probs, rng)
        self.w = self.w * self.phi[:, a, v]
        self.w /= math.sqrt(float(np.sum(np.abs(self.w) ** 2)))
        self.phi[:, a, :] = 0.0
        self.phi[:, a, v] = 1.0
        return v

    def keep_branch(self, k: int):
        w = np.zeros_like(self.w)
        w[k] = self.w[k] / abs(self.w[k])
        self.w = w


def _fidelity(base: _DriveState, other: _DriveState) -> float:
    unit = np.prod(np.sum(base.phi.conj() * other.phi, axis=-1), axis=-1)
    return float(abs(np.sum(base.w.conj() * other.w * unit)) ** 2)


def run_episode(bs: BranchSet, targets: np.ndarray, cfg: ExperimentConfig, policy: str, rng):
    """Drive one superposition through ``n_steps`` under ``policy``.

    Returns ``(facilitation list [(units, scale)], disruption, surviving weights)``.
    """
    weights = np.array([w for _, w in bs.branches])
    base = _DriveState(weights, targets)
    state = base.copy()
    delta = math.pi / (2 * cfg.n_steps)
    infidelity = []
    collapsed = False
    for _ in range(cfg.n_steps):
        base.rotate(delta)
        state.rotate(delta)
        if policy == PER_SITE:
            for a in range(targets.shape[1]):
                state.measure_unit(a, rng)
        elif policy == BRANCH_LEVEL and not collapsed:
            ov = state.branch_overlaps()
            off = ov[~np.eye(len(weights), dtype=bool)]
            if off.size == 0 or off.max() < cfg.separation_threshold:
                live = BranchSet(
                    tuple((k, w) for k, w in enumerate(state.w)), refines=bs.refines
                )
                k, _ = sparse_collapse(live, rng)
                state.keep_branch(k)
                collapsed = True
        state.check()
        infidelity.append(1.0 - _fidelity(base, state))

    surviving = np.abs(state.w) ** 2
    alive = surviving > 0
    if policy == NO_COLLAPSE:
        learned = [(t, float(p)) for t, p in zip(targets, surviving)]
    elif policy == BRANCH_LEVEL:
        if not collapsed:
            k, _ = sparse_collapse(
                BranchSet(tuple((k, w) for k, w in enumerate(state.w))), rng
            )
            state.keep_branch(k)
            alive = np.abs(state.w) > 0
            surviving = np.abs(state.w) ** 2
        k = int(np.flatnonzero(alive)[0])
        learned = [(targets[k], 1.0)]
    else:
        # all units were measured at the last step: phi is a basis state
        units = np.where(np.abs(state.phi[0, :, 1]) > 0.5, 1, -1)
        learned = [(units, 1.0)]
    return learned, float(np.mean(infidelity)), surviving[alive]


def learning_score(mem: SchemaMemory, prototypes, cfg: ExperimentConfig) -> float:
    rng = trial_rng(cfg.seed, STREAM_TEST)
    acc = []
    for proto in prototypes:
        for _ in range(cfg.n_test_cues):
            got, _ = recall(mem, corrupt(proto, cfg.test_flips, rng))
            acc.append(float(np.mean(got.as_array() == proto.as_array())))
    return float(math.fsum(acc) / len(acc))


def run_policy(cfg: ExperimentConfig, policy: str | None = None) -> MetricsReport:
    policy = cfg.policy if policy is None else policy
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    prototypes = make_prototypes(cfg)
    mem = SchemaMemory.empty(cfg.n_neurons, cfg.learning_rate, cfg.facilitation_threshold)
    counts, weights, disruption = [], [], []
    for t in range(cfg.n_trials):
        env = trial_rng(cfg.seed, STREAM_ENVIRONMENT, t)
        target = prototypes[int(env.integers(cfg.n_patterns))]
        cue = corrupt(target, cfg.cue_flips, env)
        bs = form_branches(
            (p, math.exp(cfg.selectivity * overlap(cue, p))) for p in prototypes
        )
        if abs(bs.norm - 1.0) > CHECK_TOL:
            raise InvariantViolation("branch set lost normalization")
        targets = np.array([bs.payloads[lab].units for lab in bs.labels], dtype=np.int64)
        learned, dis, surviving = run_episode(
            bs, targets, cfg, policy, trial_rng(cfg.seed, STREAM_COLLAPSE, t)
        )
        for units, scale in learned:
            mem = facilitate(
                mem, Pattern(tuple(int(u) for u in units)), cfg.facilitation_threshold,
                scale=scale,
            )
        counts.append(int(surviving.size))
        weights.extend(surviving.tolist())
        disruption.append(dis)
    return MetricsReport(
        policy=policy,
        learning_score=learning_score(mem, prototypes, cfg),
        disruption_index=float(math.fsum(disruption) / len(disruption)),
        branch_count_trace=tuple(counts),
        branch_weight_stats=_weight_stats(weights),
        seed=cfg.seed,
        config=cfg.with_(policy=policy).to_dict(),
    )


def run_collapse_level_experiment(cfg: ExperimentConfig) -> dict:
    """One ``MetricsReport`` per placement policy, all on the same seed."""
    return {policy: run_policy(cfg, policy) for policy in POLICIES}


def collapse_level_sign_test(cfg: ExperimentConfig, seeds=None) -> dict:
    """Paired one-sided sign tests of branch-level vs per-site placement over seeds."""
    seeds = list(range(cfg.seed, cfg.seed + cfg.n_seeds)) if seeds is None else list(seeds)
    rows = []
    for s in seeds:
        c = cfg.with_(seed=s)
        branch, site = run_policy(c, BRANCH_LEVEL), run_policy(c, PER_SITE)
        rows.append(
            {
                "seed": s,
                "branch_learning": branch.learning_score,
                "site_learning": site.learning_score,
                "branch_disruption": branch.disruption_index,
                "site_disruption": site.disruption_index,
            }
        )
    learning = sign_test([r["branch_learning"] for r in rows], [r["site_learning"] for r in rows])
    disruption = sign_test(
        [r["site_disruption"] for r in rows], [r["branch_disruption"] for r in rows]
    )
    return {"seeds": seeds, "rows": rows, "learning": learning, "disruption": disruption}


def sign_test_csv(summary: dict) -> str:
    buf = io.StringIO()
    cols = ["seed", "branch_learning", "site_learning", "branch_disruption", "site_disruption"]
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for row in summary["rows"]:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def run_many_worlds_comparison(cfg: ExperimentConfig, cap: int = DENSE_STATE_CAP) -> MetricsReport:
    """Repeated biased binary branching, with or without collapse.

    With ``policy='none'`` every branch persists: the count doubles per event
    and the weakest branch's weight shrinks as ``min(p, 1-p)**k``. With
    ``branch_level_after_separation`` each event is followed by a collapse and
    the count stays at 1. Splitting stops (``truncated=True``) rather than
    exceed ``cap`` branches.
    """
    if cfg.policy == PER_SITE:
        raise ValueError("many-worlds comparison takes policy 'none' or the branch-level control")
    p = cfg.branching_bias
    amps = [math.sqrt(p), math.sqrt(1.0 - p)]
    bs = BranchSet(((("root",), 1.0),))
    trace = [len(bs)]
    truncated, skipped = False, 0
    for event in range(cfg.n_branchings):
        try:
            bs = split_branches(bs, amps, cap=cap)
        except OverflowError:
            truncated = True
            skipped += 1
            trace.append(len(bs))
            continue
        if cfg.policy == BRANCH_LEVEL:
            _, bs = sparse_collapse(bs, trial_rng(cfg.seed, STREAM_BRANCHING, event))
        if abs(bs.norm - 1.0) > CHECK_TOL:
            raise InvariantViolation("branch set lost normalization")
        trace.append(len(bs))
    w = bs.weights()
    k_min = int(np.argmin(w))
    return MetricsReport(
        policy=cfg.policy,
        learning_score=None,
        disruption_index=None,
        branch_count_trace=tuple(trace),
        branch_weight_stats=_weight_stats(w),
        seed=cfg.seed,
        config=cfg.to_dict(),
        truncated=truncated,
        extra={
            "n_events": cfg.n_branchings,
            "skipped_events": skipped,
            "closed_form_min_weight": min(p, 1.0 - p) ** (cfg.n_branchings - skipped)
            if cfg.policy == NO_COLLAPSE
            else None,
            "min_weight_label": list(bs.labels[k_min]),
        },
    )


def born_trials(a, n: int, seed: int, reference=None) -> ChiSquareReport:
    """Sample ``n`` collapses of ``a`` and chi-square them against ``reference``.

    ``reference`` defaults to the Born probabilities of ``a`` itself; pass a
    different distribution to measure the harness's power.
    """
    if n < 1000:
        raise ValueError("born_trials needs n >= 1000")
    if isinstance(a, AmplitudeVector):
        probs = a.moduli**2
    elif isinstance(a, BranchSet):
        probs = a.weights()
    else:
        raise TypeError(f"expected AmplitudeVector or BranchSet, got {type(a).__name__}")
    rng = np.random.default_rng(seed)
    draws = sample_indices(probs, rng, n)
    counts = np.bincount(draws, minlength=probs.size)
    ref = probs if reference is None else np.asarray(reference, dtype=np.float64)
    return chi_square_test(counts, ref / ref.sum())
