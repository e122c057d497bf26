"""Quantum tier: amplitude vectors, their evolution, and collapse.

Dense vectors store moduli ``r_m`` and phases ``theta_m`` separately.
Evolution is the classical permutation plus a state-dependent phase
advance ``theta += phase_rate * E(state)``, so it is an exact isometry.
Collapse follows the Lüders rule: keep the chosen block, renormalize inside
it, leave relative phases alone.

``BranchSet`` is the sparse counterpart: a few labeled branches with complex
weights, used where the index space is implicit.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .config_state import (
    DENSE_STATE_CAP,
    LatticeConfig,
    configuration_count,
    dynamical_count,
    energy_table,
    require_dense,
    site_value_table,
    successor_table,
)
from .ensemble import Ensemble, sample_indices
from .errors import InvariantViolation

NORM_TOL = 1e-10
TWO_PI = 2.0 * math.pi


def _reduce_phase(theta: np.ndarray) -> np.ndarray:
    if theta.size and theta.min() >= 0.0 and theta.max() < TWO_PI:
        return theta
    out = np.mod(theta, TWO_PI)
    # np.mod can return exactly 2*pi for tiny negative inputs
    out[out >= TWO_PI] = 0.0
    return out


@dataclass(frozen=True, eq=False)
class AmplitudeVector:
    moduli: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        r = np.array(self.moduli, dtype=np.float64)
        th = np.array(self.phases, dtype=np.float64)
        if r.ndim != 1 or r.shape != th.shape or r.size == 0:
            raise ValueError("moduli and phases must be equal-length non-empty 1-D arrays")
        if not (r.min() >= 0 and np.isfinite(r.max()) and np.isfinite(th).all()):
            raise ValueError("moduli must be finite and nonnegative, phases finite")
        norm = float(np.dot(r, r))
        if abs(norm - 1.0) > NORM_TOL:
            raise InvariantViolation(f"sum of r_m^2 is {norm!r}, not 1")
        th = _reduce_phase(th)
        r.setflags(write=False)
        th.setflags(write=False)
        object.__setattr__(self, "moduli", r)
        object.__setattr__(self, "phases", th)

    @property
    def space_size(self) -> int:
        return self.moduli.size

    @property
    def norm(self) -> float:
        return float(np.dot(self.moduli, self.moduli))

    def as_complex(self) -> np.ndarray:
        return self.moduli * np.exp(1j * self.phases)

    def __eq__(self, other):
        if not isinstance(other, AmplitudeVector):
            return NotImplemented
        return np.array_equal(self.moduli, other.moduli) and np.array_equal(
            self.phases, other.phases
        )

    def to_json(self) -> str:
        return json.dumps({"moduli": self.moduli.tolist(), "phases": self.phases.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "AmplitudeVector":
        d = json.loads(text)
        return cls(np.array(d["moduli"]), np.array(d["phases"]))


def lift(e: Ensemble, initial_phases=None) -> AmplitudeVector:
    """``r_m = sqrt(P_m)`` with the given phases (zeros by default)."""
    if initial_phases is None:
        initial_phases = np.zeros(e.space_size)
    initial_phases = np.asarray(initial_phases, dtype=np.float64)
    if initial_phases.shape != (e.space_size,):
        raise ValueError(f"expected {e.space_size} phases, got shape {initial_phases.shape}")
    return AmplitudeVector(np.sqrt(e.probabilities), initial_phases)


def probabilities(a: AmplitudeVector) -> Ensemble:
    p = a.moduli**2
    # r = sqrt(P) round-trips to within an ulp, but renormalize so the
    # Ensemble tolerance (1e-12) holds even for vectors built by collapse.
    return Ensemble(p / p.sum())


def unitary_step(a: AmplitudeVector, cfg: LatticeConfig) -> AmplitudeVector:
    size = dynamical_count(cfg)
    if a.space_size != size:
        raise ValueError(f"vector has {a.space_size} entries, dynamical space has {size}")
    succ = successor_table(cfg)
    r = np.empty_like(a.moduli)
    th = np.empty_like(a.phases)
    r[succ] = a.moduli
    if cfg.phase_rate == 0.0:
        th[succ] = a.phases
    else:
        th[succ] = a.phases + cfg.phase_rate * energy_table(cfg)
    return AmplitudeVector(r, th)


@dataclass(frozen=True, eq=False)
class Partition:
    """Total assignment of every state index to a block label."""

    assignment: tuple

    def __post_init__(self):
        object.__setattr__(self, "assignment", tuple(self.assignment))

    @property
    def size(self) -> int:
        return len(self.assignment)

    def blocks(self) -> tuple:
        """Labels and member-index arrays, ordered by first appearance."""
        labels, inverse = _factorize(self.assignment)
        members = [np.flatnonzero(inverse == k) for k in range(len(labels))]
        return labels, members

    @classmethod
    def trivial(cls, size: int, label="all") -> "Partition":
        return cls((label,) * size)

    @classmethod
    def discrete(cls, size: int) -> "Partition":
        return cls(range(size))

    @classmethod
    def from_function(cls, size: int, fn) -> "Partition":
        return cls(fn(m) for m in range(size))


def _factorize(assignment):
    labels, codes = [], {}
    inverse = np.empty(len(assignment), dtype=np.int64)
    for m, lab in enumerate(assignment):
        k = codes.get(lab)
        if k is None:
            k = codes[lab] = len(labels)
            labels.append(lab)
        inverse[m] = k
    return labels, inverse


def _block_weights(a: AmplitudeVector, p: Partition):
    if p.size != a.space_size:
        raise ValueError(f"partition covers {p.size} indices, vector has {a.space_size}")
    labels, inverse = _factorize(p.assignment)
    weights = np.bincount(inverse, weights=a.moduli**2, minlength=len(labels))
    return labels, inverse, weights


def branch_weights(a: AmplitudeVector, p: Partition) -> list:
    labels, _, weights = _block_weights(a, p)
    return [(lab, float(w)) for lab, w in zip(labels, weights)]


def _project(a: AmplitudeVector, keep: np.ndarray) -> AmplitudeVector:
    r = np.where(keep, a.moduli, 0.0)
    total = float(np.dot(r, r))
    if total <= 0.0:
        raise InvariantViolation("projection onto a zero-weight block")
    return AmplitudeVector(r / math.sqrt(total), a.phases)


def collapse_partition(a: AmplitudeVector, p: Partition, rng: np.random.Generator):
    """Actualize one block of ``p`` with probability equal to its weight."""
    labels, inverse, weights = _block_weights(a, p)
    if not weights.sum() > 0:
        raise ValueError("zero total weight")
    k = sample_indices(weights, rng)
    return labels[k], _project(a, inverse == k)


def collapse_full(a: AmplitudeVector, rng: np.random.Generator):
    """Jump to a single index ``m``: ``r_m -> 1``, every other modulus -> 0."""
    # Same draw as collapse_partition with the discrete partition: block
    # weights are r_m^2 in index order.
    m = sample_indices(a.moduli**2, rng)
    r = np.zeros_like(a.moduli)
    r[m] = 1.0
    return m, AmplitudeVector(r, a.phases)


def collapse_site(a: AmplitudeVector, site: int, fld: int, cfg: LatticeConfig, rng):
    """Projective measurement of ``psi_fld(x_site)``.

    Works on either index space: single configurations
    (``configuration_count`` entries) or dynamical states (its square), where
    the current configuration is read.
    """
    count = configuration_count(cfg)
    if a.space_size == count:
        values = site_value_table(cfg, site, fld, dynamical=False)
    elif a.space_size == count * count:
        values = site_value_table(cfg, site, fld, dynamical=True)
    else:
        raise ValueError(f"vector size {a.space_size} matches neither index space of cfg")
    label, post = collapse_partition(a, Partition(values.tolist()), rng)
    return int(label), post


def branch_weights_csv(weights) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label", "weight"])
    for label, weight in weights:
        w.writerow([label, repr(float(weight))])
    return buf.getvalue()


@dataclass(frozen=True, eq=False)
class BranchSet:
    """Sparse superposition of labeled classical branches.

    ``payloads`` optionally maps labels to the object each branch stands
    for (e.g. a ``Pattern``); ``refines`` records the partition the branches
    were drawn from, if any.
    """

    branches: tuple
    refines: str | None = None
    payloads: dict = field(default_factory=dict)

    def __post_init__(self):
        branches = tuple((lab, complex(w)) for lab, w in self.branches)
        labels = [lab for lab, _ in branches]
        if len(set(labels)) != len(labels):
            raise ValueError("branch labels must be distinct")
        if branches:
            norm = sum(abs(w) ** 2 for _, w in branches)
            if abs(norm - 1.0) > NORM_TOL:
                raise InvariantViolation(f"branch weights have squared norm {norm!r}, not 1")
        object.__setattr__(self, "branches", branches)

    def __len__(self):
        return len(self.branches)

    @property
    def labels(self) -> list:
        return [lab for lab, _ in self.branches]

    def weights(self) -> np.ndarray:
        return np.array([abs(w) ** 2 for _, w in self.branches])

    @property
    def norm(self) -> float:
        return float(self.weights().sum())


def sparse_collapse(b: BranchSet, rng: np.random.Generator):
    if not b.branches:
        raise ValueError("cannot collapse an empty branch set")
    k = sample_indices(b.weights(), rng)
    label, w = b.branches[k]
    kept = {label: b.payloads[label]} if label in b.payloads else {}
    return label, BranchSet(((label, w / abs(w)),), refines=b.refines, payloads=kept)


def split_branches(b: BranchSet, child_amplitudes, cap: int = DENSE_STATE_CAP) -> BranchSet:
    """Split every branch into children ``(label, k)`` with weight ``w * c_k``.

    ``child_amplitudes`` must have unit squared norm so the result stays
    normalized. Raises ``OverflowError`` if the result would exceed ``cap``.
    """
    c = np.asarray(child_amplitudes, dtype=np.complex128)
    if abs(float(np.sum(np.abs(c) ** 2)) - 1.0) > NORM_TOL:
        raise ValueError("child amplitudes must have unit squared norm")
    if len(b) * c.size > cap:
        raise OverflowError(f"{len(b) * c.size} branches would exceed the cap of {cap}")
    out = tuple(
        ((lab if isinstance(lab, tuple) else (lab,)) + (k,), w * ck)
        for lab, w in b.branches
        for k, ck in enumerate(c)
    )
    return BranchSet(out, refines=b.refines)
