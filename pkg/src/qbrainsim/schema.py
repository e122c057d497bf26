"""Pattern memory: Hebbian facilitation, associative recall, records, branches.

Patterns are +/-1 unit vectors split into labeled segments (body, world,
belief by default). The memory is a symmetric zero-diagonal coupling
matrix; recall is deterministic asynchronous sign dynamics in ascending
unit order with ``sign(0) = +1``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .amplitudes import BranchSet, sparse_collapse
from .errors import InvariantViolation

DEFAULT_SEGMENT_NAMES = ("body", "world", "belief")


def _default_segments(n: int) -> tuple:
    bounds = np.linspace(0, n, len(DEFAULT_SEGMENT_NAMES) + 1).round().astype(int)
    return tuple(
        (name, int(lo), int(hi))
        for name, lo, hi in zip(DEFAULT_SEGMENT_NAMES, bounds[:-1], bounds[1:])
        if hi > lo
    )


@dataclass(frozen=True)
class Pattern:
    units: tuple
    segments: tuple = ()

    def __post_init__(self):
        units = tuple(int(u) for u in self.units)
        if not units or any(u not in (-1, 1) for u in units):
            raise ValueError("units must be a non-empty sequence of -1/+1")
        segs = tuple((str(n), int(lo), int(hi)) for n, lo, hi in self.segments)
        if not segs:
            segs = _default_segments(len(units))
        pos = 0
        for name, lo, hi in sorted(segs, key=lambda s: s[1]):
            if lo != pos or hi <= lo:
                raise ValueError(f"segments must be disjoint and cover the pattern; bad {name!r}")
            pos = hi
        if pos != len(units):
            raise ValueError("segments must cover the whole pattern")
        object.__setattr__(self, "units", units)
        object.__setattr__(self, "segments", segs)

    @property
    def n(self) -> int:
        return len(self.units)

    @property
    def id(self) -> str:
        bits = "".join("1" if u > 0 else "0" for u in self.units)
        return f"p{len(bits)}x{int(bits, 2):x}"

    def as_array(self) -> np.ndarray:
        return np.array(self.units, dtype=np.int64)

    def segment(self, name: str) -> tuple:
        for seg_name, lo, hi in self.segments:
            if seg_name == name:
                return lo, hi
        raise KeyError(name)

    def with_units(self, units) -> "Pattern":
        return Pattern(tuple(int(u) for u in units), self.segments)

    def flipped(self, idx) -> "Pattern":
        u = self.as_array()
        u[list(np.atleast_1d(idx))] *= -1
        return self.with_units(u)

    @classmethod
    def bwb(cls, body, world, belief) -> "Pattern":
        """Concatenate body, world and belief parts into one segmented pattern."""
        parts = [tuple(body), tuple(world), tuple(belief)]
        segs, pos = [], 0
        for name, part in zip(DEFAULT_SEGMENT_NAMES, parts):
            if part:
                segs.append((name, pos, pos + len(part)))
                pos += len(part)
        return cls(sum(parts, ()), tuple(segs))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, segments=()) -> "Pattern":
        return cls(tuple(rng.choice((-1, 1), size=n).tolist()), segments)

    def to_dict(self) -> dict:
        return {"units": list(self.units), "segments": [list(s) for s in self.segments]}


def overlap(a, b) -> float:
    """Normalized overlap ``a . b / n`` in [-1, 1]."""
    a = a.as_array() if isinstance(a, Pattern) else np.asarray(a)
    b = b.as_array() if isinstance(b, Pattern) else np.asarray(b)
    return float(a @ b) / a.size


@dataclass(frozen=True, eq=False)
class SchemaMemory:
    weights: np.ndarray
    learning_rate: float = 1.0
    facilitation_threshold: int = 1

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("weights must be a square matrix")
        if not np.array_equal(w, w.T):
            raise InvariantViolation("weights must be symmetric")
        if np.any(np.diag(w) != 0):
            raise InvariantViolation("weights must have a zero diagonal")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.facilitation_threshold < 1:
            raise ValueError("facilitation_threshold must be a positive integer")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def empty(cls, n: int, learning_rate: float = 1.0, facilitation_threshold: int = 1):
        return cls(np.zeros((n, n)), learning_rate, facilitation_threshold)

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "learning_rate": self.learning_rate,
            "facilitation_threshold": self.facilitation_threshold,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "SchemaMemory":
        d = json.loads(text)
        return cls(np.array(d["weights"]), d["learning_rate"], d["facilitation_threshold"])


def _check_dims(mem: SchemaMemory, p: Pattern):
    if p.n != mem.n:
        raise ValueError(f"pattern has {p.n} units, memory has {mem.n}")


def facilitate(
    mem: SchemaMemory,
    p: Pattern,
    duration: int,
    segment: str | None = None,
    scale: float = 1.0,
) -> SchemaMemory:
    """Hebbian update ``W += eta * scale * p p^T`` once ``duration`` reaches the threshold.

    With ``segment`` set, only couplings inside that segment are touched,
    which stores the segment's content independently of the rest.
    """
    _check_dims(mem, p)
    if duration < 0:
        raise ValueError("duration must be >= 0")
    if duration < mem.facilitation_threshold:
        return mem
    u = p.as_array().astype(np.float64)
    if segment is not None:
        lo, hi = p.segment(segment)
        mask = np.zeros(p.n)
        mask[lo:hi] = 1.0
        u = u * mask
    dw = (mem.learning_rate * scale) * np.outer(u, u)
    np.fill_diagonal(dw, 0.0)
    return SchemaMemory(mem.weights + dw, mem.learning_rate, mem.facilitation_threshold)


def energy(mem: SchemaMemory, units) -> float:
    u = np.asarray(units, dtype=np.float64)
    return -0.5 * float(u @ mem.weights @ u)


def is_fixed_point(mem: SchemaMemory, units) -> bool:
    u = np.asarray(units, dtype=np.float64)
    return bool(np.all(np.where(mem.weights @ u >= 0, 1, -1) == u))


def recall_trace(mem: SchemaMemory, cue: Pattern, max_sweeps: int = 20):
    """Run recall and return ``(pattern, converged, trace)``.

    ``trace`` holds one ``(sweep, unit, flipped, energy)`` row per unit update,
    with the energy measured after the update.
    """
    _check_dims(mem, cue)
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be >= 1")
    W = mem.weights
    u = cue.as_array().astype(np.float64)
    e = energy(mem, u)
    trace = []
    converged = False
    for sweep in range(1, max_sweeps + 1):
        changed = False
        for a in range(u.size):
            new = 1.0 if W[a] @ u >= 0 else -1.0
            flipped = new != u[a]
            if flipped:
                u[a] = new
                e = energy(mem, u)
                changed = True
            trace.append((sweep, a, bool(flipped), e))
        if not changed:
            converged = True
            break
    if not converged:
        converged = is_fixed_point(mem, u)
    return cue.with_units(u.astype(np.int64)), converged, trace


def recall(mem: SchemaMemory, cue: Pattern, max_sweeps: int = 20):
    pattern, converged, _ = recall_trace(mem, cue, max_sweeps)
    return pattern, converged


def trace_csv(trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sweep", "unit", "flipped", "energy"])
    for sweep, unit, flipped, e in trace:
        w.writerow([sweep, unit, int(flipped), repr(e)])
    return buf.getvalue()


@dataclass(frozen=True)
class RecordReport:
    endures: bool
    copiable: bool
    combinable: bool
    trace: tuple = ()

    def to_dict(self) -> dict:
        return {
            "endures": self.endures,
            "copiable": self.copiable,
            "combinable": self.combinable,
            "trace": [list(t) for t in self.trace],
        }


def record_check(
    mem: SchemaMemory,
    p: Pattern,
    partner: Pattern | None = None,
    split: int | None = None,
    max_sweeps: int = 20,
) -> RecordReport:
    """Test whether ``p`` behaves as a record in ``mem``.

    endures
        ``p`` is a fixed point and every single-unit flip recalls back to it.
    copiable
        In a doubled memory whose second block receives a Hebbian copy of
        ``p``, ``[p, p]`` is a fixed point and the original block is untouched.
    combinable
        ``p`` on units ``[0, split)`` joined with ``partner`` on
        ``[split, n)`` is a fixed point. ``partner`` defaults to ``-p``, which
        any Hebbian memory storing ``p`` also stores, so the check asks
        whether the two halves hold independent content.
    """
    _check_dims(mem, p)
    trace = []
    u = p.as_array()

    fixed = is_fixed_point(mem, u)
    trace.append(("fixed_point", -1, fixed))
    endures = fixed
    for a in range(p.n):
        got, _ = recall(mem, p.flipped(a), max_sweeps)
        ok = got.units == p.units
        trace.append(("flip_recall", a, ok))
        endures = endures and ok

    n = p.n
    W2 = np.zeros((2 * n, 2 * n))
    W2[:n, :n] = mem.weights
    copy = mem.learning_rate * np.outer(u, u).astype(np.float64)
    np.fill_diagonal(copy, 0.0)
    W2[n:, n:] = copy
    doubled = SchemaMemory(W2, mem.learning_rate, mem.facilitation_threshold)
    both = is_fixed_point(doubled, np.concatenate([u, u]))
    untouched = np.array_equal(doubled.weights[:n, :n], mem.weights) and is_fixed_point(mem, u)
    copiable = both and untouched
    trace.append(("copy_fixed_point", -1, copiable))

    if partner is None:
        partner = p.with_units(-u)
    _check_dims(mem, partner)
    split = n // 2 if split is None else split
    if not 0 < split < n:
        raise ValueError("split must leave two non-empty segments")
    combined = np.concatenate([u[:split], partner.as_array()[split:]])
    combinable = is_fixed_point(mem, combined)
    trace.append(("combined_fixed_point", split, combinable))

    return RecordReport(endures, copiable, combinable, tuple(trace))


def form_branches(alternatives) -> BranchSet:
    """Superpose candidate patterns with amplitudes ``sqrt(w / sum w)``.

    Identical patterns are merged by summing their weights; zero-weight
    alternatives are dropped.
    """
    alternatives = list(alternatives)
    if not alternatives:
        raise ValueError("need at least one alternative")
    merged, payloads = {}, {}
    for pat, w in alternatives:
        if w < 0 or not math.isfinite(w):
            raise ValueError("weights must be finite and nonnegative")
        merged[pat.id] = merged.get(pat.id, 0.0) + float(w)
        payloads[pat.id] = pat
    total = sum(merged.values())
    if not total > 0:
        raise ValueError("weights must not all be zero")
    branches = tuple((lab, math.sqrt(w / total)) for lab, w in merged.items() if w > 0)
    kept = {lab: payloads[lab] for lab, _ in branches}
    return BranchSet(branches, refines="pattern", payloads=kept)


def actualize(b: BranchSet, mem: SchemaMemory, rng: np.random.Generator):
    """Collapse onto one branch and facilitate its pattern into the memory."""
    label, _ = sparse_collapse(b, rng)
    pattern = b.payloads[label]
    return pattern, facilitate(mem, pattern, mem.facilitation_threshold)
