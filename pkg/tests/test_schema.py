import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qbrainsim.errors import InvariantViolation
from qbrainsim.schema import (
    Pattern,
    SchemaMemory,
    actualize,
    energy,
    facilitate,
    form_branches,
    is_fixed_point,
    recall,
    recall_trace,
    record_check,
    trace_csv,
)
from qbrainsim.stats import binomial_band

patterns16 = st.lists(st.sampled_from([-1, 1]), min_size=16, max_size=16).map(
    lambda u: Pattern(tuple(u))
)


def stored(*patterns, n=16):
    mem = SchemaMemory.empty(n)
    for p in patterns:
        mem = facilitate(mem, p, 1)
    return mem


def test_pattern_segments():
    p = Pattern((1,) * 16)
    assert [s[0] for s in p.segments] == ["body", "world", "belief"]
    assert sum(hi - lo for _, lo, hi in p.segments) == 16
    q = Pattern.bwb([1, -1], [1, 1, 1], [-1])
    assert q.segment("world") == (2, 5)
    with pytest.raises(ValueError):
        Pattern((1, 1, 1), (("a", 0, 2), ("b", 1, 3)))
    with pytest.raises(ValueError):
        Pattern((1, 0, 1))
    assert Pattern((1, -1)).id != Pattern((-1, 1)).id


def test_memory_invariants():
    with pytest.raises(InvariantViolation):
        SchemaMemory(np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(InvariantViolation):
        SchemaMemory(np.eye(2))


def test_facilitate_outer_product():
    p = Pattern((1, -1, 1, 1))
    mem = facilitate(SchemaMemory.empty(4), p, 1)
    u = np.array(p.units)
    for a in range(4):
        for b in range(4):
            assert mem.weights[a, b] == (0 if a == b else u[a] * u[b])


def test_facilitate_threshold_gate_and_errors():
    mem = SchemaMemory.empty(4, facilitation_threshold=1)
    p = Pattern((1, -1, 1, 1))
    assert facilitate(mem, p, 0) is mem
    gated = SchemaMemory.empty(4, facilitation_threshold=3)
    assert facilitate(gated, p, 2) is gated
    assert facilitate(gated, p, 3).weights.any()
    with pytest.raises(ValueError):
        facilitate(mem, Pattern((1, 1)), 1)
    with pytest.raises(ValueError):
        facilitate(mem, p, -1)


def test_facilitate_segment_only_touches_segment():
    p = Pattern((1, -1, 1, -1), (("left", 0, 2), ("right", 2, 4)))
    mem = facilitate(SchemaMemory.empty(4), p, 1, segment="left")
    assert mem.weights[0, 1] == -1 and not mem.weights[2:, :].any() and not mem.weights[:, 2:].any()


@settings(max_examples=100, deadline=None)
@given(ps=st.lists(patterns16, min_size=1, max_size=5), eta=st.floats(0.01, 5))
def test_facilitation_keeps_symmetry_and_zero_diagonal(ps, eta):
    mem = SchemaMemory.empty(16, learning_rate=eta)
    for p in ps:
        mem = facilitate(mem, p, 1)
        assert np.array_equal(mem.weights, mem.weights.T)
        assert not np.diag(mem.weights).any()


@settings(max_examples=100, deadline=None)
@given(p=patterns16)
def test_single_stored_pattern_is_fixed_point(p):
    mem = stored(p)
    # one synchronous sweep reproduces p
    u = np.array(p.units)
    assert np.array_equal(np.where(mem.weights @ u >= 0, 1, -1), u)
    got, converged, trace = recall_trace(mem, p, 5)
    assert got == p and converged
    assert not any(flipped for _, _, flipped, _ in trace)
    assert {sweep for sweep, *_ in trace} == {1}


def two_flip_trial(seed):
    rng = np.random.default_rng(seed)
    p1, p2 = Pattern.random(16, rng), Pattern.random(16, rng)
    mem = stored(p1, p2)
    cue = p1.flipped(rng.choice(16, 2, replace=False))
    got, converged, trace = recall_trace(mem, cue, 20)
    energies = [energy(mem, cue.units)] + [e for *_, e in trace]
    monotone = all(b <= a + 1e-9 for a, b in zip(energies, energies[1:]))
    return got == p1 and converged, monotone


def test_two_flip_recovery_two_patterns():
    results = [two_flip_trial(seed) for seed in range(200)]
    assert sum(ok for ok, _ in results) >= 0.95 * 200
    assert all(mono for _, mono in results)


def test_part_to_whole_single_pattern():
    ok = 0
    for seed in range(200):
        rng = np.random.default_rng(seed)
        p = Pattern.random(16, rng)
        cue = p.flipped(rng.choice(16, 2, replace=False))
        ok += recall(stored(p), cue)[0] == p
    assert ok >= 190


@settings(max_examples=100, deadline=None)
@given(ps=st.lists(patterns16, min_size=1, max_size=6), cue=patterns16)
def test_energy_never_increases(ps, cue):
    mem = stored(*ps)
    _, _, trace = recall_trace(mem, cue, 30)
    energies = [energy(mem, cue.units)] + [e for *_, e in trace]
    assert all(b <= a + 1e-9 for a, b in zip(energies, energies[1:]))


def test_recall_errors_and_trace_csv():
    mem = SchemaMemory.empty(4)
    with pytest.raises(ValueError):
        recall(mem, Pattern((1, 1)))
    with pytest.raises(ValueError):
        recall(mem, Pattern((1, 1, 1, 1)), 0)
    _, _, trace = recall_trace(mem, Pattern((1, -1, 1, 1)), 3)
    rows = list(csv.reader(io.StringIO(trace_csv(trace))))
    assert rows[0] == ["sweep", "unit", "flipped", "energy"]
    assert rows[2][:3] == ["1", "1", "1"]  # unit 1 flips to +1 under sign(0)=+1


def test_record_single_pattern_endures():
    p = Pattern.random(16, np.random.default_rng(0))
    rep = record_check(stored(p), p)
    assert rep.endures
    assert rep.copiable
    # a fully coupled memory ties the halves together
    assert not rep.combinable
    assert sum(1 for kind, *_ in rep.trace if kind == "flip_recall") == 16


def test_record_empty_memory_does_not_endure():
    p = Pattern((1, -1) * 8)
    assert not record_check(SchemaMemory.empty(16), p).endures


def disjoint_fixture():
    segs = (("left", 0, 8), ("right", 8, 16))
    rng = np.random.default_rng(42)
    a = Pattern.random(16, rng, segs)
    b = Pattern.random(16, rng, segs)
    mem = facilitate(SchemaMemory.empty(16), a, 1, segment="left")
    mem = facilitate(mem, b, 1, segment="right")
    return mem, a, b


def test_record_disjoint_segments_all_true():
    mem, a, b = disjoint_fixture()
    combined = Pattern(a.units[:8] + b.units[8:], a.segments)
    assert is_fixed_point(mem, combined.units)
    rep = record_check(mem, combined, partner=b, split=8)
    assert rep.endures and rep.copiable and rep.combinable
    assert record_check(mem, combined).combinable  # default partner -p


def test_form_branches_examples():
    p, q = Pattern((1, 1, -1)), Pattern((-1, 1, 1))
    one = form_branches([(p, 2.0)])
    assert one.labels == [p.id] and one.weights() == pytest.approx([1.0])
    two = form_branches([(p, 1), (q, 1)])
    assert [abs(w) for _, w in two.branches] == pytest.approx([1 / math.sqrt(2)] * 2)
    skew = form_branches([(p, 1), (q, 3)])
    assert skew.weights() == pytest.approx([0.25, 0.75])
    assert skew.payloads[q.id] == q
    with pytest.raises(ValueError):
        form_branches([])
    with pytest.raises(ValueError):
        form_branches([(p, 0.0)])
    assert form_branches([(p, 1), (p, 1)]).weights() == pytest.approx([1.0])


def test_actualize_single_branch():
    p = Pattern.random(16, np.random.default_rng(1))
    got, mem = actualize(form_branches([(p, 1.0)]), SchemaMemory.empty(16), np.random.default_rng(0))
    assert got == p
    assert np.array_equal(mem.weights, stored(p).weights)


def test_actualize_statistics():
    rng = np.random.default_rng(17)
    p, q = Pattern.random(16, rng), Pattern.random(16, rng)
    b = form_branches([(p, 1), (q, 3)])
    mem0 = SchemaMemory.empty(16)
    n = 10**5
    hits = 0
    for _ in range(n):
        got, mem = actualize(b, mem0, rng)
        hits += got == q
    lo, hi = binomial_band(0.75, n)
    assert lo <= hits / n <= hi
    assert np.array_equal(mem.weights, mem.weights.T) and not np.diag(mem.weights).any()


def test_actualized_pattern_recalls_from_two_flip_cues():
    ok = 0
    for seed in range(200):
        rng = np.random.default_rng(seed)
        alts = [(Pattern.random(16, rng), w) for w in (1.0, 2.0, 3.0)]
        got, mem = actualize(form_branches(alts), SchemaMemory.empty(16), rng)
        cue = got.flipped(rng.choice(16, 2, replace=False))
        ok += recall(mem, cue)[0] == got
    assert ok >= 190


def test_serialization():
    p = Pattern.random(16, np.random.default_rng(3))
    mem = stored(p)
    assert json.loads(json.dumps(p.to_dict()))["units"] == list(p.units)
    back = SchemaMemory.from_json(mem.to_json())
    assert np.array_equal(back.weights, mem.weights)
