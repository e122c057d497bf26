import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from qbrainsim.config_state import (
    LatticeConfig,
    decode,
    dynamical_count,
    encode,
    evolve_classical,
    step_classical,
    successor_table,
)
from qbrainsim.ensemble import (
    Ensemble,
    point_ensemble,
    push_forward,
    quantize,
    sample,
    sample_indices,
    uniform_ensemble,
)
from qbrainsim.stats import chi_square_test

from conftest import small_configs

prob_vectors = arrays(
    np.float64, st.integers(1, 40), elements=st.floats(0, 1, allow_subnormal=False)
).filter(lambda a: a.sum() > 1e-3).map(lambda a: a / a.sum())


def random_ensemble(rng, size):
    p = rng.random(size) ** 3
    return Ensemble(p / p.sum())


def test_ensemble_invariants():
    with pytest.raises(ValueError):
        Ensemble(np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        Ensemble(np.array([1.5, -0.5]))
    with pytest.raises(ValueError):
        Ensemble(np.array([]))
    e = Ensemble(np.array([0.25, 0.75]))
    with pytest.raises(ValueError):
        e.probabilities[0] = 1.0


def test_point_and_uniform():
    e = point_ensemble(0, 9)
    assert e.probabilities.tolist() == [1.0] + [0.0] * 8
    with pytest.raises(ValueError):
        point_ensemble(9, 9)
    assert uniform_ensemble(1).probabilities.tolist() == [1.0]
    u = uniform_ensemble(9)
    assert np.allclose(u.probabilities, 1 / 9)
    assert abs(u.probabilities.sum() - 1) < 1e-12


def test_delta_sampling_any_seed():
    e = point_ensemble(5, 9)
    for seed in range(50):
        assert sample(e, np.random.default_rng(seed)) == 5


def test_push_forward_delta_matches_classical_step():
    cfg = LatticeConfig(1, 1, 1)  # 9 dynamical states
    succ = successor_table(cfg)
    for m in range(9):
        expected = encode(step_classical(decode(m, cfg, dynamical=True)))
        assert push_forward(point_ensemble(m, 9), succ) == point_ensemble(expected, 9)


def test_push_forward_identity_and_non_bijection():
    e = Ensemble(np.array([0.1, 0.2, 0.7]))
    assert push_forward(e, [0, 1, 2]) == e
    with pytest.raises(ValueError):
        push_forward(e, [0, 0, 2])
    with pytest.raises(ValueError):
        push_forward(e, [0, 1, 3])


@pytest.mark.parametrize("cfg", [LatticeConfig(1, 1, 1), LatticeConfig(2, 1, 1)])
def test_uniform_invariant_under_bijections(cfg):
    size = dynamical_count(cfg)  # 9 and 81
    u = uniform_ensemble(size)
    assert push_forward(u, successor_table(cfg)) == u
    perm = np.random.default_rng(0).permutation(size)
    assert push_forward(u, perm) == u


def test_push_forward_preserves_mass_random(rng):
    for _ in range(100):
        size = int(rng.integers(1, 200))
        e = random_ensemble(rng, size)
        out = push_forward(e, rng.permutation(size))
        assert abs(out.probabilities.sum() - e.probabilities.sum()) < 1e-12


def test_statistical_classical_bridge_exhaustive():
    for cfg in small_configs(2000, dynamical=True):
        size = dynamical_count(cfg)
        succ = successor_table(cfg)
        for m in range(size):
            traj = evolve_classical(decode(m, cfg, dynamical=True), 4)
            e = point_ensemble(m, size)
            for t in range(1, 5):
                e = push_forward(e, succ)
                assert e.probabilities[encode(traj[t])] == 1.0


def test_sample_seed_determinism():
    e = Ensemble(np.array([0.2, 0.3, 0.5]))
    a = [sample(e, r) for r in [np.random.default_rng(7)] for _ in range(100)]
    r1, r2 = np.random.default_rng(7), np.random.default_rng(7)
    s1 = [sample(e, r1) for _ in range(100)]
    s2 = [sample(e, r2) for _ in range(100)]
    assert s1 == s2 == a


def test_vector_draws_match_sequential_draws():
    w = np.array([0.1, 0.0, 0.4, 0.5])
    r1, r2 = np.random.default_rng(3), np.random.default_rng(3)
    seq = [sample_indices(w, r1) for _ in range(500)]
    vec = sample_indices(w, r2, 500).tolist()
    assert seq == vec
    assert 1 not in seq


def test_uniform_sampling_chi_square():
    e = uniform_ensemble(9)
    draws = sample_indices(e.probabilities, np.random.default_rng(2024), 10**5)
    report = chi_square_test(np.bincount(draws, minlength=9), e.probabilities)
    assert report.dof == 8
    # 99.9% point of chi2(8), from tables
    assert report.critical_value == pytest.approx(26.124, abs=1e-3)
    assert report.passed


@pytest.mark.parametrize("seed", range(3))
def test_random_ensemble_sampling_chi_square(seed):
    rng = np.random.default_rng(seed)
    e = random_ensemble(rng, int(rng.integers(2, 100)))
    draws = sample_indices(e.probabilities, rng, 10**5)
    assert chi_square_test(np.bincount(draws, minlength=e.space_size), e.probabilities).passed


def test_quantize_examples():
    e = Ensemble(np.array([0.26, 0.74]))
    assert quantize(e, 5).probabilities.tolist() == [0.25, 0.75]
    d = point_ensemble(3, 7)
    for k in (2, 3, 10, 101):
        assert quantize(d, k) == d
    with pytest.raises(ValueError):
        quantize(e, 1)
    with pytest.raises(ValueError):
        quantize(uniform_ensemble(10), 3)  # 0.1 * 2 rounds to 0 everywhere


def test_quantize_regrids_when_rounding_overshoots():
    # nearest rounding gives 6 + 8*1 = 14 tenths; result must still be on the grid
    p = np.array([0.56] + [0.055] * 8)
    q = quantize(Ensemble(p), 11).probabilities
    assert abs(q.sum() - 1) < 1e-12
    assert np.allclose(q * 10, np.rint(q * 10))


@settings(max_examples=300, deadline=None)
@given(p=prob_vectors, k=st.integers(2, 50))
def test_quantize_idempotent_and_normalized(p, k):
    e = Ensemble(p)
    try:
        q = quantize(e, k)
    except ValueError:
        return
    assert abs(q.probabilities.sum() - 1) < 1e-12
    assert quantize(q, k) == q


def test_json_round_trip():
    e = Ensemble(np.array([0.25, 0.75]))
    assert json.loads(e.to_json()) == [0.25, 0.75]
    assert Ensemble.from_json(e.to_json()) == e
