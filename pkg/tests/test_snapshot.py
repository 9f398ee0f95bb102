import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snapshot_attack import dom_sim, snapshot
from snapshot_attack.dom_sim import RegisterFile, TraceConfig


def random_rf(rng, rows=4, d=1, fsm=5):
    return RegisterFile(16, rng.integers(0, 256, (rows, d + 1), dtype=np.uint8),
                        rng.integers(0, 2, fsm, dtype=np.uint8))


def test_n1_is_identity():
    pm = snapshot.random_placement(1, np.random.default_rng(0))
    assert pm.permutation.tolist() == [0]
    with pytest.raises(ValueError):
        snapshot.random_placement(0, np.random.default_rng(0))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 1000), st.integers(0, 2**32))
def test_compose_with_inverse(n, seed):
    pm = snapshot.random_placement(n, np.random.default_rng(seed))
    ident = np.arange(n)
    assert np.array_equal(pm.compose(pm.inverse()).permutation, ident)
    assert np.array_equal(pm.inverse().compose(pm).permutation, ident)


def test_placement_uniform_over_permutations():
    rng = np.random.default_rng(2)
    perms = {p: i for i, p in enumerate(itertools.permutations(range(4)))}
    counts = np.zeros(24)
    for _ in range(10_000):
        counts[perms[tuple(snapshot.random_placement(4, rng).permutation.tolist())]] += 1
    chi2 = ((counts - 10_000 / 24) ** 2 / (10_000 / 24)).sum()
    assert chi2 < 49.7  # 99.9% quantile, 23 dof


def test_rejects_non_permutation():
    with pytest.raises(ValueError):
        snapshot.PlacementMap(np.array([0, 0, 1]))


def test_logical_order():
    rf = RegisterFile(1, np.array([[0x80, 0x01]], dtype=np.uint8), np.array([1], dtype=np.uint8))
    bits = snapshot.register_bits(rf)
    assert bits.tolist() == [1, 0, 0, 0, 0, 0, 0, 0] + [0, 0, 0, 0, 0, 0, 0, 1] + [1]
    assert snapshot.logical_index(0, 0, 7, 1) == 0
    assert snapshot.logical_index(0, 1, 0, 1) == 15


def test_identity_placement_is_canonical():
    rf = random_rf(np.random.default_rng(1))
    obs = snapshot.place(rf, snapshot.identity_placement(4 * 16 + 5))
    assert np.array_equal(obs.bits, snapshot.register_bits(rf))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32))
def test_place_preserves_bits(seed):
    rng = np.random.default_rng(seed)
    rf = random_rf(rng)
    pm = snapshot.random_placement(69, rng)
    obs = snapshot.place(rf, pm)
    assert obs.bits.sum() == snapshot.register_bits(rf).sum()
    assert np.array_equal(snapshot.unplace(obs, pm), snapshot.register_bits(rf))
    assert all(obs.bits[pm(i)] == b for i, b in enumerate(snapshot.register_bits(rf)))


def test_size_mismatch():
    rf = random_rf(np.random.default_rng(1))
    with pytest.raises(ValueError):
        snapshot.place(rf, snapshot.identity_placement(10))


def test_simulated_snapshot_length():
    rfs = dom_sim.simulate(TraceConfig(bytes(16), bytes(16), d=1), 16, 18)
    pm = snapshot.random_placement(720, np.random.default_rng(0))
    obs = snapshot.observe(rfs, pm)
    assert [o.cycle for o in obs] == [16, 17, 18] and all(o.n == 720 for o in obs)


def test_corrupt_extremes_and_rate():
    rng = np.random.default_rng(3)
    obs = snapshot.ObservationVector(1, rng.integers(0, 2, 720, dtype=np.uint8))
    assert np.array_equal(snapshot.corrupt(obs, 0.0, rng).bits, obs.bits)
    assert np.array_equal(snapshot.corrupt(obs, 1.0, rng).bits, 1 - obs.bits)
    dist = int((snapshot.corrupt(obs, 0.5, rng).bits != obs.bits).sum())
    assert abs(dist - 360) < 4 * np.sqrt(180)
    with pytest.raises(ValueError):
        snapshot.corrupt(obs, 1.5, rng)


def test_csv_roundtrips(tmp_path):
    rng = np.random.default_rng(4)
    obs = [snapshot.ObservationVector(c, rng.integers(0, 2, 30, dtype=np.uint8)) for c in (16, 17)]
    snapshot.write_snapshots_csv(obs, tmp_path / "s.csv")
    back = snapshot.read_snapshots_csv(tmp_path / "s.csv")
    assert [o.cycle for o in back] == [16, 17]
    assert all(np.array_equal(a.bits, b.bits) for a, b in zip(obs, back))
    pm = snapshot.random_placement(30, rng)
    snapshot.write_placement_csv(pm, tmp_path / "p.csv")
    assert np.array_equal(snapshot.read_placement_csv(tmp_path / "p.csv").permutation, pm.permutation)
