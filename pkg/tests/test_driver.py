import numpy as np
import pytest
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from snapshot_attack import driver, snapshot
from snapshot_attack.driver import BenchRow, Outcome, ReducedScheduleSpec

FIPS_KEY = bytes(range(16))
FIPS_PT = bytes.fromhex("00112233445566778899aabbccddeeff")
FIPS_CT = bytes.fromhex("69c4e0d86a7b0430d8cdb78070b4c55a")


def ecb(key: bytes, pt: bytes) -> bytes:
    enc = Cipher(algorithms.AES(key), modes.ECB()).encryptor()
    return enc.update(pt) + enc.finalize()


def test_three_share_combination():
    assert driver.combine_shares([0xA6, 0x28, 0x39]) == 0xB7
    assert driver.combine_shares([]) == 0


def test_verify_key_known_answer():
    assert driver.verify_key(FIPS_KEY, FIPS_PT, FIPS_CT)
    wrong = bytes([FIPS_KEY[0] ^ 1]) + FIPS_KEY[1:]
    assert not driver.verify_key(wrong, FIPS_PT, FIPS_CT)


@settings(max_examples=50, deadline=None)
@given(st.binary(min_size=16, max_size=16), st.binary(min_size=16, max_size=16), st.integers(0, 127))
def test_verify_key_against_library_and_avalanche(key, pt, bit):
    ct = ecb(key, pt)
    assert driver.verify_key(key, pt, ct)
    flipped = bytearray(key)
    flipped[bit // 8] ^= 1 << (bit % 8)
    assert not driver.verify_key(bytes(flipped), pt, ct)


@settings(max_examples=50, deadline=None)
@given(st.binary(min_size=16, max_size=16), st.binary(min_size=16, max_size=16))
def test_recover_key_from_round1_state(key, pt):
    s = oracles.round1_state(key, pt)["S"]
    assert driver.recover_key_from_round1_state(s, pt) == key


def test_recover_key_rejects_bad_lengths():
    with pytest.raises(ValueError):
        driver.recover_key_from_round1_state(bytes(15), bytes(16))


def test_plant_is_window_independent():
    a = driver.plant(1, 16, 18, seed=3, reduced=ReducedScheduleSpec())
    b = driver.plant(1, 17, 20, seed=3, reduced=ReducedScheduleSpec())
    assert a.key == b.key and a.plaintext == b.plaintext
    assert np.array_equal(a.placement.permutation, b.placement.permutation)
    common = {o.cycle: o.bits for o in a.observations}
    for o in b.observations:
        if o.cycle in common:
            assert np.array_equal(o.bits, common[o.cycle])
    assert a.n == 8 * 8 * 2 + 52


@pytest.mark.parametrize("d", [2, 4])
def test_scenario1_recovers_every_trial(d):
    for trial in range(100):
        pl = driver.plant(d, 16, 16, seed=[11, d, trial])
        loc = driver.key_locations(pl.placement, d, pl.table)
        res = driver.scenario1_direct(pl.observations[0], loc, d, plaintext=pl.plaintext,
                                      ciphertext=pl.ciphertext)
        assert res.candidates == [pl.key] and res.verified == [True]
        assert res.bits_read == 128 * (d + 1)


@pytest.mark.parametrize("d,n_cands", [(1, 1), (2, 2)])
def test_scenario1_unlabeled(d, n_cands):
    pl = driver.plant(d, 16, 16, seed=5)
    loc = driver.key_locations(pl.placement, d, pl.table)
    inverted = snapshot.ObservationVector(16, 1 - pl.observations[0].bits)
    res = driver.scenario1_direct(inverted, loc, d, unlabeled=True, plaintext=pl.plaintext,
                                  ciphertext=pl.ciphertext)
    assert len(res.candidates) == n_cands and pl.key in res.candidates
    assert sum(res.verified) == 1


def test_scenario1_rejects_bad_locations():
    pl = driver.plant(1, 16, 16, seed=5)
    with pytest.raises(ValueError):
        driver.scenario1_direct(pl.observations[0], np.zeros((16, 3, 8), int), 1)
    with pytest.raises(ValueError):
        driver.scenario1_direct(pl.observations[0], np.full((16, 2, 8), 10_000), 1)
    with pytest.raises(ValueError):
        driver.key_locations(pl.placement, 1, pl.table, cycle=1)


def test_scenario2_d0_recovers():
    pl = driver.plant(0, 16, 32, seed=[0, 0, 0], reduced=ReducedScheduleSpec())
    res = driver.scenario2_sat(pl.observations, 16, 0, pl.plaintext, pl.table, budget_s=120)
    assert res.outcome is Outcome.RECOVERED and res.key == pl.key
    assert res.as_dict()["key"] == pl.key.hex()


def test_scenario2_corrupted_snapshots_unsat():
    pl = driver.plant(0, 16, 20, seed=4, reduced=ReducedScheduleSpec())
    # every register reads all ones, which no plaintext-consistent state explains
    obs = [snapshot.ObservationVector(o.cycle, np.ones_like(o.bits)) for o in pl.observations]
    res = driver.scenario2_sat(obs, 16, 0, pl.plaintext, pl.table, budget_s=120)
    assert res.outcome is Outcome.UNSAT and res.key is None


def test_bench_zero_trials():
    assert driver.bench_table([0, 1], [17], 0) == []
    assert driver.summarize([]) == {"cells": [], "minimum_window": {}}


def test_bench_rejects_windows():
    with pytest.raises(ValueError):
        driver.bench_table([0], [22], 1)


def row(d, c, t, outcome):
    return BenchRow(d, c, t, outcome, 0.0, 0.0, 1, 1)


def test_minimum_windows():
    rows = [row(0, 16, 0, "AMBIGUOUS"), row(0, 17, 0, "RECOVERED"), row(0, 17, 1, "RECOVERED"),
            row(1, 17, 0, "RECOVERED"), row(1, 17, 1, "TIMEOUT"), row(1, 18, 0, "RECOVERED"),
            row(2, 18, 0, "TIMEOUT")]
    assert driver.minimum_windows(rows) == {0: 17, 1: 18, 2: None}
    cells = driver.summarize(rows)["cells"]
    assert cells[2] == {"d": 1, "cycles": 17, "trials": 2, "RECOVERED": 1, "AMBIGUOUS": 0,
                        "TIMEOUT": 1, "UNSAT": 0, "mean_encode_ms": 0.0, "mean_solve_ms": 0.0,
                        "n_vars": 1, "n_clauses": 1}


def test_bench_csv_and_summary(tmp_path):
    rows = driver.bench_table([0], [16, 17], 1, budget_s=120)
    assert [(r.cycles, r.outcome) for r in rows][1] == (17, "RECOVERED")
    assert rows[0].outcome in ("AMBIGUOUS", "RECOVERED")
    driver.write_bench_csv(rows, tmp_path / "b.csv")
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "d,cycles,trial,outcome,encode_ms,solve_ms,n_vars,n_clauses"
    assert len(lines) == 3
    driver.write_summary_json(rows, tmp_path / "s.json")
    assert '"minimum_window"' in (tmp_path / "s.json").read_text()
