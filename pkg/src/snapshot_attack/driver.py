"""End-to-end attacks and the window-size benchmark.

Scenario 1 reads the key register bits directly (their physical positions
are known). Scenario 2 knows nothing about placement and solves for it.
"""

from __future__ import annotations

import csv
import enum
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import reduce
from operator import xor
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import cipher, dom_sim, snapshot
from .schedule import (
    FIRST_FULL_CYCLE,
    KEY_SYMBOLS,
    ONE_COLUMN_ROWS,
    ScheduleTable,
    load_schedule,
    reduced_schedule,
)
from .sat import encode, solvers

FULL_FSM_BITS = dom_sim.DEFAULT_FSM_BITS
REDUCED_FSM_BITS = 52


# -- key checks ------------------------------------------------------------------


def verify_key(key: Sequence[int], plaintext: Sequence[int], ciphertext: Sequence[int]) -> bool:
    return cipher.encrypt_block(key, plaintext) == bytes(ciphertext)


def recover_key_from_round1_state(s: Sequence[int], plaintext: Sequence[int]) -> bytes:
    """Key from the first-round SubBytes output and the plaintext."""
    if len(s) != 16 or len(plaintext) != 16:
        raise ValueError("need 16 state bytes and 16 plaintext bytes")
    return bytes(cipher.inv_sbox(x) ^ p for x, p in zip(s, plaintext))


def combine_shares(shares: Iterable[int]) -> int:
    return reduce(xor, shares, 0)


# -- planted instances --------------------------------------------------------------


@dataclass(frozen=True)
class ReducedScheduleSpec:
    rows: tuple[int, ...] = ONE_COLUMN_ROWS
    fsm_bits: int = REDUCED_FSM_BITS

    def table(self) -> ScheduleTable:
        return reduced_schedule(self.rows)


@dataclass
class PlantedInstance:
    key: bytes
    plaintext: bytes
    d: int
    table: ScheduleTable
    register_files: list[dom_sim.RegisterFile]
    placement: snapshot.PlacementMap
    observations: list[snapshot.ObservationVector]

    @property
    def ciphertext(self) -> bytes:
        return cipher.encrypt_block(self.key, self.plaintext)

    @property
    def n(self) -> int:
        return self.placement.n


def plant(
    d: int,
    first_cycle: int,
    last_cycle: int,
    seed: int | Sequence[int],
    reduced: ReducedScheduleSpec | None = None,
    fsm_bits: int | None = None,
    reshare_mode: dom_sim.ReshareMode = dom_sim.ReshareMode.FRESH_EVERY_CYCLE,
) -> PlantedInstance:
    """Random key, plaintext, masks and placement, all derived from ``seed``.

    The cycle range only selects which snapshots are returned; the secret
    material does not depend on it, so different windows of one seed describe
    the same encryption.
    """
    rng = np.random.default_rng(seed)
    key = bytes(rng.integers(0, 256, 16, dtype=np.uint8))
    pt = bytes(rng.integers(0, 256, 16, dtype=np.uint8))
    mask_seed = int(rng.integers(0, 2**63))
    table = reduced.table() if reduced else load_schedule()
    if fsm_bits is None:
        fsm_bits = reduced.fsm_bits if reduced else FULL_FSM_BITS
    cfg = dom_sim.TraceConfig(key, pt, d=d, fsm_bits=fsm_bits, seed=mask_seed, reshare_mode=reshare_mode)
    pm = snapshot.random_placement(cfg.n_bits(table.n_rows), rng)
    rfs = dom_sim.simulate(cfg, first_cycle, last_cycle, schedule=table)
    return PlantedInstance(key, pt, d, table, rfs, pm, snapshot.observe(rfs, pm))


# -- scenario 1 ------------------------------------------------------------------------


def key_locations(pm: snapshot.PlacementMap, d: int, table: ScheduleTable | None = None,
                  cycle: int = FIRST_FULL_CYCLE) -> np.ndarray:
    """Observation indices ``[byte, share, bit]`` of the key register at ``cycle``."""
    table = table or load_schedule()
    col = table.column(cycle)
    loc = np.zeros((16, d + 1, 8), dtype=np.int64)
    for j, sym in enumerate(KEY_SYMBOLS):
        if sym not in col:
            raise ValueError(f"{sym} is not held in any register at cycle {cycle}")
        row = col.index(sym)
        for s in range(d + 1):
            for b in range(8):
                loc[j, s, b] = pm(snapshot.logical_index(row, s, b, d))
    return loc


@dataclass
class Scenario1Result:
    candidates: list[bytes]
    bits_read: int
    verified: list[bool] | None = None


def scenario1_direct(
    obs: snapshot.ObservationVector,
    locations: np.ndarray,
    d: int,
    unlabeled: bool = False,
    plaintext: Sequence[int] | None = None,
    ciphertext: Sequence[int] | None = None,
) -> Scenario1Result:
    """XOR the key shares read at known positions.

    With ``unlabeled`` the reader does not know which template means 1, so
    the all-complemented reading is returned too (it coincides with the first
    candidate when the share count is even).
    """
    locations = np.asarray(locations)
    if locations.shape != (16, d + 1, 8):
        raise ValueError(f"need (16, {d + 1}, 8) key-bit locations, got {locations.shape}")
    if locations.min() < 0 or locations.max() >= obs.n:
        raise ValueError("key-bit locations fall outside the observation")
    bits = obs.bits[locations].astype(np.int64)  # [byte, share, bit]
    shares = (bits << np.arange(8)).sum(axis=-1)
    key = bytes(combine_shares(int(x) for x in row) for row in shares)
    cands = [key]
    if unlabeled:
        other = bytes(combine_shares(int(x) ^ 0xFF for x in row) for row in shares)
        if other != key:
            cands.append(other)
    verified = None
    if plaintext is not None and ciphertext is not None:
        verified = [verify_key(k, plaintext, ciphertext) for k in cands]
    return Scenario1Result(cands, int(bits.size), verified)


# -- scenario 2 --------------------------------------------------------------------------


class Outcome(enum.Enum):
    RECOVERED = "RECOVERED"
    AMBIGUOUS = "AMBIGUOUS"
    TIMEOUT = "TIMEOUT"
    UNSAT = "UNSAT"  # no assignment explains the snapshots (corrupted input)


class Uniqueness(enum.Enum):
    UNIQUE = "UNIQUE"
    ALTERNATE = "ALTERNATE"
    TIMEOUT = "TIMEOUT"


@dataclass
class Scenario2Result:
    outcome: Outcome
    key: bytes | None = None
    alternate_key: bytes | None = None
    stats: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "outcome": self.outcome.value,
            "key": self.key.hex() if self.key else None,
            "alternate_key": self.alternate_key.hex() if self.alternate_key else None,
            "stats": self.stats,
        }


def check_key_unique(
    session: solvers.Session, dm: encode.DecodeMap, first_key: bytes, budget_s: float | None = None
) -> tuple[Uniqueness, bytes | None]:
    """Forbid ``first_key`` (not the share assignment) and solve again."""
    session.add_clause(encode.key_blocking_clause(dm, first_key))
    res = session.solve(budget_s)
    if res.status is solvers.SolveStatus.UNSAT:
        return Uniqueness.UNIQUE, None
    if res.status is solvers.SolveStatus.TIMEOUT:
        return Uniqueness.TIMEOUT, None
    return Uniqueness.ALTERNATE, encode.decode_key(res.assignment, dm)


def scenario2_sat(
    observations: Sequence[snapshot.ObservationVector],
    start_cycle: int,
    d: int,
    plaintext: Sequence[int] | None,
    table: ScheduleTable | None = None,
    budget_s: float | None = None,
    backend: str | None = None,
    solver_path: str | None = None,
    onehot: str = "sequential",
    known_plaintext: bool = True,
    zero_links: bool = True,
    share_order: bool = False,
    parity_links: bool = False,
) -> Scenario2Result:
    """Solve for the key, then block it and solve again to test uniqueness.

    ``zero_links`` adds clauses implied by the observation links that help
    propagation; ``share_order`` keeps one representative per share
    permutation; ``parity_links`` restates each observation link as a
    parity over the coefficients. None of them changes which keys are
    consistent.
    """
    table = table or load_schedule()
    inst = encode.AttackInstance(
        tuple(observations), start_cycle, d, bytes(plaintext) if plaintext is not None else None
    )
    p, dm = encode.encode_instance(
        inst, table, onehot=onehot, known_plaintext=known_plaintext,
        share_order=share_order, zero_links=zero_links, parity_links=parity_links,
    )
    stats = {**p.stats().as_dict(), "encode_ms": dm.encode_ms, "solve_ms": 0.0}
    with solvers.Session(p, backend, solver_path) as sess:
        res = sess.solve(budget_s)
        stats["solve_ms"] = res.solve_ms
        if res.status is solvers.SolveStatus.TIMEOUT:
            return Scenario2Result(Outcome.TIMEOUT, stats=stats)
        if res.status is solvers.SolveStatus.UNSAT:
            return Scenario2Result(Outcome.UNSAT, stats=stats)
        key = encode.decode_key(res.assignment, dm)
        t0 = time.perf_counter()
        uniq, alt = check_key_unique(sess, dm, key, budget_s)
        stats["unique_ms"] = (time.perf_counter() - t0) * 1000.0
    if uniq is Uniqueness.UNIQUE:
        return Scenario2Result(Outcome.RECOVERED, key, stats=stats)
    if uniq is Uniqueness.ALTERNATE:
        return Scenario2Result(Outcome.AMBIGUOUS, key, alt, stats=stats)
    return Scenario2Result(Outcome.TIMEOUT, key, stats=stats)


def share_multiplicity(planted: PlantedInstance, start_cycle: int, length: int,
                       budget_s: float | None = None, backend: str | None = None,
                       zero_links: bool = True) -> dict:
    """Solve, block the exact share assignment, and solve again.

    Returns both decoded keys and whether the share bits differ.
    """
    obs = [o for o in planted.observations if start_cycle <= o.cycle < start_cycle + length]
    inst = encode.AttackInstance(tuple(obs), start_cycle, planted.d, planted.plaintext)
    p, dm = encode.encode_instance(inst, planted.table, zero_links=zero_links)
    with solvers.Session(p, backend) as sess:
        first = sess.solve(budget_s)
        if not first.sat:
            return {"first": first.status.value, "second": None}
        sess.add_clause(encode.share_blocking_clause(first.assignment, dm))
        second = sess.solve(budget_s)
    out = {
        "first": first.status.value,
        "second": second.status.value,
        "first_key": encode.decode_key(first.assignment, dm).hex(),
    }
    if second.sat:
        out["second_key"] = encode.decode_key(second.assignment, dm).hex()
    return out


# -- benchmark ----------------------------------------------------------------------------


BENCH_FIELDS = ["d", "cycles", "trial", "outcome", "encode_ms", "solve_ms", "n_vars", "n_clauses"]


@dataclass(frozen=True)
class BenchRow:
    d: int
    cycles: int
    trial: int
    outcome: str
    encode_ms: float
    solve_ms: float
    n_vars: int
    n_clauses: int
    verified: bool | None = None


@dataclass(frozen=True)
class _TrialJob:
    d: int
    cycles: int
    trial: int
    seed: int
    reduced: ReducedScheduleSpec | None
    budget_s: float | None
    backend: str | None
    timing: bool
    zero_links: bool = True
    share_order: bool = False
    parity_links: bool = False


def _run_trial(job: _TrialJob) -> BenchRow:
    start = FIRST_FULL_CYCLE
    planted = plant(job.d, start, start + job.cycles - 1, [job.seed, job.d, job.trial], job.reduced)
    res = scenario2_sat(
        planted.observations, start, job.d, planted.plaintext, planted.table,
        budget_s=job.budget_s, backend=job.backend,
        zero_links=job.zero_links, share_order=job.share_order, parity_links=job.parity_links,
    )
    verified = None
    if res.outcome is Outcome.RECOVERED:
        verified = verify_key(res.key, planted.plaintext, planted.ciphertext)
        if not verified:
            raise AssertionError(
                f"recovered key fails verification (d={job.d}, cycles={job.cycles}, trial={job.trial})"
            )
    st = res.stats
    return BenchRow(
        job.d, job.cycles, job.trial, res.outcome.value,
        round(st["encode_ms"], 1) if job.timing else 0.0,
        round(st["solve_ms"], 1) if job.timing else 0.0,
        st["n_vars"], st["n_or"] + st["n_xor"], verified,
    )


def bench_table(
    d_range: Iterable[int],
    cycle_range: Iterable[int],
    trials: int,
    reduced: ReducedScheduleSpec | None = ReducedScheduleSpec(),
    budget_s: float | None = 60.0,
    seed: int = 0,
    jobs: int = 1,
    backend: str | None = None,
    timing: bool = False,
    zero_links: bool = True,
    share_order: bool = False,
    parity_links: bool = False,
) -> list[BenchRow]:
    """One row per (d, covered cycles, trial), windows starting at the first
    full cycle.

    Trial ``t`` of order ``d`` reuses the same secret material for every
    window, so rows of one trial differ only in how much the attacker saw.
    Timings are reported as zero unless ``timing`` is set, which keeps the
    output byte-identical across runs.
    """
    jobs_list = [
        _TrialJob(d, c, t, seed, reduced, budget_s, backend, timing, zero_links, share_order,
                  parity_links)
        for d in d_range
        for c in cycle_range
        for t in range(trials)
    ]
    for job in jobs_list:
        if not 1 <= job.cycles <= 36 - FIRST_FULL_CYCLE + 1:
            raise ValueError(f"covered cycles must be in [1, 21], got {job.cycles}")
    if jobs > 1 and len(jobs_list) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_trial, jobs_list))
    else:
        rows = [_run_trial(j) for j in jobs_list]
    return sorted(rows, key=lambda r: (r.d, r.cycles, r.trial))


def write_bench_csv(rows: Sequence[BenchRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BENCH_FIELDS)
        for r in rows:
            w.writerow([getattr(r, f) for f in BENCH_FIELDS])


def summarize(rows: Sequence[BenchRow]) -> dict:
    """Per-(d, cycles) outcome counts and mean times, plus the smallest window
    at which every trial recovered the key."""
    cells: dict[tuple[int, int], list[BenchRow]] = {}
    for r in rows:
        cells.setdefault((r.d, r.cycles), []).append(r)
    out_cells = []
    for (d, c), rs in sorted(cells.items()):
        counts = {o.value: sum(r.outcome == o.value for r in rs) for o in Outcome}
        out_cells.append({
            "d": d, "cycles": c, "trials": len(rs), **counts,
            "mean_encode_ms": round(float(np.mean([r.encode_ms for r in rs])), 1),
            "mean_solve_ms": round(float(np.mean([r.solve_ms for r in rs])), 1),
            "n_vars": int(np.mean([r.n_vars for r in rs])),
            "n_clauses": int(np.mean([r.n_clauses for r in rs])),
        })
    return {"cells": out_cells, "minimum_window": minimum_windows(rows)}


def minimum_windows(rows: Sequence[BenchRow]) -> dict[int, int | None]:
    out: dict[int, int | None] = {}
    for d in sorted({r.d for r in rows}):
        ok = sorted(
            c for c in {r.cycles for r in rows if r.d == d}
            if all(r.outcome == Outcome.RECOVERED.value for r in rows if r.d == d and r.cycles == c)
        )
        out[d] = ok[0] if ok else None
    return out


def write_summary_json(rows: Sequence[BenchRow], path: str | Path) -> None:
    summary = summarize(rows)
    summary["minimum_window"] = {str(k): v for k, v in summary["minimum_window"].items()}
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def bench_rows_as_dicts(rows: Sequence[BenchRow]) -> list[dict]:
    return [asdict(r) for r in rows]
