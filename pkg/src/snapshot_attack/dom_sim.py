"""Ground-truth register contents of the masked serialized AES core."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import cipher
from .schedule import (
    N_CYCLES,
    CellSymbol,
    ScheduleTable,
    SymKind,
    load_schedule,
)

DEFAULT_FSM_BITS = 208


class ReshareMode(enum.Enum):
    FRESH_EVERY_CYCLE = "fresh"
    STABLE_ON_SHIFT = "stable"


@dataclass(frozen=True)
class TraceConfig:
    key: bytes
    plaintext: bytes
    d: int = 1
    fsm_bits: int = DEFAULT_FSM_BITS
    seed: int = 0
    reshare_mode: ReshareMode = ReshareMode.FRESH_EVERY_CYCLE

    def __post_init__(self) -> None:
        object.__setattr__(self, "key", bytes(self.key))
        object.__setattr__(self, "plaintext", bytes(self.plaintext))
        if len(self.key) != 16 or len(self.plaintext) != 16:
            raise ValueError("key and plaintext must be 16 bytes")
        if self.d < 0 or self.fsm_bits < 0:
            raise ValueError("d and fsm_bits must be non-negative")

    def targeted_bits(self, n_rows: int = 32) -> int:
        return n_rows * 8 * (self.d + 1)

    def n_bits(self, n_rows: int = 32) -> int:
        return self.targeted_bits(n_rows) + self.fsm_bits


@dataclass(frozen=True)
class RegisterFile:
    """One clock cycle of register contents.

    ``data[r, s]`` is share ``s`` of schedule row ``r``; ``fsm`` holds the
    control-logic distractor bits.
    """

    cycle: int
    data: np.ndarray  # (rows, d+1) uint8
    fsm: np.ndarray  # (fsm_bits,) uint8 in {0, 1}

    @property
    def d(self) -> int:
        return self.data.shape[1] - 1

    def unshared(self) -> np.ndarray:
        return np.bitwise_xor.reduce(self.data, axis=1)


def symbol_values(key: Sequence[int], plaintext: Sequence[int]) -> dict[CellSymbol, int]:
    """Concrete byte behind every schedule symbol for one encryption.

    Round-1 output is taken before AddRoundKey: ``M`` is MixColumns of the
    shifted SubBytes state and ``S'_j = Sbox(M_j ^ K'_j)``.  All sixteen
    ``M`` bytes are defined even though the table only shows twelve.
    """
    key, plaintext = list(key), list(plaintext)
    s = [cipher.SBOX[p ^ k] for p, k in zip(plaintext, key)]
    m = cipher.mix_columns(cipher.shift_rows(s))
    k2 = cipher.key_schedule_round(key, 1)
    s2 = [cipher.SBOX[a ^ b] for a, b in zip(m, k2)]
    values: dict[CellSymbol, int] = {}
    for kind, vec in (
        (SymKind.K, key),
        (SymKind.S, s),
        (SymKind.M, m),
        (SymKind.K2, k2),
        (SymKind.S2, s2),
        (SymKind.P, plaintext),
    ):
        for i, v in enumerate(vec):
            values[CellSymbol(kind, i)] = v
    return values


def ground_truth_value(sym: CellSymbol, key: Sequence[int], plaintext: Sequence[int]) -> int:
    if sym.is_empty:
        raise ValueError("EMPTY cells have no value")
    return symbol_values(key, plaintext)[sym]


def _lfsr16_bits(seed: int, steps: int) -> int:
    # x^16 + x^14 + x^13 + x^11 + 1, Fibonacci form
    state = seed & 0xFFFF or 0xACE1
    for _ in range(steps):
        bit = (state ^ (state >> 2) ^ (state >> 3) ^ (state >> 5)) & 1
        state = (state >> 1) | (bit << 15)
    return state


def fsm_pattern(cycle: int, fsm_bits: int) -> np.ndarray:
    """Deterministic control-logic bits: an 8-bit cycle counter, then LFSR words."""
    bits = [(cycle >> k) & 1 for k in range(min(8, fsm_bits))]
    group = 0
    while len(bits) < fsm_bits:
        word = _lfsr16_bits(0xACE1 + 0x9E37 * group, cycle)
        bits.extend((word >> k) & 1 for k in range(16))
        group += 1
    return np.array(bits[:fsm_bits], dtype=np.uint8)


def _symbol_seed(sym: CellSymbol) -> list[int]:
    kinds = list(SymKind)
    return [kinds.index(sym.kind), sym.index or 0]


def simulate(
    cfg: TraceConfig,
    first_cycle: int = 1,
    last_cycle: int = N_CYCLES,
    schedule: ScheduleTable | None = None,
) -> list[RegisterFile]:
    """Masked register contents for cycles ``first_cycle..last_cycle``.

    Share randomness is keyed on (seed, cycle) or (seed, symbol), so any
    cycle range of the same config reproduces the same bits.
    """
    if not 1 <= first_cycle <= last_cycle <= N_CYCLES:
        raise ValueError(f"invalid cycle range [{first_cycle}, {last_cycle}]")
    table = schedule or load_schedule()
    values = symbol_values(cfg.key, cfg.plaintext)
    d = cfg.d
    stable: dict[CellSymbol, np.ndarray] = {}

    out = []
    for c in range(first_cycle, last_cycle + 1):
        col = table.column(c)
        data = np.zeros((table.n_rows, d + 1), dtype=np.uint8)
        if cfg.reshare_mode is ReshareMode.FRESH_EVERY_CYCLE:
            rng = np.random.default_rng([cfg.seed, c])
            masks = rng.integers(0, 256, size=(table.n_rows, d), dtype=np.uint8)
            for r, sym in enumerate(col):
                if sym.is_empty:
                    continue
                data[r, :d] = masks[r]
                data[r, d] = np.bitwise_xor.reduce(masks[r], initial=values[sym])
        else:
            for r, sym in enumerate(col):
                if sym.is_empty:
                    continue
                if sym not in stable:
                    rng = np.random.default_rng([cfg.seed, *_symbol_seed(sym)])
                    masks = rng.integers(0, 256, size=d, dtype=np.uint8)
                    stable[sym] = np.append(
                        masks, np.bitwise_xor.reduce(masks, initial=values[sym])
                    ).astype(np.uint8)
                data[r] = stable[sym]
        out.append(RegisterFile(c, data, fsm_pattern(c, cfg.fsm_bits)))
    return out


def write_trace_csv(
    register_files: Sequence[RegisterFile],
    path: str | Path,
    fsm_path: str | Path | None = None,
    row_ids: Sequence[int] | None = None,
) -> None:
    """Dump shares as ``cycle,row,share_index,value_hex`` (and FSM bits separately)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cycle", "row", "share_index", "value_hex"])
        for rf in register_files:
            for r in range(rf.data.shape[0]):
                rid = row_ids[r] if row_ids is not None else r
                for s in range(rf.data.shape[1]):
                    w.writerow([rf.cycle, rid, s, f"{int(rf.data[r, s]):02x}"])
    if fsm_path is not None:
        with open(fsm_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["cycle", "fsm_index", "bit"])
            for rf in register_files:
                for i, b in enumerate(rf.fsm):
                    w.writerow([rf.cycle, i, int(b)])
