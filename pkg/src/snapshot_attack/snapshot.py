"""What the attacker sees: register bits under an unknown physical placement.

Logical bit order is row-major, then share, then bit 7 down to bit 0; the
control-logic bits follow the data bits.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dom_sim import RegisterFile


def register_bits(rf: RegisterFile) -> np.ndarray:
    """Flatten a register file into its logical bit vector (uint8 0/1)."""
    data = np.unpackbits(rf.data.reshape(-1, 1), axis=1).reshape(-1)  # MSB first
    return np.concatenate([data, rf.fsm.astype(np.uint8)])


def logical_index(row: int, share: int, bit: int, d: int) -> int:
    """Logical position of ``bit`` (0 = LSB) of share ``share`` in schedule row ``row``."""
    return (row * (d + 1) + share) * 8 + (7 - bit)


@dataclass(frozen=True)
class PlacementMap:
    """Bijection logical bit position -> physical observation index."""

    permutation: np.ndarray

    def __post_init__(self) -> None:
        perm = np.asarray(self.permutation, dtype=np.int64)
        if perm.ndim != 1 or not np.array_equal(np.sort(perm), np.arange(perm.size)):
            raise ValueError("placement must be a permutation of range(n)")
        perm.setflags(write=False)
        object.__setattr__(self, "permutation", perm)

    @property
    def n(self) -> int:
        return int(self.permutation.size)

    def __call__(self, logical: int) -> int:
        return int(self.permutation[logical])

    def inverse(self) -> PlacementMap:
        inv = np.empty_like(self.permutation)
        inv[self.permutation] = np.arange(self.n)
        return PlacementMap(inv)

    def compose(self, other: PlacementMap) -> PlacementMap:
        """``self`` after ``other``."""
        return PlacementMap(self.permutation[other.permutation])


@dataclass(frozen=True)
class ObservationVector:
    cycle: int
    bits: np.ndarray  # (n,) uint8 in {0, 1}

    @property
    def n(self) -> int:
        return int(self.bits.size)


def random_placement(n: int, rng: np.random.Generator) -> PlacementMap:
    if n < 1:
        raise ValueError("placement needs n >= 1")
    return PlacementMap(rng.permutation(n))


def identity_placement(n: int) -> PlacementMap:
    return PlacementMap(np.arange(n))


def place(rf: RegisterFile, pm: PlacementMap) -> ObservationVector:
    bits = register_bits(rf)
    if bits.size != pm.n:
        raise ValueError(f"placement covers {pm.n} bits, register file has {bits.size}")
    out = np.empty_like(bits)
    out[pm.permutation] = bits
    return ObservationVector(rf.cycle, out)


def unplace(obs: ObservationVector, pm: PlacementMap) -> np.ndarray:
    """Logical bit vector recovered from an observation (test oracle use)."""
    if obs.n != pm.n:
        raise ValueError("size mismatch")
    return obs.bits[pm.permutation]


def observe(register_files: Iterable[RegisterFile], pm: PlacementMap) -> list[ObservationVector]:
    """Snapshots of consecutive cycles, all under the one placement ``pm``."""
    return [place(rf, pm) for rf in register_files]


def corrupt(obs: ObservationVector, flip_prob: float, rng: np.random.Generator) -> ObservationVector:
    if not 0.0 <= flip_prob <= 1.0:
        raise ValueError("flip_prob must be a probability")
    flips = (rng.random(obs.n) < flip_prob).astype(np.uint8)
    return ObservationVector(obs.cycle, obs.bits ^ flips)


def write_snapshots_csv(observations: Sequence[ObservationVector], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cycle", "obs_index", "bit"])
        for obs in observations:
            for j, b in enumerate(obs.bits):
                w.writerow([obs.cycle, j, int(b)])


def read_snapshots_csv(path: str | Path) -> list[ObservationVector]:
    by_cycle: dict[int, dict[int, int]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            by_cycle.setdefault(int(row["cycle"]), {})[int(row["obs_index"])] = int(row["bit"])
    out = []
    for cycle in sorted(by_cycle):
        bits = by_cycle[cycle]
        if sorted(bits) != list(range(len(bits))):
            raise ValueError(f"cycle {cycle}: observation indices are not contiguous")
        out.append(ObservationVector(cycle, np.array([bits[j] for j in range(len(bits))], np.uint8)))
    return out


def write_placement_csv(pm: PlacementMap, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["logical_index", "obs_index"])
        for i, j in enumerate(pm.permutation):
            w.writerow([i, int(j)])


def read_placement_csv(path: str | Path) -> PlacementMap:
    with open(path, newline="") as fh:
        pairs = sorted((int(r["logical_index"]), int(r["obs_index"])) for r in csv.DictReader(fh))
    return PlacementMap(np.array([j for _, j in pairs]))
