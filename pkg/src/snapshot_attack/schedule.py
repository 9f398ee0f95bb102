"""Symbolic register schedule of the serialized masked AES core.

The table lists, for each of the 32 byte registers (16 state rows followed by
16 key rows) and each clock cycle 1..36, which cipher byte the register holds.
Simulator and SAT encoder both read this one table.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .cipher import MIX_MATRIX

N_CYCLES = 36
FIRST_FULL_CYCLE = 16


class SymKind(enum.Enum):
    EMPTY = "-"
    K = "K"
    S = "S"
    M = "M"
    K2 = "K'"
    S2 = "S'"
    P = "P"  # plaintext byte; never stored in a register, only bound as a constant


_KIND_ORDER = {k: i for i, k in enumerate(SymKind)}


@dataclass(frozen=True)
class CellSymbol:
    kind: SymKind
    index: int | None = None

    def __post_init__(self) -> None:
        if self.kind is SymKind.EMPTY:
            if self.index is not None:
                raise ValueError("EMPTY carries no byte index")
        elif self.index is None or not 0 <= self.index <= 15:
            raise ValueError(f"byte index must be in [0, 15], got {self.index}")

    def __str__(self) -> str:
        if self.kind is SymKind.EMPTY:
            return "-"
        return f"{self.kind.value}{self.index}"

    __repr__ = __str__

    def __lt__(self, other: CellSymbol) -> bool:
        return (_KIND_ORDER[self.kind], self.index or 0) < (_KIND_ORDER[other.kind], other.index or 0)

    @property
    def is_empty(self) -> bool:
        return self.kind is SymKind.EMPTY

    @classmethod
    def parse(cls, text: str) -> CellSymbol:
        text = text.strip()
        if text in ("-", ""):
            return EMPTY
        for kind in (SymKind.K2, SymKind.S2, SymKind.K, SymKind.S, SymKind.M, SymKind.P):
            prefix = kind.value
            if text.startswith(prefix) and text[len(prefix) :].isdigit():
                return cls(kind, int(text[len(prefix) :]))
        raise ValueError(f"unrecognised schedule symbol {text!r}")


EMPTY = CellSymbol(SymKind.EMPTY)


def K(i: int) -> CellSymbol:
    return CellSymbol(SymKind.K, i)


def S(i: int) -> CellSymbol:
    return CellSymbol(SymKind.S, i)


def M(i: int) -> CellSymbol:
    return CellSymbol(SymKind.M, i)


def K2(i: int) -> CellSymbol:
    return CellSymbol(SymKind.K2, i)


def S2(i: int) -> CellSymbol:
    return CellSymbol(SymKind.S2, i)


def P(i: int) -> CellSymbol:
    return CellSymbol(SymKind.P, i)


KEY_SYMBOLS = tuple(K(i) for i in range(16))


@dataclass(frozen=True)
class ScheduleTable:
    """Register contents per (row, cycle).

    ``cells[r][c - 1]`` is the symbol held by row ``r`` at cycle ``c``.
    ``row_ids`` keeps the row numbers of the full table so that a reduced
    table can still be related to the original.  ``update_cells`` lists the
    (row id, cycle) positions the architecture writes by something other than
    a plain byte shift from row ``r + 1``; ``None`` means unknown.
    """

    cells: tuple[tuple[CellSymbol, ...], ...]
    row_ids: tuple[int, ...]
    update_cells: frozenset[tuple[int, int]] | None = None
    shift_source: dict[int, int | None] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if len(self.cells) != len(self.row_ids):
            raise ValueError("one row id per row required")
        if any(len(row) != N_CYCLES for row in self.cells):
            raise ValueError(f"every row must cover {N_CYCLES} cycles")

    @property
    def n_rows(self) -> int:
        return len(self.cells)

    @property
    def n_cycles(self) -> int:
        return N_CYCLES

    def cell(self, row: int, cycle: int) -> CellSymbol:
        return self.cells[row][cycle - 1]

    def column(self, cycle: int) -> tuple[CellSymbol, ...]:
        return tuple(row[cycle - 1] for row in self.cells)

    def symbols(self, first_cycle: int = 1, last_cycle: int = N_CYCLES) -> set[CellSymbol]:
        return {
            s
            for row in self.cells
            for s in row[first_cycle - 1 : last_cycle]
            if not s.is_empty
        }

    def occurrences(self, sym: CellSymbol) -> list[tuple[int, int]]:
        """(row position, cycle) pairs holding ``sym``, in cycle-major order."""
        return [
            (r, c)
            for c in range(1, N_CYCLES + 1)
            for r in range(self.n_rows)
            if self.cells[r][c - 1] == sym
        ]

    def subset(self, row_ids: Sequence[int]) -> ScheduleTable:
        pos = {rid: i for i, rid in enumerate(self.row_ids)}
        missing = [r for r in row_ids if r not in pos]
        if missing:
            raise ValueError(f"rows {missing} not in table")
        return ScheduleTable(
            cells=tuple(self.cells[pos[r]] for r in row_ids),
            row_ids=tuple(row_ids),
            update_cells=self.update_cells,
            shift_source={r: self.shift_source.get(r) for r in row_ids},
        )

    def with_cell(self, row: int, cycle: int, sym: CellSymbol) -> ScheduleTable:
        cells = [list(r) for r in self.cells]
        cells[row][cycle - 1] = sym
        return ScheduleTable(
            tuple(tuple(r) for r in cells), self.row_ids, self.update_cells, self.shift_source
        )

    def to_text(self) -> str:
        return "\n".join(" ".join(f"{str(s):<4}" for s in row).rstrip() for row in self.cells)


_AES_DOM_TABLE = """
-    -    -    -    -    -    -    -    -    -    -    -    -    -    -    K0   K1   K2   K3   S0   M1   M2   M3   S4   M5   M6   M7   S8   M9   M10  M11  S12  M13  M14  M15  K'0
-    -    -    -    -    -    -    -    -    -    -    -    -    -    K0   K1   K2   K3   S0   S5   M2   M3   S4   S9   M6   M7   S8   S13  M10  M11  S12  S1   M14  M15  K'0  K'1
-    -    -    -    -    -    -    -    -    -    -    -    -    K0   K1   K2   K3   S0   S1   S10  M3   S4   S9   S14  M7   S8   S13  S2   M11  S12  S1   S6   M15  K'0  K'1  K'2
-    -    -    -    -    -    -    -    -    -    -    -    K0   K1   K2   K3   S0   S1   S2   S15  S4   S9   S14  S3   S8   S13  S2   S7   S12  S1   S6   S11  K'0  K'1  K'2  K'3
-    -    -    -    -    -    -    -    -    -    -    K0   K1   K2   K3   S0   S1   S2   S3   S4   S9   S14  S3   S8   S13  S2   S7   S12  S1   S6   S11  K'0  K'1  K'2  K'3  S'0
-    -    -    -    -    -    -    -    -    -    K0   K1   K2   K3   S0   S1   S2   S3   S4   S9   S14  S3   S8   S13  S2   S7   S12  S1   S6   S11  K'0  K'1  K'2  K'3  S'0  S'1
-    -    -    -    -    -    -    -    -    K0   K1   K2   K3   S0   S1   S2   S3   S4   S5   S14  S3   S8   S13  S2   S7   S12  S1   S6   S11  K'0  K'1  K'2  K'3  S'0  S'1  S'2
-    -    -    -    -    -    -    -    K0   K1   K2   K3   S0   S1   S2   S3   S4   S5   S6   S3   S8   S13  S2   S7   S12  S1   S6   S11  K'0  K'1  K'2  K'3  S'0  S'1  S'2  S'3
-    -    -    -    -    -    -    K0   K1   K2   K3   S0   S1   S2   S3   S4   S5   S6   S7   S8   S13  S2   S7   S12  S1   S6   S11  K'0  K'1  K'2  K'3  S'0  S'1  S'2  S'3  S'4
-    -    -    -    -    -    K0   K1   K2   K3   S0   S1   S2   S3   S4   S5   S6   S7   S8   S13  S2   S7   S12  S1   S6   S11  K'0  K'1  K'2  K'3  S'0  S'1  S'2  S'3  S'4  S'5
-    -    -    -    -    K0   K1   K2   K3   S0   S1   S2   S3   S4   S5   S6   S7   S8   S9   S2   S7   S12  S1   S6   S11  K'0  K'1  K'2  K'3  S'0  S'1  S'2  S'3  S'4  S'5  S'6
-    -    -    -    K0   K1   K2   K3   S0   S1   S2   S3   S4   S5   S6   S7   S8   S9   S10  S7   S12  S1   S6   S11  K'0  K'1  K'2  K'3  S'0  S'1  S'2  S'3  S'4  S'5  S'6  S'7
-    -    -    K0   K1   K2   K3   S0   S1   S2   S3   S4   S5   S6   S7   S8   S9   S10  S11  S12  S1   S6   S11  K'0  K'1  K'2  K'3  S'0  S'1  S'2  S'3  S'4  S'5  S'6  S'7  S'8
-    -    K0   K1   K2   K3   S0   S1   S2   S3   S4   S5   S6   S7   S8   S9   S10  S11  S12  S1   S6   S11  K'0  K'1  K'2  K'3  S'0  S'1  S'2  S'3  S'4  S'5  S'6  S'7  S'8  S'9
-    K0   K1   K2   K3   S0   S1   S2   S3   S4   S5   S6   S7   S8   S9   S10  S11  S12  S13  S6   S11  K'0  K'1  K'2  K'3  S'0  S'1  S'2  S'3  S'4  S'5  S'6  S'7  S'8  S'9  S'10
K0   K1   K2   K3   S0   S1   S2   S3   S4   S5   S6   S7   S8   S9   S10  S11  S12  S13  S14  S11  K'0  K'1  K'2  K'3  S'0  S'1  S'2  S'3  S'4  S'5  S'6  S'7  S'8  S'9  S'10 S'11
-    -    -    -    -    -    -    -    -    -    -    -    -    -    -    K0   K1   K2   K3   K0   K1   K2   K3   K4   K5   K6   K7   K8   K9   K10  K11  K12  K13  K14  K15  K'0
-    -    -    -    -    -    -    -    -    -    -    -    -    -    K0   K1   K2   K3   K0   K1   K2   K3   K4   K5   K6   K7   K8   K9   K10  K11  K12  K13  K14  K15  K'0  K'1
-    -    -    -    -    -    -    -    -    -    -    -    -    K0   K1   K2   K3   K0   K1   K2   K3   K4   K5   K6   K7   K8   K9   K10  K11  K12  K13  K14  K15  K'0  K'1  K'2
-    -    -    -    -    -    -    -    -    -    -    -    K0   K1   K2   K3   K0   K1   K2   K3   K4   K5   K6   K7   K8   K9   K10  K11  K12  K13  K14  K15  K'0  K'1  K'2  K'3
-    -    -    -    -    -    -    -    -    -    -    K4   K5   K6   K7   K4   K5   K6   K7   K4   K5   K6   K7   K8   K9   K10  K11  K12  K13  K14  K15  K'4  K'5  K'6  K'7  K'4
-    -    -    -    -    -    -    -    -    -    K4   K5   K6   K7   K4   K5   K6   K7   K4   K5   K6   K7   K8   K9   K10  K11  K12  K13  K14  K15  K'4  K'5  K'6  K'7  K'4  K'5
-    -    -    -    -    -    -    -    -    K4   K5   K6   K7   K4   K5   K6   K7   K4   K5   K6   K7   K8   K9   K10  K11  K12  K13  K14  K15  K'4  K'5  K'6  K'7  K'4  K'5  K'6
-    -    -    -    -    -    -    -    K4   K5   K6   K7   K4   K5   K6   K7   K4   K5   K6   K7   K8   K9   K10  K11  K12  K13  K14  K15  K'4  K'5  K'6  K'7  K'4  K'5  K'6  K'7
-    -    -    -    -    -    -    K4   K5   K6   K7   K8   K9   K10  K11  K8   K9   K10  K11  K8   K9   K10  K11  K12  K13  K14  K15  K'4  K'5  K'6  K'7  K'8  K'9  K'10 K'11 K'8
-    -    -    -    -    -    K4   K5   K6   K7   K8   K9   K10  K11  K8   K9   K10  K11  K8   K9   K10  K11  K12  K13  K14  K15  K'4  K'5  K'6  K'7  K'8  K'9  K'10 K'11 K'8  K'9
-    -    -    -    -    K4   K5   K6   K7   K8   K9   K10  K11  K8   K9   K10  K11  K8   K9   K10  K11  K12  K13  K14  K15  K'4  K'5  K'6  K'7  K'8  K'9  K'10 K'11 K'8  K'9  K'10
-    -    -    -    K4   K5   K6   K7   K8   K9   K10  K11  K8   K9   K10  K11  K8   K9   K10  K11  K12  K13  K14  K15  K'4  K'5  K'6  K'7  K'8  K'9  K'10 K'11 K'8  K'9  K'10 K'11
-    -    -    -    -    -    -    -    -    -    -    -    -    -    -    K12  K13  K14  K15  K12  K13  K14  K15  K'0  K'1  K'2  K'3  K'4  K'5  K'6  K'7  K'8  K'9  K'10 K'11 K'12
-    -    -    -    -    -    -    -    -    -    -    -    -    -    K12  K13  K14  K15  K12  K13  K14  K15  K'0  K'1  K'2  K'3  K'4  K'5  K'6  K'7  K'8  K'9  K'10 K'11 K'12 K'13
-    -    -    -    -    -    -    -    -    -    -    -    -    K12  K13  K14  K15  K12  K13  K14  K15  K'0  K'1  K'2  K'3  K'4  K'5  K'6  K'7  K'8  K'9  K'10 K'11 K'12 K'13 K'14
-    -    -    -    -    -    -    -    -    -    -    -    K12  K13  K14  K15  K12  K13  K14  K15  K'0  K'1  K'2  K'3  K'4  K'5  K'6  K'7  K'8  K'9  K'10 K'11 K'12 K'13 K'14 K'15"""


def _aes_dom_update_cells() -> frozenset[tuple[int, int]]:
    cells: set[tuple[int, int]] = set()
    for c in range(1, N_CYCLES + 1):
        cells |= {(15, c), (31, c)}  # heads of the state and key shift chains
    cells |= {(r, 20) for r in range(16)}  # ShiftRows lands with the last SubBytes byte
    cells |= {(r, c) for c in (21, 25, 29, 33) for r in range(3)}  # MixColumns outputs
    cells |= {(r, c) for r in (19, 23, 27) for c in range(13, 21)}  # key word load/rotate
    cells |= {(27, c) for c in range(5, 13)} | {(27, c) for c in range(25, 33)}
    cells |= {(r, c) for r in (19, 23) for c in range(33, N_CYCLES + 1)}
    return frozenset(cells)


def _chain_sources(row_ids: Iterable[int]) -> dict[int, int | None]:
    return {r: (None if r in (15, 31) else r + 1) for r in row_ids}


def _parse_rows(text: str) -> tuple[tuple[CellSymbol, ...], ...]:
    return tuple(
        tuple(CellSymbol.parse(tok) for tok in line.split())
        for line in text.strip().splitlines()
    )


_TABLE_CACHE: ScheduleTable | None = None


def load_schedule() -> ScheduleTable:
    """The embedded 32-row, 36-cycle AES-DOM register schedule."""
    global _TABLE_CACHE
    if _TABLE_CACHE is None:
        cells = _parse_rows(_AES_DOM_TABLE)
        _TABLE_CACHE = ScheduleTable(
            cells=cells,
            row_ids=tuple(range(len(cells))),
            update_cells=_aes_dom_update_cells(),
            shift_source=_chain_sources(range(len(cells))),
        )
    return _TABLE_CACHE


def read_schedule_csv(path: str | Path) -> ScheduleTable:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != [f"cycle_{c}" for c in range(1, N_CYCLES + 1)]:
            raise ValueError("schedule CSV header must be cycle_1..cycle_36")
        cells = tuple(tuple(CellSymbol.parse(tok) for tok in row) for row in reader if row)
    return ScheduleTable(cells=cells, row_ids=tuple(range(len(cells))))


def write_schedule_csv(table: ScheduleTable, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"cycle_{c}" for c in range(1, N_CYCLES + 1)])
        for row in table.cells:
            writer.writerow([str(s) for s in row])


# -- relations ---------------------------------------------------------------


class RelationKind(enum.Enum):
    SBOX_ADD = "SBOX_ADD"
    MIXCOL = "MIXCOL"
    KEYSCHED = "KEYSCHED"
    SBOX_ROUND2 = "SBOX_ROUND2"


Term = tuple[int, CellSymbol]  # (GF(2^8) coefficient, symbol)


@dataclass(frozen=True)
class LinkRelation:
    """``output = XOR(c*x for linear) ^ Sbox(XOR(c*x for sbox_in)) ^ const``.

    The Sbox term is absent when ``sbox_in`` is empty.
    """

    kind: RelationKind
    output: CellSymbol
    linear: tuple[Term, ...] = ()
    sbox_in: tuple[Term, ...] = ()
    const: int = 0

    @property
    def operands(self) -> tuple[CellSymbol, ...]:
        syms = [self.output] + [s for _, s in self.linear] + [s for _, s in self.sbox_in]
        return tuple(dict.fromkeys(syms))

    @property
    def register_operands(self) -> tuple[CellSymbol, ...]:
        return tuple(s for s in self.operands if s.kind is not SymKind.P)

    def evaluate(self, values: dict[CellSymbol, int]) -> int:
        from .cipher import SBOX, gf_mul

        acc = self.const
        for coef, sym in self.linear:
            acc ^= gf_mul(coef, values[sym])
        if self.sbox_in:
            x = 0
            for coef, sym in self.sbox_in:
                x ^= gf_mul(coef, values[sym])
            acc ^= SBOX[x]
        return acc

    def holds(self, values: dict[CellSymbol, int]) -> bool:
        return values[self.output] == self.evaluate(values)


def shift_rows_source(j: int) -> int:
    """Index of the SubBytes byte that ShiftRows moves to position ``j``."""
    col, row = divmod(j, 4)
    return 4 * ((col + row) % 4) + row


def mixcolumn_terms(j: int) -> tuple[Term, ...]:
    """MixColumns output byte ``j`` as GF(2^8) terms over the S bytes."""
    col, row = divmod(j, 4)
    return tuple(
        (MIX_MATRIX[row][k], S(shift_rows_source(4 * col + k))) for k in range(4)
    )


def architecture_relations(table: ScheduleTable) -> list[LinkRelation]:
    """Every relation the AES round-1/key-schedule structure can contribute.

    MixColumns bytes that never appear in ``table`` are folded into the
    round-2 Sbox input as their linear combination of S bytes.
    """
    present = table.symbols()
    rel: list[LinkRelation] = []
    for j in range(16):
        rel.append(LinkRelation(RelationKind.SBOX_ADD, S(j), sbox_in=((1, P(j)), (1, K(j)))))
    for j in range(16):
        rel.append(LinkRelation(RelationKind.MIXCOL, M(j), linear=mixcolumn_terms(j)))
    for i in range(16):
        if i < 4:
            rel.append(
                LinkRelation(
                    RelationKind.KEYSCHED,
                    K2(i),
                    linear=((1, K(i)),),
                    sbox_in=((1, K(12 + (i + 1) % 4)),),
                    const=0x01 if i == 0 else 0,
                )
            )
        else:
            rel.append(
                LinkRelation(RelationKind.KEYSCHED, K2(i), linear=((1, K(i)), (1, K2(i - 4))))
            )
    for j in range(16):
        mix = ((1, M(j)),) if M(j) in present else mixcolumn_terms(j)
        rel.append(LinkRelation(RelationKind.SBOX_ROUND2, S2(j), sbox_in=mix + ((1, K2(j)),)))
    return rel


def _check_window(start_cycle: int, length: int) -> None:
    if length < 0:
        raise ValueError("window length must be non-negative")
    if start_cycle < FIRST_FULL_CYCLE or start_cycle + length - 1 > N_CYCLES:
        raise ValueError(
            f"window [{start_cycle}, {start_cycle + length - 1}] outside "
            f"[{FIRST_FULL_CYCLE}, {N_CYCLES}]"
        )


def relations_for_window(
    table: ScheduleTable,
    start_cycle: int,
    length: int,
    plaintext: Sequence[int] | None = None,
) -> tuple[list[LinkRelation], list[tuple[CellSymbol, int | None]]]:
    """Relations whose register operands all occur inside the window.

    Returns the relations plus the plaintext bindings they need; a binding's
    value is ``None`` when no plaintext was supplied.
    """
    _check_window(start_cycle, length)
    if length == 0:
        return [], []
    window_syms = table.symbols(start_cycle, start_cycle + length - 1)
    rels = [
        r
        for r in architecture_relations(table)
        if all(s in window_syms for s in r.register_operands)
    ]
    pt_syms = sorted({s for r in rels for s in r.operands if s.kind is SymKind.P})
    bindings = [(s, None if plaintext is None else int(plaintext[s.index])) for s in pt_syms]
    return rels, bindings


# -- validation --------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    row: int
    cycle: int
    reason: str


@dataclass
class ValidationReport:
    violations: list[Violation]

    @property
    def ok(self) -> bool:
        return not self.violations

    def coordinates(self) -> list[tuple[int, int]]:
        return [(v.row, v.cycle) for v in self.violations]


_COMPUTED = (SymKind.M, SymKind.K2, SymKind.S2)


def _shift_mismatch(table: ScheduleTable, r: int, c: int) -> bool:
    rid = table.row_ids[r]
    if c < 2 or (table.update_cells is not None and (rid, c) in table.update_cells):
        return False
    src_id = table.shift_source.get(rid, rid + 1) if table.shift_source else rid + 1
    if src_id is None or src_id not in table.row_ids:
        return False
    src = table.row_ids.index(src_id)
    here, before = table.cell(r, c), table.cell(src, c - 1)
    if here == before:
        return False
    if table.update_cells is None:
        # no architecture metadata: accept any move or freshly produced byte
        if here in table.column(c - 1) or here.kind in _COMPUTED or here.is_empty:
            return False
        if table.occurrences(here)[0] == (r, c):
            return False
    return True


def validate_schedule(table: ScheduleTable) -> ValidationReport:
    """Check shift consistency, cycle-16 completeness and relation closure.

    A shift mismatch is reported only at the cell where it originates: a
    cell whose own source already mismatches is assumed to have inherited
    the error.
    """
    out: list[Violation] = []
    for c in range(2, N_CYCLES + 1):
        for r in range(table.n_rows):
            if not _shift_mismatch(table, r, c):
                continue
            rid = table.row_ids[r]
            src_id = (table.shift_source or {}).get(rid, rid + 1)
            src = table.row_ids.index(src_id) if src_id in table.row_ids else None
            if src is not None and _shift_mismatch(table, src, c - 1):
                continue
            out.append(Violation(rid, c, "byte-serial shift broken"))

    for r in range(table.n_rows):
        if table.cell(r, FIRST_FULL_CYCLE).is_empty:
            out.append(Violation(table.row_ids[r], FIRST_FULL_CYCLE, "register empty at cycle 16"))

    if table.n_rows == 32 and not any(v.reason.startswith("register empty") for v in out):
        key_block = {table.cell(r, FIRST_FULL_CYCLE) for r in range(16, 32)}
        for sym in KEY_SYMBOLS:
            if sym not in key_block:
                out.append(Violation(-1, FIRST_FULL_CYCLE, f"{sym} missing from key rows"))

    present = table.symbols()
    for rel in architecture_relations(table):
        if rel.output not in present:
            continue
        for sym in rel.register_operands:
            if sym not in present:
                r, c = table.occurrences(rel.output)[0]
                out.append(Violation(table.row_ids[r], c, f"{rel.output} needs absent {sym}"))
    return ValidationReport(out)


# -- reduced schedules -------------------------------------------------------

ONE_COLUMN_ROWS = (0, 1, 2, 3, 16, 17, 18, 19)


def reduced_schedule(rows: Sequence[int] = ONE_COLUMN_ROWS) -> ScheduleTable:
    return load_schedule().subset(rows)
