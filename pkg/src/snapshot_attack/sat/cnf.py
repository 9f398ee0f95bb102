"""CNF + XOR problem container, gate helpers, model checking and DIMACS I/O.

Clauses live in flat ``int32`` arrays with ``0`` terminators (the layout
CryptoMiniSat accepts directly). XOR constraints are stored over positive
variables with a separate right-hand-side parity.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np


class EmptyClauseError(ValueError):
    """A constraint that can never be satisfied was emitted at build time."""


def _terminated(rows: np.ndarray) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.int32)
    if rows.ndim != 2:
        raise ValueError("expected a 2-D clause matrix")
    return np.hstack([rows, np.zeros((rows.shape[0], 1), np.int32)]).reshape(-1)


@dataclass(frozen=True)
class ProblemStats:
    n_vars: int
    n_or: int
    n_xor: int

    @property
    def n_clauses(self) -> int:
        return self.n_or + self.n_xor

    def as_dict(self) -> dict[str, int]:
        return {"n_vars": self.n_vars, "n_or": self.n_or, "n_xor": self.n_xor}


@dataclass(frozen=True)
class CheckResult:
    or_violations: np.ndarray
    xor_violations: np.ndarray

    @property
    def ok(self) -> bool:
        return self.or_violations.size == 0 and self.xor_violations.size == 0


class CnfProblem:
    """Mixed OR / parity constraint system with dense variable numbering."""

    def __init__(self) -> None:
        self.n_vars = 0
        self.n_or = 0
        self.n_xor = 0
        self._or_chunks: list[np.ndarray] = []
        self._xor_chunks: list[np.ndarray] = []
        self._rhs_chunks: list[np.ndarray] = []
        self._or_cache: np.ndarray | None = None
        self._xor_cache: tuple[np.ndarray, np.ndarray] | None = None
        self._true: int | None = None
        # (out_var, op, literals, const) for gate outputs, in creation order
        self.definitions: list[tuple[int, str, tuple[int, ...], int]] = []

    # -- variables -------------------------------------------------------

    def new_var(self) -> int:
        self.n_vars += 1
        return self.n_vars

    def new_vars(self, *shape: int) -> np.ndarray:
        count = int(np.prod(shape)) if shape else 1
        first = self.n_vars + 1
        self.n_vars += count
        return np.arange(first, first + count, dtype=np.int64).reshape(shape)

    @property
    def true_lit(self) -> int:
        """A variable fixed to 1, allocated on first use."""
        if self._true is None:
            self._true = self.new_var()
            self.add_clause([self._true])
        return self._true

    # -- constraints -----------------------------------------------------

    def _check_lits(self, lits: np.ndarray) -> None:
        if lits.size and (np.any(lits == 0) or np.abs(lits).max() > self.n_vars):
            raise ValueError("literal refers to an unallocated variable")

    def add_clause(self, lits: Iterable[int]) -> None:
        arr = np.fromiter((int(x) for x in lits), dtype=np.int32)
        if arr.size == 0:
            raise EmptyClauseError("empty OR clause")
        self.add_clauses(arr.reshape(1, -1))

    def add_clauses(self, rows: np.ndarray) -> None:
        """Append equal-width clauses, one per row."""
        rows = np.asarray(rows)
        if rows.shape[0] == 0:
            return
        if rows.shape[1] == 0:
            raise EmptyClauseError("empty OR clause")
        self._check_lits(rows)
        self._or_chunks.append(_terminated(rows))
        self.n_or += rows.shape[0]
        self._or_cache = None

    def add_xor(self, lits: Iterable[int], rhs: int) -> None:
        """Append ``XOR(lits) == rhs``; negative literals flip the parity."""
        parity = int(rhs) & 1
        odd: dict[int, None] = {}
        for lit in lits:
            lit = int(lit)
            if lit < 0:
                parity ^= 1
            v = abs(lit)
            if v in odd:
                del odd[v]
            else:
                odd[v] = None
        if self._true is not None and self._true in odd:
            del odd[self._true]
            parity ^= 1
        if not odd:
            if parity:
                raise EmptyClauseError("XOR constraint reduces to 0 == 1")
            return
        self.add_xors(np.array([list(odd)], dtype=np.int64), np.array([parity]))

    def add_xors(self, rows: np.ndarray, rhs: np.ndarray | int) -> None:
        """Append equal-width XOR constraints over distinct positive variables."""
        rows = np.asarray(rows)
        if rows.shape[0] == 0:
            return
        if rows.shape[1] == 0 or np.any(rows <= 0):
            raise ValueError("vectorized XOR rows need positive variables")
        self._check_lits(rows)
        rhs = np.broadcast_to(np.asarray(rhs, dtype=np.uint8) & 1, (rows.shape[0],))
        self._xor_chunks.append(_terminated(rows))
        self._rhs_chunks.append(np.array(rhs, dtype=np.uint8))
        self.n_xor += rows.shape[0]
        self._xor_cache = None

    # -- gates (Tseitin) -------------------------------------------------

    def and_gate(self, a: int, b: int) -> int:
        o = self.new_var()
        self.add_clauses(np.array([[-o, a], [-o, b]]))
        self.add_clauses(np.array([[o, -a, -b]]))
        self.definitions.append((o, "and", (a, b), 0))
        return o

    def xor_gate(self, lits: Sequence[int], const: int = 0) -> int:
        o = self.new_var()
        self.add_xor([o, *lits], const)
        self.definitions.append((o, "xor", tuple(lits), const & 1))
        return o

    def fill_definitions(self, assignment: np.ndarray) -> None:
        """Evaluate recorded gate outputs in place, given their inputs."""
        def val(lit: int) -> bool:
            return bool(assignment[abs(lit)]) ^ (lit < 0)

        if self._true is not None:
            assignment[self._true] = True
        for out, op, lits, const in self.definitions:
            if op == "and":
                assignment[out] = val(lits[0]) and val(lits[1])
            else:
                acc = bool(const)
                for lit in lits:
                    acc ^= val(lit)
                assignment[out] = acc

    # -- views -----------------------------------------------------------

    def or_flat(self) -> np.ndarray:
        if self._or_cache is None:
            self._or_cache = (
                np.concatenate(self._or_chunks) if self._or_chunks else np.zeros(0, np.int32)
            )
            self._or_chunks = [self._or_cache] if self._or_chunks else []
        return self._or_cache

    def xor_flat(self) -> tuple[np.ndarray, np.ndarray]:
        if self._xor_cache is None:
            if self._xor_chunks:
                self._xor_cache = (np.concatenate(self._xor_chunks), np.concatenate(self._rhs_chunks))
                self._xor_chunks = [self._xor_cache[0]]
                self._rhs_chunks = [self._xor_cache[1]]
            else:
                self._xor_cache = (np.zeros(0, np.int32), np.zeros(0, np.uint8))
        return self._xor_cache

    def or_clauses(self) -> Iterator[list[int]]:
        yield from _split(self.or_flat())

    def xor_clauses(self) -> Iterator[tuple[list[int], int]]:
        flat, rhs = self.xor_flat()
        for clause, r in zip(_split(flat), rhs):
            yield clause, int(r)

    def stats(self) -> ProblemStats:
        return ProblemStats(self.n_vars, self.n_or, self.n_xor)

    # -- checking --------------------------------------------------------

    def check(self, assignment: np.ndarray) -> CheckResult:
        """Evaluate every constraint under a total assignment (index 0 unused)."""
        a = np.asarray(assignment, dtype=bool)
        if a.size != self.n_vars + 1:
            raise ValueError(f"assignment has {a.size - 1} variables, problem has {self.n_vars}")
        flat = self.or_flat()
        ids = np.cumsum(flat == 0) - (flat == 0)
        nz = flat != 0
        truth = a[np.abs(flat[nz])] ^ (flat[nz] < 0)
        hits = np.bincount(ids[nz], weights=truth, minlength=self.n_or)
        or_bad = np.flatnonzero(hits == 0)

        xflat, rhs = self.xor_flat()
        xids = np.cumsum(xflat == 0) - (xflat == 0)
        xnz = xflat != 0
        ones = np.bincount(xids[xnz], weights=a[xflat[xnz]], minlength=self.n_xor)
        xor_bad = np.flatnonzero((ones.astype(np.int64) & 1) != rhs)
        return CheckResult(or_bad, xor_bad)

    # -- conversions -----------------------------------------------------

    def to_pure_cnf(self) -> CnfProblem:
        """Equivalent OR-only problem; XORs are cut into width-3 pieces."""
        out = CnfProblem()
        out.n_vars = self.n_vars
        out._true = self._true
        if self.n_or:
            out._or_chunks.append(self.or_flat().copy())
            out.n_or = self.n_or
        for vars_, rhs in self.xor_clauses():
            while len(vars_) > 3:
                aux = out.new_var()
                _xor_to_or(out, [vars_[0], vars_[1], aux], 0)
                vars_ = [aux, *vars_[2:]]
            _xor_to_or(out, vars_, rhs)
        return out


_PATTERNS = {
    k: {
        r: np.array([s for s in product((0, 1), repeat=k) if (sum(s) & 1) != r], np.int64)
        for r in (0, 1)
    }
    for k in (1, 2, 3)
}


def _xor_to_or(p: CnfProblem, vars_: list[int], rhs: int) -> None:
    # each forbidden assignment s (wrong parity) is excluded by one clause
    pats = _PATTERNS[len(vars_)][rhs]
    v = np.array(vars_, np.int64)
    p.add_clauses(np.where(pats == 1, -v, v))


def _split(flat: np.ndarray) -> Iterator[list[int]]:
    ends = np.flatnonzero(flat == 0)
    start = 0
    for e in ends:
        yield flat[start:e].tolist()
        start = e + 1


# -- DIMACS ------------------------------------------------------------------


def _lines(flat: np.ndarray, prefix: str = "") -> str:
    if flat.size == 0:
        return ""
    text = " ".join(map(str, flat.tolist()))
    return "\n".join(prefix + seg.strip() + " 0" for seg in text.split(" 0")[:-1]) + "\n"


def dimacs_text(p: CnfProblem) -> str:
    """Extended DIMACS: ``x``-prefixed lines are XORs (true parity unless the
    first literal is negated)."""
    parts = [f"p cnf {p.n_vars} {p.n_or + p.n_xor}\n", _lines(p.or_flat())]
    xflat, rhs = p.xor_flat()
    if xflat.size:
        signed = xflat.astype(np.int64).copy()
        starts = np.concatenate([[0], np.flatnonzero(xflat == 0)[:-1] + 1])
        signed[starts[rhs == 0]] *= -1
        parts.append(_lines(signed, "x "))
    return "".join(parts)


def write_dimacs(p: CnfProblem, path: str | Path) -> None:
    Path(path).write_text(dimacs_text(p))


def parse_dimacs(text: str) -> CnfProblem:
    p = CnfProblem()
    declared = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            fields = line.split()
            if len(fields) != 4 or fields[1] != "cnf":
                raise ValueError(f"bad header: {line!r}")
            p.n_vars = int(fields[2])
            declared = int(fields[3])
            continue
        is_xor = line.startswith("x")
        lits = [int(t) for t in line.lstrip("x").split()]
        if not lits or lits[-1] != 0:
            raise ValueError(f"clause not terminated by 0: {line!r}")
        lits = lits[:-1]
        if is_xor:
            p.add_xor(lits, 1)
        else:
            p.add_clause(lits)
    if declared is not None and declared != p.n_or + p.n_xor:
        raise ValueError(f"header declares {declared} clauses, found {p.n_or + p.n_xor}")
    return p


def read_dimacs(path: str | Path) -> CnfProblem:
    return parse_dimacs(Path(path).read_text())
