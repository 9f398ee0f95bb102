"""Solver backends: embedded CryptoMiniSat (native XOR), embedded CaDiCaL via
PySAT (XORs cut to CNF), or any external executable speaking DIMACS."""

from __future__ import annotations

import array
import enum
import multiprocessing
import os
import shlex
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .cnf import CnfProblem, dimacs_text

SOLVER_ENV = "SNAPSHOT_ATTACK_SOLVER"
BACKENDS = ("cryptominisat", "cadical", "external")


class SolveStatus(enum.Enum):
    SAT = "SAT"
    UNSAT = "UNSAT"
    TIMEOUT = "TIMEOUT"


class SolverError(RuntimeError):
    """The backend failed; distinct from an UNSAT answer."""


@dataclass
class SolveResult:
    status: SolveStatus
    assignment: np.ndarray | None = None  # bool, index 0 unused
    solve_ms: float = 0.0

    @property
    def sat(self) -> bool:
        return self.status is SolveStatus.SAT


def default_backend() -> str:
    return "external" if os.environ.get(SOLVER_ENV) else "cryptominisat"


class Session:
    """A solver loaded with one problem that accepts extra clauses between calls."""

    def __init__(self, p: CnfProblem, backend: str | None = None, solver_path: str | None = None):
        self.p = p
        self.backend = backend or default_backend()
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}; choose from {BACKENDS}")
        self.solver_path = solver_path
        self._extra: list[list[int]] = []
        self._impl = None
        if self.backend == "cryptominisat":
            self._impl = _load_cms(p)
        elif self.backend == "cadical":
            self._impl = _load_pysat(p)

    def add_clause(self, lits: Sequence[int]) -> None:
        lits = [int(x) for x in lits]
        self._extra.append(lits)
        if self.backend == "cryptominisat":
            self._impl.add_clause(lits)
        elif self.backend == "cadical":
            self._impl[0].add_clause(lits)

    def solve(self, budget_s: float | None = None, assumptions: Sequence[int] = ()) -> SolveResult:
        """Solve under the loaded clauses; ``assumptions`` hold for this call only."""
        t0 = time.perf_counter()
        assume = [int(x) for x in assumptions]
        if self.backend == "cryptominisat":
            status, a = _solve_cms(self._impl, self.p.n_vars, budget_s, assume)
        elif self.backend == "cadical":
            status, a = _solve_pysat(self._impl, self.p.n_vars, budget_s, assume)
        else:
            extra = self._extra + [[x] for x in assume]
            status, a = _solve_external(self.p, extra, budget_s, self.solver_path)
        return SolveResult(status, a, (time.perf_counter() - t0) * 1000.0)

    def close(self) -> None:
        if self.backend == "cadical" and self._impl is not None:
            self._impl[0].delete()
        self._impl = None

    def __enter__(self) -> Session:
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def solve(
    p: CnfProblem,
    budget_s: float | None = None,
    backend: str | None = None,
    solver_path: str | None = None,
) -> SolveResult:
    with Session(p, backend, solver_path) as s:
        return s.solve(budget_s)


# -- CryptoMiniSat -------------------------------------------------------------


def _load_cms(p: CnfProblem):
    try:
        import pycryptosat
    except ImportError as exc:  # pragma: no cover
        raise SolverError("pycryptosat is not installed") from exc
    s = pycryptosat.Solver(threads=1)
    if p.n_vars:
        s.add_clause([p.n_vars, -p.n_vars])  # make every variable known to the solver
    flat = p.or_flat()
    if flat.size:
        s.add_clauses(array.array("i", flat.tobytes()))
    for vars_, rhs in p.xor_clauses():
        s.add_xor_clause(vars_, bool(rhs))
    return s


def _solve_cms(s, n_vars: int, budget_s: float | None, assume: list[int]):
    kwargs = {} if budget_s is None else {"time_limit": float(budget_s)}
    if assume:
        kwargs["assumptions"] = assume
    try:
        sat, sol = s.solve(**kwargs)
    except Exception as exc:  # pragma: no cover
        raise SolverError(f"CryptoMiniSat failed: {exc}") from exc
    if sat is None:
        return SolveStatus.TIMEOUT, None
    if not sat:
        return SolveStatus.UNSAT, None
    a = np.zeros(n_vars + 1, dtype=bool)
    a[1:] = [bool(x) for x in sol[1 : n_vars + 1]]
    return SolveStatus.SAT, a


# -- PySAT / CaDiCaL -----------------------------------------------------------


def _load_pysat(p: CnfProblem):
    try:
        from pysat.solvers import Solver
    except ImportError as exc:  # pragma: no cover
        raise SolverError("python-sat is not installed") from exc
    cnf = p.to_pure_cnf()
    s = Solver(name="cadical195")
    for clause in cnf.or_clauses():
        s.add_clause(clause)
    return s, cnf.n_vars


def _pysat_child(s, assume: list[int], conn) -> None:
    res = s.solve(assumptions=assume)
    conn.send((res, s.get_model() if res else None))
    conn.close()


def _solve_pysat(impl, n_vars: int, budget_s: float | None, assume: list[int]):
    s, _ = impl
    if budget_s is None:
        res = s.solve(assumptions=assume)
        model = s.get_model() if res else None
    else:
        # CaDiCaL in PySAT cannot be interrupted, so a budgeted call runs in a
        # forked copy of the solver that is killed when the budget runs out
        ctx = multiprocessing.get_context("fork")
        recv, send = ctx.Pipe(duplex=False)
        proc = ctx.Process(target=_pysat_child, args=(s, assume, send), daemon=True)
        proc.start()
        send.close()
        try:
            if not recv.poll(budget_s):
                return SolveStatus.TIMEOUT, None
            try:
                res, model = recv.recv()
            except EOFError as exc:
                raise SolverError(f"CaDiCaL worker exited with code {proc.exitcode}") from exc
        finally:
            if proc.is_alive():
                proc.kill()
            proc.join()
            recv.close()
    if not res:
        return SolveStatus.UNSAT, None
    a = np.zeros(n_vars + 1, dtype=bool)
    lits = np.asarray(model, dtype=np.int64)
    lits = lits[(lits > 0) & (lits <= n_vars)]
    a[lits] = True
    return SolveStatus.SAT, a


# -- external process -----------------------------------------------------------


def _solver_command(solver_path: str | None) -> list[str]:
    path = solver_path or os.environ.get(SOLVER_ENV)
    if not path:
        # bundled reference solver, run as a separate process
        return [sys.executable, "-m", "snapshot_attack.sat.dimacs_solver"]
    return shlex.split(path)


def parse_solver_output(text: str, n_vars: int) -> tuple[SolveStatus, np.ndarray | None]:
    status = None
    a = np.zeros(n_vars + 1, dtype=bool)
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("s "):
            word = line[2:].strip()
            if word == "SATISFIABLE":
                status = SolveStatus.SAT
            elif word == "UNSATISFIABLE":
                status = SolveStatus.UNSAT
            elif word in ("UNKNOWN", "INDETERMINATE"):
                status = SolveStatus.TIMEOUT
            else:
                raise SolverError(f"unrecognized status line {line!r}")
        elif line.startswith("v "):
            for tok in line[2:].split():
                lit = int(tok)
                if 0 < lit <= n_vars:
                    a[lit] = True
    if status is None:
        raise SolverError("solver output has no status line")
    return status, (a if status is SolveStatus.SAT else None)


def _solve_external(p: CnfProblem, extra: list[list[int]], budget_s, solver_path):
    text = dimacs_text(p.to_pure_cnf() if os.environ.get("SNAPSHOT_ATTACK_PURE_CNF") else p)
    if extra:
        head, _, body = text.partition("\n")
        fields = head.split()
        fields[3] = str(int(fields[3]) + len(extra))
        text = " ".join(fields) + "\n" + body + "".join(" ".join(map(str, c)) + " 0\n" for c in extra)
    with tempfile.TemporaryDirectory() as tmp:
        cnf_path = Path(tmp) / "problem.cnf"
        cnf_path.write_text(text)
        cmd = _solver_command(solver_path) + [str(cnf_path)]
        try:
            proc = subprocess.run(cmd, capture_output=True, text=True, timeout=budget_s)
        except subprocess.TimeoutExpired:
            return SolveStatus.TIMEOUT, None
        except OSError as exc:
            raise SolverError(f"cannot run solver {cmd[0]!r}: {exc}") from exc
    # SAT-competition exit codes: 10 SAT, 20 UNSAT
    if proc.returncode not in (0, 10, 20):
        raise SolverError(f"solver exited with status {proc.returncode}: {proc.stderr.strip()[:200]}")
    return parse_solver_output(proc.stdout, p.n_vars)
