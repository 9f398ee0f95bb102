"""Minimal DIMACS-in / competition-output-out solver executable.

Usage: ``python -m snapshot_attack.sat.dimacs_solver problem.cnf``.  Accepts
``x``-prefixed XOR lines. Exit status 10 for SAT, 20 for UNSAT.
"""

from __future__ import annotations

import sys

from .cnf import read_dimacs
from .solvers import SolveStatus, Session


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print("usage: dimacs_solver FILE", file=sys.stderr)
        return 2
    p = read_dimacs(argv[0])
    with Session(p, backend="cryptominisat") as s:
        res = s.solve()
    if res.status is SolveStatus.SAT:
        print("s SATISFIABLE")
        lits = [v if res.assignment[v] else -v for v in range(1, p.n_vars + 1)]
        for k in range(0, len(lits), 20):
            print("v " + " ".join(map(str, lits[k : k + 20])))
        print("v 0")
        return 10
    print("s UNSATISFIABLE")
    return 20


if __name__ == "__main__":
    sys.exit(main())
