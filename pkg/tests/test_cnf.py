import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snapshot_attack.sat import cnf
from snapshot_attack.sat.cnf import CnfProblem, EmptyClauseError


def brute_models(p: CnfProblem, free: list[int]) -> set[tuple[bool, ...]]:
    """Projections onto ``free`` of all total models (exhaustive)."""
    out = set()
    for bits in itertools.product((False, True), repeat=p.n_vars):
        a = np.array([False, *bits])
        if p.check(a).ok:
            out.add(tuple(a[free]))
    return out


def test_empty_problem_header_only():
    assert cnf.dimacs_text(CnfProblem()) == "p cnf 0 0\n"


def test_xor_line_format():
    p = CnfProblem()
    nu, v = p.new_var(), p.new_var()
    p.add_xor([nu, v], 0)
    assert cnf.dimacs_text(p) == "p cnf 2 1\nx -1 2 0\n"
    p.add_xor([nu, v], 1)
    assert cnf.dimacs_text(p).splitlines()[-1] == "x 1 2 0"


def test_negative_literal_flips_parity():
    p = CnfProblem()
    a, b = p.new_vars(2)
    p.add_xor([-a, b], 1)
    (vars_, rhs), = p.xor_clauses()
    assert vars_ == [a, b] and rhs == 0


def test_duplicate_literals_cancel():
    p = CnfProblem()
    a, b = p.new_vars(2)
    p.add_xor([a, b, a], 1)
    assert list(p.xor_clauses()) == [([b], 1)]
    p.add_xor([a, a], 0)
    assert p.n_xor == 1
    with pytest.raises(EmptyClauseError):
        p.add_xor([a, a], 1)


def test_rejects_empty_and_out_of_range():
    p = CnfProblem()
    p.new_var()
    with pytest.raises(EmptyClauseError):
        p.add_clause([])
    with pytest.raises(ValueError):
        p.add_clause([2])
    with pytest.raises(ValueError):
        p.add_clause([0])


def test_true_literal_folds_into_parity():
    p = CnfProblem()
    a = p.new_var()
    t = p.true_lit
    p.add_xor([a, t], 0)
    assert list(p.xor_clauses()) == [([a], 1)]


def test_gates_truth_tables():
    p = CnfProblem()
    a, b = p.new_vars(2)
    o = p.and_gate(a, -b)
    x = p.xor_gate([a, b], 1)
    models = brute_models(p, [a, b, o, x])
    assert models == {(va, vb, va and not vb, (va ^ vb) ^ True) for va in (0, 1) for vb in (0, 1)}


def test_fill_definitions():
    p = CnfProblem()
    a, b = p.new_vars(2)
    o = p.and_gate(a, b)
    x = p.xor_gate([o, -a])
    asg = np.zeros(p.n_vars + 1, bool)
    asg[[a, b]] = True
    p.fill_definitions(asg)
    assert asg[o] and asg[x]
    assert p.check(asg).ok


def test_check_reports_indices():
    p = CnfProblem()
    a, b = p.new_vars(2)
    p.add_clause([a])
    p.add_clause([b])
    p.add_xor([a, b], 1)
    res = p.check(np.array([False, True, False]))
    assert res.or_violations.tolist() == [1] and res.xor_violations.size == 0
    res = p.check(np.array([False, True, True]))
    assert res.xor_violations.tolist() == [0]
    with pytest.raises(ValueError):
        p.check(np.zeros(2, bool))


def test_stats():
    p = CnfProblem()
    a, b, c = p.new_vars(3)
    p.add_clauses(np.array([[a, b], [-a, c]]))
    p.add_xors(np.array([[a, b, c]]), 1)
    s = p.stats()
    assert s.as_dict() == {"n_vars": 3, "n_or": 2, "n_xor": 1}
    assert s.n_clauses == 3


@st.composite
def random_problems(draw):
    n = draw(st.integers(1, 5))
    p = CnfProblem()
    p.new_vars(n)
    lit = st.integers(1, n).flatmap(lambda v: st.sampled_from([v, -v]))
    for clause in draw(st.lists(st.lists(lit, min_size=1, max_size=3), max_size=6)):
        p.add_clause(clause)
    for vars_, rhs in draw(st.lists(st.tuples(st.lists(st.integers(1, n), min_size=1, max_size=5, unique=True),
                                              st.integers(0, 1)), max_size=3)):
        p.add_xor(vars_, rhs)
    return p


@settings(max_examples=60, deadline=None)
@given(random_problems())
def test_dimacs_roundtrip(p):
    text = cnf.dimacs_text(p)
    q = cnf.parse_dimacs(text)
    assert cnf.dimacs_text(q) == text
    assert cnf.dimacs_text(p) == text


@settings(max_examples=60, deadline=None)
@given(random_problems())
def test_pure_cnf_is_equivalent(p):
    orig = list(range(1, p.n_vars + 1))
    assert brute_models(p.to_pure_cnf(), orig) == brute_models(p, orig)


def test_parse_rejects_bad_input():
    with pytest.raises(ValueError):
        cnf.parse_dimacs("p cnf 2 1\n1 2\n")
    with pytest.raises(ValueError):
        cnf.parse_dimacs("p cnf 2 2\n1 2 0\n")
    with pytest.raises(ValueError):
        cnf.parse_dimacs("p dnf 2 1\n1 0\n")


def test_write_read_file(tmp_path):
    p = CnfProblem()
    a, b = p.new_vars(2)
    p.add_clause([a, -b])
    p.add_xor([a, b], 0)
    cnf.write_dimacs(p, tmp_path / "p.cnf")
    assert cnf.dimacs_text(cnf.read_dimacs(tmp_path / "p.cnf")) == cnf.dimacs_text(p)
