import numpy as np
import pytest

from snapshot_attack import schedule as sch
from snapshot_attack.dom_sim import symbol_values
from snapshot_attack.schedule import EMPTY, K, K2, M, P, S, S2, CellSymbol, RelationKind


@pytest.fixture(scope="module")
def table():
    return sch.load_schedule()


def test_dimensions(table):
    assert table.n_rows == 32 and table.n_cycles == 36


def test_first_row_holds_key_then_state(table):
    assert [table.cell(0, c) for c in range(16, 20)] == [K(0), K(1), K(2), K(3)]
    assert table.cell(0, 20) == S(0)
    assert table.cell(0, 21) == M(1)
    assert table.cell(0, 36) == K2(0)
    assert all(table.cell(0, c) is EMPTY or table.cell(0, c).is_empty for c in range(1, 16))


def test_cycle_16_is_full_and_key_block_complete(table):
    col = table.column(16)
    assert not any(s.is_empty for s in col)
    assert set(col[16:]) == set(sch.KEY_SYMBOLS)


def test_last_state_row_completes_subbytes(table):
    assert table.cell(15, 19) == S(14)
    assert table.cell(15, 36) == S2(11)


def test_symbol_parse_roundtrip():
    for text in ("-", "K0", "K15", "S7", "M12", "K'3", "S'11", "P4"):
        assert str(CellSymbol.parse(text)) == text
    with pytest.raises(ValueError):
        CellSymbol.parse("Q1")
    with pytest.raises(ValueError):
        CellSymbol(sch.SymKind.K, 16)


def test_full_table_validates(table):
    report = sch.validate_schedule(table)
    assert report.ok, report.violations


def test_reduced_table_validates():
    report = sch.validate_schedule(sch.reduced_schedule())
    assert report.ok, report.violations


def test_injected_shift_error_is_localized(table):
    bad = table.with_cell(5, 22, S(0))
    report = sch.validate_schedule(bad)
    assert (5, 22) in report.coordinates()
    assert all(c <= 22 or r != 4 for r, c in report.coordinates())


def test_empty_at_cycle_16_flagged(table):
    bad = table.with_cell(3, 16, EMPTY)
    assert (3, 16) in sch.validate_schedule(bad).coordinates()


def test_csv_roundtrip(tmp_path, table):
    path = tmp_path / "s.csv"
    sch.write_schedule_csv(table, path)
    again = sch.read_schedule_csv(path)
    assert again.cells == table.cells


def test_relations_full_window(table):
    rels, bindings = sch.relations_for_window(table, 16, 21)
    kinds = {r.kind for r in rels}
    assert kinds == set(RelationKind)
    assert {r.output for r in rels if r.kind is RelationKind.SBOX_ROUND2} == {S2(j) for j in range(12)}
    assert [b for b, _ in bindings] == [P(j) for j in range(16)]
    assert all(v is None for _, v in bindings)


def test_relations_single_cycle(table):
    rels, _ = sch.relations_for_window(table, 16, 1, plaintext=bytes(16))
    assert {r.kind for r in rels} == {RelationKind.SBOX_ADD}
    assert {r.output for r in rels} == {S(j) for j in range(12)}


def test_relations_window_bounds(table):
    assert sch.relations_for_window(table, 16, 0) == ([], [])
    with pytest.raises(ValueError):
        sch.relations_for_window(table, 15, 3)
    with pytest.raises(ValueError):
        sch.relations_for_window(table, 30, 8)


def test_relations_hold_on_true_values(table):
    rng = np.random.default_rng(3)
    rels = sch.architecture_relations(table)
    for _ in range(20):
        values = symbol_values(rng.integers(0, 256, 16), rng.integers(0, 256, 16))
        assert all(r.holds(values) for r in rels)


def test_relation_operands_exclude_plaintext():
    rel = sch.LinkRelation(RelationKind.SBOX_ADD, S(0), sbox_in=((1, P(0)), (1, K(0))))
    assert rel.register_operands == (S(0), K(0))


def test_shift_rows_source():
    assert [sch.shift_rows_source(j) for j in range(4)] == [0, 5, 10, 15]
