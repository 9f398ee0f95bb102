"""Build the key-recovery constraint system from unordered register snapshots.

Unknowns: a one-hot coefficient matrix ``c[i, j]`` binding targeted cell ``i``
to observation position ``j`` (shared by all cycles), the share bits of every
cell in every covered cycle, the unmasked value ``nu`` of every cell, and one
8-bit variable group per schedule symbol.  Cells holding the same symbol are
tied to that symbol's group, and the round-1 AES structure links the groups.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..dom_sim import RegisterFile, symbol_values
from ..schedule import (
    KEY_SYMBOLS,
    CellSymbol,
    LinkRelation,
    ScheduleTable,
    SymKind,
    relations_for_window,
)
from ..snapshot import ObservationVector, PlacementMap
from .cnf import CnfProblem
from .sbox_circuit import LinExpr, Materializer, encode_sbox, lin_var, lin_xor

ONEHOT_MODES = ("sequential", "pairwise")


@dataclass(frozen=True)
class AttackInstance:
    """Consecutive snapshots starting at ``start_cycle`` under one placement."""

    observations: tuple[ObservationVector, ...]
    start_cycle: int
    d: int
    plaintext: bytes | None = None

    def __post_init__(self) -> None:
        obs = tuple(self.observations)
        object.__setattr__(self, "observations", obs)
        if self.plaintext is not None:
            object.__setattr__(self, "plaintext", bytes(self.plaintext))
            if len(self.plaintext) != 16:
                raise ValueError("plaintext must be 16 bytes")
        if self.d < 0:
            raise ValueError("d must be non-negative")
        for k, o in enumerate(obs):
            if o.cycle != self.start_cycle + k:
                raise ValueError(
                    f"observation {k} is from cycle {o.cycle}, expected {self.start_cycle + k}"
                )
            if o.n != obs[0].n:
                raise ValueError("all observations must have the same length")

    @property
    def length(self) -> int:
        return len(self.observations)

    @property
    def window(self) -> tuple[int, int]:
        return self.start_cycle, self.length

    @property
    def cycles(self) -> range:
        return range(self.start_cycle, self.start_cycle + self.length)

    @property
    def n(self) -> int:
        return self.observations[0].n if self.observations else 0


@dataclass
class DecodeMap:
    """Where each quantity of interest lives in the variable numbering.

    Share and ``nu`` arrays are indexed ``[row, (share,) bit]`` with bit 0 the
    least significant.
    """

    d: int
    n_rows: int
    coeff: np.ndarray
    carries: np.ndarray
    share_vars: dict[int, np.ndarray] = field(default_factory=dict)
    nu_vars: dict[int, np.ndarray] = field(default_factory=dict)
    symbol_vars: dict[CellSymbol, np.ndarray] = field(default_factory=dict)
    key_shares: dict[int, np.ndarray] = field(default_factory=dict)
    onehot: str = "sequential"
    order_vars: np.ndarray | None = None
    encode_ms: float = 0.0

    @property
    def m(self) -> int:
        return self.coeff.shape[0]

    @property
    def n(self) -> int:
        return self.coeff.shape[1]

    @property
    def cycles(self) -> list[int]:
        return sorted(self.share_vars)

    def cell_vars(self, cycle: int) -> np.ndarray:
        """Share variables of one cycle in logical snapshot order."""
        return self.share_vars[cycle][:, :, ::-1].reshape(-1)

    def key_bit_vars(self) -> np.ndarray:
        """``(16, 8)`` symbol variables of the cipher key bytes."""
        return np.stack([self.symbol_vars[s] for s in KEY_SYMBOLS])


# -- exactly-one -------------------------------------------------------------


def encode_onehot_block(coeff: np.ndarray, sink: CnfProblem, mode: str = "sequential") -> np.ndarray:
    """Exactly-one over every row of ``coeff``; returns the carry variables.

    The sequential mode is a running parity ``t_{j+1} = c_j ^ t_j`` with the
    carry ``c_j & t_j`` forced to zero and a final sum of one.
    """
    if mode not in ONEHOT_MODES:
        raise ValueError(f"unknown one-hot mode {mode!r}")
    coeff = np.asarray(coeff)
    m, n = coeff.shape
    if n < 1:
        raise ValueError("one-hot needs at least one coefficient")
    if mode == "pairwise":
        sink.add_clauses(coeff)
        ii, jj = np.triu_indices(n, 1)
        for r in range(m):
            sink.add_clauses(np.stack([-coeff[r, ii], -coeff[r, jj]], axis=1))
        return np.zeros((m, 0), np.int64)
    if n == 1:
        sink.add_clauses(coeff)
        return np.zeros((m, 0), np.int64)
    if n == 2:
        sink.add_xors(coeff, 1)
        sink.add_clauses(-coeff)
        return np.zeros((m, 0), np.int64)
    t = sink.new_vars(m, n - 2)  # t[:, k] is t_{k+2}
    sink.add_xors(np.stack([t[:, 0], coeff[:, 0], coeff[:, 1]], axis=-1), 0)
    sink.add_clauses(np.stack([-coeff[:, 0], -coeff[:, 1]], axis=-1))
    if n > 3:
        tj, tj1, cj = t[:, :-1], t[:, 1:], coeff[:, 2 : n - 1]
        sink.add_xors(np.stack([tj1, cj, tj], axis=-1).reshape(-1, 3), 0)
        sink.add_clauses(np.stack([-cj, -tj], axis=-1).reshape(-1, 2))
    sink.add_xors(np.stack([t[:, -1], coeff[:, -1]], axis=-1), 1)
    return t


def encode_onehot(coeffs: Sequence[int], sink: CnfProblem, mode: str = "sequential") -> np.ndarray:
    return encode_onehot_block(np.asarray(coeffs, np.int64).reshape(1, -1), sink, mode)[0]


def encode_share_order(coeff: np.ndarray, d: int, sink: CnfProblem) -> np.ndarray:
    """Order the shares of each cell bit by observation position.

    Relabelling the shares of one cell leaves every ``nu`` unchanged, so each
    solution comes in ``(d+1)!`` copies per cell bit.  Requiring share ``l``
    to sit at a lower position than share ``l+1`` keeps one copy.
    """
    m, n = coeff.shape
    if d == 0:
        return np.zeros((0, n), np.int64)
    cells = coeff.reshape(m // (8 * (d + 1)), d + 1, 8, n)
    lo = cells[:, :-1].reshape(-1, n)
    hi = cells[:, 1:].reshape(-1, n)
    # q[:, j] implies some lo[:, k] with k < j
    q = sink.new_vars(lo.shape[0], n)
    sink.add_clauses(-q[:, :1])
    sink.add_clauses(np.stack([-q[:, 1:], q[:, :-1], lo[:, :-1]], axis=-1).reshape(-1, 3))
    sink.add_clauses(np.stack([-hi, q], axis=-1).reshape(-1, 2))
    return q


# -- observation link and share combine -------------------------------------


def encode_observation_links(
    v: np.ndarray, coeff: np.ndarray, bits: np.ndarray, sink: CnfProblem, zero_links: bool = False,
    parity_links: bool = False,
) -> None:
    """``v[i]`` equals the observed bit at the position selected by ``coeff[i]``.

    With ``zero_links`` the implied binary clauses ``(~v | ~c_j)`` for the
    zero positions are added too, so a chosen position fixes ``v`` (and a
    known ``v`` rules out positions) by unit propagation alone. With
    ``parity_links`` the same fact is also stated linearly: under one-hot
    coefficients, ``v`` is the parity of the coefficients on the set bits.
    """
    v = np.asarray(v, np.int64)
    bits = np.asarray(bits)
    ones = np.flatnonzero(bits)
    vcol = v.reshape(-1, 1)
    if ones.size == 0:
        sink.add_clauses(-vcol)
    else:
        sel = coeff[:, ones]
        sink.add_clauses(np.hstack([-vcol, sel]))
        pairs = np.stack([np.broadcast_to(vcol, sel.shape), -sel], axis=-1)
        sink.add_clauses(pairs.reshape(-1, 2))
    zeros = np.flatnonzero(bits == 0)
    if zero_links and ones.size and zeros.size:
        sel = coeff[:, zeros]
        pairs = np.stack([np.broadcast_to(-vcol, sel.shape), -sel], axis=-1)
        sink.add_clauses(pairs.reshape(-1, 2))
    if parity_links and ones.size and zeros.size:
        sink.add_xors(np.hstack([vcol, coeff[:, ones]]), 0)


def encode_observation_link(
    v: int, coeffs: Sequence[int], obs: ObservationVector, sink: CnfProblem
) -> None:
    coeffs = np.asarray(coeffs, np.int64)
    if coeffs.size != obs.n:
        raise ValueError("need one coefficient per observation bit")
    encode_observation_links(np.array([v]), coeffs.reshape(1, -1), obs.bits, sink)


def encode_share_combine(nu: int, shares: Sequence[int], sink: CnfProblem) -> None:
    sink.add_xor([nu, *shares], 0)


# -- function links ------------------------------------------------------------


def _xtime_expr(b: list[LinExpr]) -> list[LinExpr]:
    hi = b[7]
    return [hi, lin_xor(b[0], hi), b[1], lin_xor(b[2], hi), lin_xor(b[3], hi), b[4], b[5], b[6]]


def _gf_mul_expr(coef: int, b: list[LinExpr]) -> list[LinExpr]:
    acc: list[LinExpr] = [(frozenset(), 0)] * 8
    cur = b
    while coef:
        if coef & 1:
            acc = [lin_xor(x, y) for x, y in zip(acc, cur)]
        coef >>= 1
        if coef:
            cur = _xtime_expr(cur)
    return acc


def _byte_const(value: int) -> list[LinExpr]:
    return [(frozenset(), (value >> b) & 1) for b in range(8)]


def encode_function_links(
    relations: Sequence[LinkRelation],
    nu_vars: Mapping[CellSymbol, np.ndarray],
    constants: Mapping[CellSymbol, int],
    sink: CnfProblem,
    mat: Materializer | None = None,
) -> None:
    """Constrain symbol groups by the AES relations.

    Symbols in ``constants`` (the plaintext, when known) become literal
    polarities instead of variables.
    """
    mat = mat or Materializer(sink)

    def operand(sym: CellSymbol) -> list[LinExpr]:
        if sym in constants:
            return _byte_const(constants[sym])
        if sym not in nu_vars:
            raise KeyError(f"relation operand {sym} has no variables in scope")
        return [lin_var(int(v)) for v in nu_vars[sym]]

    def combine(terms) -> list[LinExpr]:
        acc: list[LinExpr] = _byte_const(0)
        for coef, sym in terms:
            acc = [lin_xor(x, y) for x, y in zip(acc, _gf_mul_expr(coef, operand(sym)))]
        return acc

    for rel in relations:
        if rel.output not in nu_vars:
            raise KeyError(f"relation output {rel.output} has no variables in scope")
        rhs = [lin_xor(x, y) for x, y in zip(combine(rel.linear), _byte_const(rel.const))]
        if rel.sbox_in:
            rhs = [lin_xor(x, y) for x, y in zip(rhs, encode_sbox(mat, combine(rel.sbox_in)))]
        for b in range(8):
            vars_, const = rhs[b]
            sink.add_xor([int(nu_vars[rel.output][b]), *sorted(vars_)], const)


# -- whole instance ------------------------------------------------------------


def encode_instance(
    inst: AttackInstance,
    table: ScheduleTable,
    onehot: str = "sequential",
    known_plaintext: bool = True,
    share_order: bool = False,
    zero_links: bool = False,
    parity_links: bool = False,
) -> tuple[CnfProblem, DecodeMap]:
    if inst.length == 0:
        raise ValueError("the instance covers no cycles")
    if known_plaintext and inst.plaintext is None:
        raise ValueError("known-plaintext encoding needs the plaintext")
    t0 = time.perf_counter()
    d, rows = inst.d, table.n_rows
    m, n = rows * 8 * (d + 1), inst.n
    if m > n:
        raise ValueError(f"snapshots have {n} bits, fewer than the {m} targeted cells")
    relations, bindings = relations_for_window(
        table, inst.start_cycle, inst.length, inst.plaintext if known_plaintext else None
    )

    p = CnfProblem()
    coeff = p.new_vars(m, n)
    carries = encode_onehot_block(coeff, p, onehot)
    order = encode_share_order(coeff, d, p) if share_order else None
    dm = DecodeMap(d=d, n_rows=rows, coeff=coeff, carries=carries, onehot=onehot, order_vars=order)

    present = sorted(table.symbols(inst.start_cycle, inst.start_cycle + inst.length - 1))
    for sym in dict.fromkeys([*KEY_SYMBOLS, *present]):
        dm.symbol_vars[sym] = p.new_vars(8)
    constants: dict[CellSymbol, int] = {}
    for sym, value in bindings:
        if value is None:
            dm.symbol_vars[sym] = p.new_vars(8)
        else:
            constants[sym] = value

    for obs in inst.observations:
        c = obs.cycle
        sv = p.new_vars(rows, d + 1, 8)
        nu = p.new_vars(rows, 8)
        dm.share_vars[c], dm.nu_vars[c] = sv, nu
        encode_observation_links(dm.cell_vars(c), coeff, obs.bits[:n], p, zero_links, parity_links)
        p.add_xors(np.concatenate([nu[:, None, :], sv], axis=1).transpose(0, 2, 1).reshape(-1, d + 2), 0)
        ties = []
        for r, sym in enumerate(table.column(c)):
            if sym.is_empty:
                continue
            ties.append(np.stack([nu[r], dm.symbol_vars[sym]], axis=-1))
            if sym.kind is SymKind.K and sym.index not in dm.key_shares:
                dm.key_shares[sym.index] = sv[r]
        if ties:
            p.add_xors(np.concatenate(ties), 0)

    encode_function_links(relations, dm.symbol_vars, constants, p)
    dm.encode_ms = (time.perf_counter() - t0) * 1000.0
    return p, dm


# -- ground truth and decoding ---------------------------------------------------


def ground_truth_assignment(
    p: CnfProblem,
    dm: DecodeMap,
    register_files: Sequence[RegisterFile],
    placement: PlacementMap,
    key: Sequence[int],
    plaintext: Sequence[int],
) -> np.ndarray:
    """The assignment implied by the true placement, shares and symbol values."""
    a = np.zeros(p.n_vars + 1, dtype=bool)
    true_obs = placement.permutation[: dm.m]
    by_cycle = {rf.cycle: rf for rf in register_files}
    shares = {c: by_cycle[c].data for c in dm.cycles}
    if dm.order_vars is not None and dm.d > 0:
        true_obs, shares = _sort_shares(true_obs, shares, dm)
        lo = true_obs.reshape(dm.n_rows, dm.d + 1, 8)[:, :-1].reshape(-1)
        a[dm.order_vars] = lo[:, None] < np.arange(dm.n)
    a[dm.coeff[np.arange(dm.m), true_obs]] = True
    if dm.carries.size:
        onehot = np.zeros(dm.coeff.shape, dtype=np.uint8)
        onehot[np.arange(dm.m), true_obs] = 1
        prefix = np.cumsum(onehot, axis=1) & 1  # parity of c_0..c_j
        a[dm.carries] = prefix[:, 1 : dm.n - 1].astype(bool)
    bits = np.arange(8)
    for c in dm.cycles:
        data = shares[c]
        a[dm.share_vars[c]] = ((data[:, :, None] >> bits) & 1).astype(bool)
        nu = np.bitwise_xor.reduce(data, axis=1)
        a[dm.nu_vars[c]] = ((nu[:, None] >> bits) & 1).astype(bool)
    values = symbol_values(key, plaintext)
    for sym, vars_ in dm.symbol_vars.items():
        a[vars_] = ((values[sym] >> bits) & 1).astype(bool)
    p.fill_definitions(a)
    return a


def _sort_shares(
    true_obs: np.ndarray, shares: dict[int, np.ndarray], dm: DecodeMap
) -> tuple[np.ndarray, dict[int, np.ndarray]]:
    """Relabel shares per cell bit so observation positions increase with the share index."""
    rows, d1 = dm.n_rows, dm.d + 1
    pos = true_obs.reshape(rows, d1, 8)  # [row, share, 7 - bit]
    order = np.argsort(pos, axis=1)
    sorted_pos = np.take_along_axis(pos, order, axis=1).reshape(-1)
    r_idx = np.arange(rows)[:, None, None]
    bit_idx = 7 - np.arange(8)[None, None, :]
    out = {}
    for c, data in shares.items():
        bitplanes = (data[:, :, None] >> np.arange(8)) & 1  # [row, share, bit]
        permuted = bitplanes[r_idx, order, bit_idx]  # [row, new share, 7 - bit]
        permuted = permuted[:, :, ::-1]
        out[c] = (permuted << np.arange(8)).sum(axis=2).astype(np.uint8)
    return sorted_pos, out


def _byte(bits: np.ndarray) -> int:
    return int(np.dot(bits.astype(np.int64), 1 << np.arange(8)))


def decode_key(assignment: np.ndarray, dm: DecodeMap, d: int | None = None) -> bytes:
    """XOR the share bits of each key byte; fall back to the symbol group when
    a key byte never sits in a covered register."""
    a = np.asarray(assignment, dtype=bool)
    if d is not None and d != dm.d:
        raise ValueError("masking order disagrees with the decode map")
    out = []
    for j in range(16):
        if j in dm.key_shares:
            bits = np.bitwise_xor.reduce(a[dm.key_shares[j]].astype(np.uint8), axis=0)
        else:
            bits = a[dm.symbol_vars[KEY_SYMBOLS[j]]]
        out.append(_byte(bits))
    return bytes(out)


def decode_shares(assignment: np.ndarray, dm: DecodeMap, cycle: int) -> np.ndarray:
    """``(rows, d+1)`` share bytes of one covered cycle."""
    a = np.asarray(assignment, dtype=bool)
    bits = a[dm.share_vars[cycle]].astype(np.int64)
    return (bits << np.arange(8)).sum(axis=-1).astype(np.uint8)


def decode_placement(assignment: np.ndarray, dm: DecodeMap) -> np.ndarray:
    """Observation index chosen for each targeted cell."""
    a = np.asarray(assignment, dtype=bool)
    return np.argmax(a[dm.coeff], axis=1)


def key_blocking_clause(dm: DecodeMap, key: bytes) -> list[int]:
    """Clause excluding every solution whose key symbol bits equal ``key``."""
    kv = dm.key_bit_vars()
    lits = []
    for j in range(16):
        for b in range(8):
            v = int(kv[j, b])
            lits.append(-v if (key[j] >> b) & 1 else v)
    return lits


def share_blocking_clause(assignment: np.ndarray, dm: DecodeMap) -> list[int]:
    """Clause excluding one exact share-level assignment of all covered cycles."""
    a = np.asarray(assignment, dtype=bool)
    vars_ = np.concatenate([dm.share_vars[c].reshape(-1) for c in dm.cycles])
    return [int(-v) if a[v] else int(v) for v in vars_]

