"""A fixed combinational circuit (34 AND gates) for the AES Sbox and its CNF encoding.

The gate list is a well-known low-multiplicative-complexity Sbox circuit
(linear top layer, shared nonlinear core, linear bottom layer). Input ``U0``
and output ``S0`` are the most significant bits. It is checked against the
Sbox table on all 256 inputs at import time.
"""

from __future__ import annotations

from typing import Sequence

from ..cipher import SBOX
from .cnf import CnfProblem

_GATES_TEXT = """
    T1 = U0 ^ U3
    T2 = U0 ^ U5
    T3 = U0 ^ U6
    T4 = U3 ^ U5
    T5 = U4 ^ U6
    T6 = T1 ^ T5
    T7 = U1 ^ U2
    T8 = U7 ^ T6
    T9 = U7 ^ T7
    T10 = T6 ^ T7
    T11 = U1 ^ U5
    T12 = U2 ^ U5
    T13 = T3 ^ T4
    T14 = T6 ^ T11
    T15 = T5 ^ T11
    T16 = T5 ^ T12
    T17 = T9 ^ T16
    T18 = U3 ^ U7
    T19 = T7 ^ T18
    T20 = T1 ^ T19
    T21 = U6 ^ U7
    T22 = T7 ^ T21
    T23 = T2 ^ T22
    T24 = T2 ^ T10
    T25 = T20 ^ T17
    T26 = T3 ^ T16
    T27 = T1 ^ T12
    M1 = T13 & T6
    M2 = T23 & T8
    M3 = T14 ^ M1
    M4 = T19 & U7
    M5 = M4 ^ M1
    M6 = T3 & T16
    M7 = T22 & T9
    M8 = T26 ^ M6
    M9 = T20 & T17
    M10 = M9 ^ M6
    M11 = T1 & T15
    M12 = T4 & T27
    M13 = M12 ^ M11
    M14 = T2 & T10
    M15 = M14 ^ M11
    M16 = M3 ^ M2
    M17 = M5 ^ T24
    M18 = M8 ^ M7
    M19 = M10 ^ M15
    M20 = M16 ^ M13
    M21 = M17 ^ M15
    M22 = M18 ^ M13
    M23 = M19 ^ T25
    M24 = M22 ^ M23
    M25 = M22 & M20
    M26 = M21 ^ M25
    M27 = M20 ^ M21
    M28 = M23 ^ M25
    M29 = M28 & M27
    M30 = M26 & M24
    M31 = M20 & M23
    M32 = M27 & M31
    M33 = M27 ^ M25
    M34 = M21 & M22
    M35 = M24 & M34
    M36 = M24 ^ M25
    M37 = M21 ^ M29
    M38 = M32 ^ M33
    M39 = M23 ^ M30
    M40 = M35 ^ M36
    M41 = M38 ^ M40
    M42 = M37 ^ M39
    M43 = M37 ^ M38
    M44 = M39 ^ M40
    M45 = M42 ^ M41
    M46 = M44 & T6
    M47 = M40 & T8
    M48 = M39 & U7
    M49 = M43 & T16
    M50 = M38 & T9
    M51 = M37 & T17
    M52 = M42 & T15
    M53 = M45 & T27
    M54 = M41 & T10
    M55 = M44 & T13
    M56 = M40 & T23
    M57 = M39 & T19
    M58 = M43 & T3
    M59 = M38 & T22
    M60 = M37 & T20
    M61 = M42 & T1
    M62 = M45 & T4
    M63 = M41 & T2
    L0 = M61 ^ M62
    L1 = M50 ^ M56
    L2 = M46 ^ M48
    L3 = M47 ^ M55
    L4 = M54 ^ M58
    L5 = M49 ^ M61
    L6 = M62 ^ L5
    L7 = M46 ^ L3
    L8 = M51 ^ M59
    L9 = M52 ^ M53
    L10 = M53 ^ L4
    L11 = M60 ^ L2
    L12 = M48 ^ M51
    L13 = M50 ^ L0
    L14 = M52 ^ M61
    L15 = M55 ^ L1
    L16 = M56 ^ L0
    L17 = M57 ^ L1
    L18 = M58 ^ L8
    L19 = M63 ^ L4
    L20 = L0 ^ L1
    L21 = L1 ^ L7
    L22 = L3 ^ L12
    L23 = L18 ^ L2
    L24 = L15 ^ L9
    L25 = L6 ^ L10
    L26 = L7 ^ L9
    L27 = L8 ^ L10
    L28 = L11 ^ L14
    L29 = L11 ^ L17
    S0 = L6 ^ L24
    S1 = L16 ^ L26 ^ 1
    S2 = L19 ^ L28 ^ 1
    S3 = L6 ^ L21
    S4 = L20 ^ L22
    S5 = L25 ^ L29
    S6 = L13 ^ L27 ^ 1
    S7 = L6 ^ L23 ^ 1
"""


def _parse(text: str) -> list[tuple[str, str, tuple[str, ...], int]]:
    gates = []
    for line in text.strip().splitlines():
        out, expr = (s.strip() for s in line.split("="))
        if "&" in expr:
            a, b = (t.strip() for t in expr.split("&"))
            gates.append((out, "and", (a, b), 0))
        else:
            terms = [t.strip() for t in expr.split("^")]
            const = 1 if "1" in terms else 0
            gates.append((out, "xor", tuple(t for t in terms if t != "1"), const))
    return gates


GATES = _parse(_GATES_TEXT)
N_AND = sum(op == "and" for _, op, _, _ in GATES)


def evaluate_circuit(x: int) -> int:
    env = {f"U{i}": (x >> (7 - i)) & 1 for i in range(8)}
    for out, op, ins, const in GATES:
        if op == "and":
            env[out] = env[ins[0]] & env[ins[1]]
        else:
            v = const
            for name in ins:
                v ^= env[name]
            env[out] = v
    return sum(env[f"S{i}"] << (7 - i) for i in range(8))


if any(evaluate_circuit(x) != SBOX[x] for x in range(256)):  # pragma: no cover
    raise ImportError("Sbox circuit does not reproduce the Sbox table")


# -- linear expressions over SAT variables ----------------------------------

LinExpr = tuple[frozenset, int]  # (variables XORed together, constant bit)

ZERO: LinExpr = (frozenset(), 0)
ONE: LinExpr = (frozenset(), 1)


def lin_var(v: int) -> LinExpr:
    """Expression for a signed literal."""
    return (frozenset([abs(v)]), 1 if v < 0 else 0)


def lin_xor(*exprs: LinExpr) -> LinExpr:
    vars_: frozenset = frozenset()
    const = 0
    for vs, c in exprs:
        vars_ = vars_ ^ vs
        const ^= c
    return (vars_, const)


class Materializer:
    """Turns linear expressions into single literals, sharing aux variables."""

    def __init__(self, p: CnfProblem) -> None:
        self.p = p
        self._cache: dict[frozenset, int] = {}

    def literal(self, e: LinExpr) -> int:
        vars_, const = e
        if not vars_:
            return self.p.true_lit if const else -self.p.true_lit
        if len(vars_) == 1:
            (v,) = vars_
        else:
            v = self._cache.get(vars_)
            if v is None:
                v = self.p.xor_gate(sorted(vars_))
                self._cache[vars_] = v
        return -v if const else v


def encode_sbox(
    mat: Materializer, inputs: Sequence[LinExpr]
) -> list[LinExpr]:
    """Sbox of an 8-bit input given as expressions (index 0 = LSB).

    AND gates get Tseitin variables; XOR gates stay symbolic, so the result
    is a list of 8 linear expressions (index 0 = LSB).
    """
    if len(inputs) != 8:
        raise ValueError("Sbox input needs 8 bits")
    env: dict[str, LinExpr] = {f"U{i}": inputs[7 - i] for i in range(8)}
    for out, op, ins, const in GATES:
        if op == "and":
            a = mat.literal(env[ins[0]])
            b = mat.literal(env[ins[1]])
            env[out] = lin_var(mat.p.and_gate(a, b))
        else:
            env[out] = lin_xor(*(env[n] for n in ins), (frozenset(), const))
    return [env[f"S{7 - b}"] for b in range(8)]
