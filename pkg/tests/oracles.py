"""Independent reference computations used as test oracles.

Nothing here imports the package: the Sbox comes from x^254 in GF(2^8),
multiplication is carry-less with a final reduction, and the round state is
built column by column.
"""

from __future__ import annotations


def clmul_reduce(a: int, b: int) -> int:
    acc = 0
    for i in range(8):
        if (b >> i) & 1:
            acc ^= a << i
    for i in range(14, 7, -1):
        if (acc >> i) & 1:
            acc ^= 0x11B << (i - 8)
    return acc


def gf_pow(a: int, e: int) -> int:
    out = 1
    for _ in range(e):
        out = clmul_reduce(out, a)
    return out


def _affine(x: int) -> int:
    out = 0
    for i in range(8):
        bit = 0
        for k in (0, 4, 5, 6, 7):
            bit ^= (x >> ((i + k) % 8)) & 1
        out |= bit << i
    return out ^ 0x63


SBOX = [_affine(gf_pow(x, 254)) for x in range(256)]
INV_SBOX = [SBOX.index(y) for y in range(256)]


def round1_state(key: bytes, pt: bytes) -> dict[str, list[int]]:
    """SubBytes output, MixColumns output, round-1 key and round-2 SubBytes output."""
    s = [SBOX[p ^ k] for p, k in zip(pt, key)]
    # state byte j sits at row j % 4, column j // 4
    shifted = [s[(j + 4 * (j % 4)) % 16] for j in range(16)]
    m = []
    for col in range(4):
        a = shifted[4 * col:4 * col + 4]
        for r in range(4):
            m.append(
                clmul_reduce(2, a[r]) ^ clmul_reduce(3, a[(r + 1) % 4]) ^ a[(r + 2) % 4] ^ a[(r + 3) % 4]
            )
    w = [list(key[4 * i:4 * i + 4]) for i in range(4)]
    t = [SBOX[b] for b in w[3][1:] + w[3][:1]]
    t[0] ^= 0x01
    k1 = []
    prev = t
    for i in range(4):
        prev = [a ^ b for a, b in zip(w[i], prev)]
        k1.extend(prev)
    s2 = [SBOX[a ^ b] for a, b in zip(m, k1)]
    return {"S": s, "M": m, "K2": k1, "S2": s2}
