"""AES-128 primitives over GF(2^8) and Boolean secret sharing.

Bytes are plain ``int`` values in ``[0, 255]``; a 16-byte block or key is any
sequence of such ints (``bytes`` works too). State layout is the usual
column-major one: byte ``4*c + r`` sits in row ``r`` of column ``c``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from operator import xor
from typing import Sequence

import numpy as np

AES_POLY = 0x11B

# fmt: off
SBOX = (
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7, 0xab, 0x76,
    0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0, 0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4, 0x72, 0xc0,
    0xb7, 0xfd, 0x93, 0x26, 0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71, 0xd8, 0x31, 0x15,
    0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2, 0xeb, 0x27, 0xb2, 0x75,
    0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0, 0x52, 0x3b, 0xd6, 0xb3, 0x29, 0xe3, 0x2f, 0x84,
    0x53, 0xd1, 0x00, 0xed, 0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb, 0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf,
    0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45, 0xf9, 0x02, 0x7f, 0x50, 0x3c, 0x9f, 0xa8,
    0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5, 0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2,
    0xcd, 0x0c, 0x13, 0xec, 0x5f, 0x97, 0x44, 0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73,
    0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a, 0x90, 0x88, 0x46, 0xee, 0xb8, 0x14, 0xde, 0x5e, 0x0b, 0xdb,
    0xe0, 0x32, 0x3a, 0x0a, 0x49, 0x06, 0x24, 0x5c, 0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79,
    0xe7, 0xc8, 0x37, 0x6d, 0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08,
    0xba, 0x78, 0x25, 0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f, 0x4b, 0xbd, 0x8b, 0x8a,
    0x70, 0x3e, 0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e, 0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e,
    0xe1, 0xf8, 0x98, 0x11, 0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f, 0xb0, 0x54, 0xbb, 0x16,
)
# fmt: on

RCON = (0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0x1B, 0x36)

MIX_MATRIX = ((2, 3, 1, 1), (1, 2, 3, 1), (1, 1, 2, 3), (3, 1, 1, 2))


def gf_mul(a: int, b: int) -> int:
    """Multiply two bytes in GF(2^8) modulo the AES polynomial."""
    p = 0
    while b:
        if b & 1:
            p ^= a
        a <<= 1
        if a & 0x100:
            a ^= AES_POLY
        b >>= 1
    return p


def _gf_inverse(a: int) -> int:
    # a^254 == a^-1 for a != 0, and maps 0 to 0 as AES requires
    result, base, e = 1, a, 254
    while e:
        if e & 1:
            result = gf_mul(result, base)
        base = gf_mul(base, base)
        e >>= 1
    return result if a else 0


def _affine(b: int) -> int:
    rot = lambda x, k: ((x << k) | (x >> (8 - k))) & 0xFF
    return b ^ rot(b, 1) ^ rot(b, 2) ^ rot(b, 3) ^ rot(b, 4) ^ 0x63


def generate_sbox() -> tuple[int, ...]:
    return tuple(_affine(_gf_inverse(x)) for x in range(256))


def generate_rcon() -> tuple[int, ...]:
    out, r = [], 1
    for _ in range(10):
        out.append(r)
        r = gf_mul(r, 2)
    return tuple(out)


if generate_sbox() != SBOX or generate_rcon() != RCON:  # pragma: no cover
    raise ImportError("compiled-in AES tables disagree with their GF(2^8) definition")

INV_SBOX = tuple(SBOX.index(y) for y in range(256))


def _check_byte(x: int) -> int:
    if not 0 <= x <= 0xFF:
        raise ValueError(f"byte out of range: {x!r}")
    return x


def sbox(x: int) -> int:
    return SBOX[_check_byte(x)]


def inv_sbox(y: int) -> int:
    return INV_SBOX[_check_byte(y)]


def xtime(x: int) -> int:
    x <<= 1
    return (x ^ 0x1B) & 0xFF if x & 0x100 else x


def mix_column(col: Sequence[int]) -> tuple[int, int, int, int]:
    """AES MixColumns on a single 4-byte column."""
    if len(col) != 4:
        raise ValueError("a column has exactly 4 bytes")
    return tuple(
        reduce(xor, (gf_mul(coef, b) for coef, b in zip(row, col))) for row in MIX_MATRIX
    )  # type: ignore[return-value]


def shift_rows(state: Sequence[int]) -> list[int]:
    return [state[4 * ((c + r) % 4) + r] for c in range(4) for r in range(4)]


def mix_columns(state: Sequence[int]) -> list[int]:
    out: list[int] = []
    for c in range(4):
        out.extend(mix_column(state[4 * c : 4 * c + 4]))
    return out


def key_schedule_round(round_key: Sequence[int], round_index: int) -> list[int]:
    """Derive round key ``round_index`` (1..10) from the previous round key."""
    if not 1 <= round_index <= 10:
        raise ValueError(f"round_index must be in [1, 10], got {round_index}")
    if len(round_key) != 16:
        raise ValueError("AES-128 round keys have 16 bytes")
    w3 = round_key[12:16]
    temp = [SBOX[w3[(i + 1) % 4]] for i in range(4)]
    temp[0] ^= RCON[round_index - 1]
    out = [0] * 16
    for i in range(4):
        out[i] = round_key[i] ^ temp[i]
    for i in range(4, 16):
        out[i] = round_key[i] ^ out[i - 4]
    return out


def expand_key(key: Sequence[int]) -> list[list[int]]:
    """All 11 round keys of AES-128, starting with the cipher key itself."""
    keys = [list(key)]
    for r in range(1, 11):
        keys.append(key_schedule_round(keys[-1], r))
    return keys


def encrypt_block(key: Sequence[int], plaintext: Sequence[int]) -> bytes:
    if len(key) != 16 or len(plaintext) != 16:
        raise ValueError("AES-128 uses 16-byte keys and blocks")
    round_keys = expand_key(key)
    state = [p ^ k for p, k in zip(plaintext, round_keys[0])]
    for r in range(1, 11):
        state = shift_rows([SBOX[b] for b in state])
        if r != 10:
            state = mix_columns(state)
        state = [s ^ k for s, k in zip(state, round_keys[r])]
    return bytes(state)


# -- Boolean masking ---------------------------------------------------------


@dataclass(frozen=True)
class ShareConfig:
    d: int
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.d < 0:
            raise ValueError("masking order d must be non-negative")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.rng_seed)


@dataclass(frozen=True)
class MaskedByte:
    """A byte held as ``d+1`` Boolean shares.

    ``==`` compares share by share; use :meth:`same_value` to compare the
    represented bytes.
    """

    shares: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.shares:
            raise ValueError("a masked byte needs at least one share")
        for s in self.shares:
            _check_byte(s)

    @property
    def d(self) -> int:
        return len(self.shares) - 1

    @property
    def value(self) -> int:
        return unshare(self)

    def same_value(self, other: MaskedByte) -> bool:
        return unshare(self) == unshare(other)


def _draw_shares(value: int, d: int, rng: np.random.Generator) -> tuple[int, ...]:
    masks = [int(x) for x in rng.integers(0, 256, size=d)]
    return (*masks, reduce(xor, masks, _check_byte(value)))


def share(value: int, cfg: ShareConfig | int, rng: np.random.Generator) -> MaskedByte:
    """Split ``value`` into ``d+1`` shares; the first ``d`` are uniform masks."""
    d = cfg.d if isinstance(cfg, ShareConfig) else int(cfg)
    if d < 0:
        raise ValueError("masking order d must be non-negative")
    return MaskedByte(_draw_shares(value, d, rng))


def unshare(m: MaskedByte) -> int:
    return reduce(xor, m.shares)


def reshare(m: MaskedByte, rng: np.random.Generator) -> MaskedByte:
    """Fresh sharing of the same byte (identity for a single share)."""
    if m.d == 0:
        return m
    return MaskedByte(_draw_shares(unshare(m), m.d, rng))
