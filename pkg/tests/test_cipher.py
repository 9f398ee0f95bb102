import numpy as np
import pytest
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from hypothesis import given, settings
from hypothesis import strategies as st

from snapshot_attack import cipher

FIPS_KEY = bytes(range(16))
FIPS_PT = bytes.fromhex("00112233445566778899aabbccddeeff")
FIPS_CT = bytes.fromhex("69c4e0d86a7b0430d8cdb78070b4c55a")

blocks = st.binary(min_size=16, max_size=16)


def reference_encrypt(key: bytes, pt: bytes) -> bytes:
    enc = Cipher(algorithms.AES(key), modes.ECB()).encryptor()
    return enc.update(pt) + enc.finalize()


def test_known_answer_vector():
    assert cipher.encrypt_block(FIPS_KEY, FIPS_PT) == FIPS_CT


@settings(max_examples=200, deadline=None)
@given(blocks, blocks)
def test_matches_independent_implementation(key, pt):
    assert cipher.encrypt_block(key, pt) == reference_encrypt(key, pt)


def test_zero_key_round_one():
    rk = cipher.key_schedule_round([0] * 16, 1)
    assert rk[:4] == [0x62, 0x63, 0x63, 0x63]
    assert rk == [0x62, 0x63, 0x63, 0x63] * 4


def test_key_expansion_vector():
    key = bytes.fromhex("2b7e151628aed2a6abf7158809cf4f3c")
    assert bytes(cipher.key_schedule_round(key, 1)) == bytes.fromhex("a0fafe1788542cb123a339392a6c7605")
    assert bytes(cipher.expand_key(key)[10]) == bytes.fromhex("d014f9a8c9ee2589e13f0cc8b6630ca6")


def test_round_index_bounds():
    for bad in (0, 11):
        with pytest.raises(ValueError):
            cipher.key_schedule_round([0] * 16, bad)


def test_sbox_fixed_points_and_inverse():
    assert cipher.sbox(0x00) == 0x63
    assert cipher.sbox(0x53) == 0xED
    assert cipher.inv_sbox(0x63) == 0x00
    assert sorted(cipher.SBOX) == list(range(256))
    assert all(cipher.inv_sbox(cipher.sbox(x)) == x for x in range(256))
    assert cipher.generate_sbox() == cipher.SBOX
    with pytest.raises(ValueError):
        cipher.sbox(256)


def test_gf_mul_and_xtime():
    assert cipher.gf_mul(0x57, 0x83) == 0xC1
    assert cipher.gf_mul(0x57, 0x13) == 0xFE
    assert all(cipher.xtime(x) == cipher.gf_mul(x, 2) for x in range(256))
    assert all(cipher.gf_mul(x, cipher.gf_mul(x, 1)) == cipher.gf_mul(x, x) for x in range(256))


def test_mix_column_vector():
    assert cipher.mix_column([0xDB, 0x13, 0x53, 0x45]) == (0x8E, 0x4D, 0xA1, 0xBC)
    assert cipher.mix_column([0xF2, 0x0A, 0x22, 0x5C]) == (0x9F, 0xDC, 0x58, 0x9D)
    with pytest.raises(ValueError):
        cipher.mix_column([1, 2, 3])


def test_shift_rows_positions():
    state = list(range(16))
    out = cipher.shift_rows(state)
    assert out[0:4] == [0, 5, 10, 15]
    assert out[4:8] == [4, 9, 14, 3]


# -- masking ------------------------------------------------------------------


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 255), st.integers(0, 6), st.integers(0, 2**32))
def test_share_roundtrip(value, d, seed):
    rng = np.random.default_rng(seed)
    m = cipher.share(value, d, rng)
    assert len(m.shares) == d + 1
    assert cipher.unshare(m) == value
    r = cipher.reshare(m, rng)
    assert r.same_value(m) and r.d == d


def test_d0_is_identity():
    rng = np.random.default_rng(1)
    m = cipher.share(0xAB, cipher.ShareConfig(0), rng)
    assert m.shares == (0xAB,)
    assert cipher.reshare(m, rng) == m


def test_share_equality_is_sharewise():
    a = cipher.MaskedByte((0x01, 0x02))
    b = cipher.MaskedByte((0x02, 0x01))
    assert a != b and a.same_value(b)


def test_masks_look_uniform():
    rng = np.random.default_rng(7)
    first = [cipher.share(0x00, 1, rng).shares[0] for _ in range(20000)]
    counts = np.bincount(first, minlength=256)
    # chi-square with 255 dof; 99.9% quantile is about 330
    chi2 = ((counts - 20000 / 256) ** 2 / (20000 / 256)).sum()
    assert chi2 < 330


def test_negative_order_rejected():
    with pytest.raises(ValueError):
        cipher.ShareConfig(-1)
    with pytest.raises(ValueError):
        cipher.share(1, -1, np.random.default_rng())
