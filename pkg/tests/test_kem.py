import hashlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zkflpq.kem import (KemCiphertext, KemParams, KemPublicKey, kdf, kem_decaps, kem_encaps,
                        kem_keygen)
from zkflpq.ring import RingParams
from zkflpq.rng import Rng

P = KemParams()


def sha_prefix(data: bytes) -> str:
    return hashlib.sha3_256(data).hexdigest()[:32]


def test_default_sizes():
    assert P.ring == RingParams(256, 3329) and P.k == 3
    assert P.ek_bytes == 32 + 3 * 512
    assert P.ct_bytes == 4 * 512


def test_invalid_params():
    with pytest.raises(ValueError):
        KemParams(k=0)


def test_keygen_golden():
    kp = kem_keygen(P, Rng(7))
    assert sha_prefix(kp.ek.to_bytes() + kp.dk.to_bytes()) == "53b5983f962a669aaff67868cb350055"


def test_encaps_golden():
    kp = kem_keygen(P, Rng(7))
    ct, K = kem_encaps(kp.ek, Rng(8))
    assert sha_prefix(ct.to_bytes()) == "b1597c807cc91942d94c617efbdc130c"
    assert K.hex()[:32] == "3044a87f026dd3d406f5f9bfb66ba65f"


def test_secret_key_is_small():
    kp = kem_keygen(P, Rng(1))
    assert max(s.inf_norm() for s in kp.dk) <= P.eta1


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.integers(0, 2**32))
def test_round_trip(seed_k, seed_e):
    kp = kem_keygen(P, Rng(seed_k))
    ct, K = kem_encaps(kp.ek, Rng(seed_e))
    assert len(K) == 32
    assert kem_decaps(kp.dk, ct) == K


def test_serialization_round_trip():
    kp = kem_keygen(P, Rng(2))
    ct, K = kem_encaps(kp.ek, Rng(3))
    ek2 = KemPublicKey.from_bytes(P, kp.ek.to_bytes())
    assert ek2.to_bytes() == kp.ek.to_bytes()
    ct2 = KemCiphertext.from_bytes(P, ct.to_bytes())
    assert kem_decaps(kp.dk, ct2) == K
    with pytest.raises(ValueError):
        KemCiphertext.from_bytes(P, ct.to_bytes()[:-1])


def test_wrong_key_gives_different_secret():
    a, b = kem_keygen(P, Rng(4)), kem_keygen(P, Rng(5))
    ct, K = kem_encaps(a.ek, Rng(6))
    assert kem_decaps(b.dk, ct) != K


def test_kdf_depends_on_every_bit():
    bits = np.zeros(256, dtype=np.int64)
    base = kdf(bits)
    for i in (0, 100, 255):
        flipped = bits.copy()
        flipped[i] = 1
        assert kdf(flipped) != base


def test_session_keys_distinct_across_encaps():
    kp = kem_keygen(P, Rng(9))
    rng = Rng(10)
    keys = {kem_encaps(kp.ek, rng)[1] for _ in range(50)}
    assert len(keys) == 50
