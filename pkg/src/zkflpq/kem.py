"""MLWE key encapsulation.

Key generation is the module-LWE sketch ``t = A s + e``.  Encapsulation is
the textbook IND-CPA encryption of a random n-bit message m, one bit per
coefficient scaled by round(q/2), and the session key is a SHA3-256 KDF of m.
There is no ciphertext compression and no Fujisaki-Okamoto re-encryption
check, so this is *not* FIPS 203 ML-KEM; wire sizes are as built.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .ring import (ModuleVector, RingElement, RingParams, expand_matrix, mat_vec,
                   sample_cbd, transpose)
from .rng import Rng

KDF_TAG = b"zkflpq-kem-kdf/v1"
SEED_BYTES = 32


@dataclass(frozen=True)
class KemParams:
    ring: RingParams = RingParams(256, 3329)
    k: int = 3
    eta1: int = 2
    eta2: int = 2

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("module rank k must be >= 1")
        if self.ring.n % 8:
            raise ValueError("ring degree must be a multiple of 8 to carry a byte message")

    @property
    def ek_bytes(self) -> int:
        return SEED_BYTES + self.k * self.ring.byte_size

    @property
    def ct_bytes(self) -> int:
        return (self.k + 1) * self.ring.byte_size


@dataclass(frozen=True)
class KemPublicKey:
    seed: bytes
    t: ModuleVector
    params: KemParams

    def matrix(self) -> list[ModuleVector]:
        return expand_matrix(self.seed, self.params.ring, self.params.k)

    def to_bytes(self) -> bytes:
        return self.seed + self.t.to_bytes()

    @classmethod
    def from_bytes(cls, params: KemParams, data: bytes) -> "KemPublicKey":
        if len(data) != params.ek_bytes:
            raise ValueError(f"expected {params.ek_bytes} bytes, got {len(data)}")
        t = ModuleVector.from_bytes(params.ring, params.k, data[SEED_BYTES:])
        return cls(data[:SEED_BYTES], t, params)


@dataclass(frozen=True)
class KemKeyPair:
    ek: KemPublicKey
    dk: ModuleVector


@dataclass(frozen=True)
class KemCiphertext:
    u: ModuleVector
    v: RingElement

    def to_bytes(self) -> bytes:
        return self.u.to_bytes() + self.v.to_bytes()

    @classmethod
    def from_bytes(cls, params: KemParams, data: bytes) -> "KemCiphertext":
        if len(data) != params.ct_bytes:
            raise ValueError(f"expected {params.ct_bytes} bytes, got {len(data)}")
        split = params.k * params.ring.byte_size
        return cls(ModuleVector.from_bytes(params.ring, params.k, data[:split]),
                   RingElement.from_bytes(params.ring, data[split:]))


def kdf(message_bits: np.ndarray) -> bytes:
    """256-bit session key from the encapsulated message."""
    packed = np.packbits(np.asarray(message_bits, dtype=np.uint8), bitorder="little").tobytes()
    return hashlib.sha3_256(KDF_TAG + packed).digest()


def kem_keygen(params: KemParams, rng: Rng) -> KemKeyPair:
    # draw order (seed, s, e) is part of the determinism contract
    seed = rng.read(SEED_BYTES)
    A = expand_matrix(seed, params.ring, params.k)
    s = ModuleVector(sample_cbd(params.ring, params.eta1, rng) for _ in range(params.k))
    e = ModuleVector(sample_cbd(params.ring, params.eta1, rng) for _ in range(params.k))
    t = mat_vec(A, s) + e
    return KemKeyPair(KemPublicKey(seed, t, params), s)


def _encrypt(ek: KemPublicKey, bits: np.ndarray, rng: Rng) -> KemCiphertext:
    p = ek.params
    half_q = (p.ring.q + 1) // 2
    r = ModuleVector(sample_cbd(p.ring, p.eta1, rng) for _ in range(p.k))
    e1 = ModuleVector(sample_cbd(p.ring, p.eta2, rng) for _ in range(p.k))
    e2 = sample_cbd(p.ring, p.eta2, rng)
    u = mat_vec(transpose(ek.matrix()), r) + e1
    v = ek.t.dot(r) + e2 + RingElement(p.ring, bits * half_q)
    return KemCiphertext(u, v)


def kem_encaps(ek: KemPublicKey, rng: Rng) -> tuple[KemCiphertext, bytes]:
    bits = rng.bits(ek.params.ring.n)
    return _encrypt(ek, bits, rng), kdf(bits)


def kem_decaps(dk: ModuleVector, c: KemCiphertext) -> bytes:
    """Always returns a key; a wrong key only shows up when the AEAD fails to open."""
    q = c.v.params.q
    w = (c.v - dk.dot(c.u)).centered()
    bits = (np.abs(w) > q // 4).astype(np.int64)
    return kdf(bits)
