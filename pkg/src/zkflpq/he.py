"""BFV additive homomorphic encryption over R_q and fixed-point gradient encoding."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ring import (RingElement, RingParams, sample_gaussian, sample_ternary,
                   sample_uniform)
from .rng import Rng


class NoiseBudgetExceeded(ValueError):
    pass


class PlaintextRangeError(ValueError):
    pass


@dataclass(frozen=True)
class BfvParams:
    ring: RingParams = RingParams(512, 2**32 - 5)
    t: int = 2**16
    sigma: float = 3.2

    def __post_init__(self):
        if not 2 <= self.t < self.ring.q:
            raise ValueError("plaintext modulus must satisfy 2 <= t < q")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def delta(self) -> int:
        return self.ring.q // self.t

    @property
    def ct_bytes(self) -> int:
        return 2 * self.ring.byte_size


@dataclass(frozen=True)
class BfvKeyPair:
    pk: tuple[RingElement, RingElement]
    sk: RingElement


@dataclass(frozen=True)
class HeCiphertext:
    c0: RingElement
    c1: RingElement
    adds: int = 1

    def to_bytes(self) -> bytes:
        return self.c0.to_bytes() + self.c1.to_bytes()

    @classmethod
    def from_bytes(cls, params: BfvParams, data: bytes, adds: int = 1) -> "HeCiphertext":
        half = params.ring.byte_size
        if len(data) != 2 * half:
            raise ValueError(f"expected {2 * half} bytes, got {len(data)}")
        return cls(RingElement.from_bytes(params.ring, data[:half]),
                   RingElement.from_bytes(params.ring, data[half:]), adds)


@dataclass(frozen=True)
class QuantizedBlock:
    """Up to n plaintext slots in ``[0, t)`` holding centered fixed-point values."""

    values: np.ndarray
    scale: float = 1.0


def noise_bound(N: int, params: BfvParams) -> float:
    """Worst-case accumulated noise ``N (2 sigma + 1) n`` after summing N ciphertexts."""
    return N * (2 * params.sigma + 1) * params.ring.n


def noise_budget(params: BfvParams) -> float:
    return params.ring.q / (2 * params.t)


def check_noise_budget(N: int, params: BfvParams) -> bool:
    if N < 1:
        raise ValueError("addition count must be >= 1")
    return noise_bound(N, params) < noise_budget(params)


def bfv_keygen(params: BfvParams, rng: Rng) -> BfvKeyPair:
    # draw order (s, a, e) is part of the determinism contract
    s = sample_ternary(params.ring, rng)
    a = sample_uniform(params.ring, rng)
    e = sample_gaussian(params.ring, params.sigma, rng)
    return BfvKeyPair((-(a * s + e), a), s)


def _scale_up(m: np.ndarray, params: BfvParams) -> RingElement:
    # round(q m / t) rather than floor(q/t) m: with t not dividing q the latter
    # loses about one plaintext unit every time a sum wraps past t
    q, t = params.ring.q, params.t
    scaled = np.array([(q * int(v) + t // 2) // t for v in m], dtype=np.int64)
    return RingElement(params.ring, scaled)


def bfv_encrypt(pk, m: QuantizedBlock, params: BfvParams, rng: Rng) -> HeCiphertext:
    n = params.ring.n
    vals = np.asarray(m.values, dtype=np.int64)
    if len(vals) > n:
        raise PlaintextRangeError(f"block holds at most {n} values, got {len(vals)}")
    if len(vals) and (vals.min() < 0 or vals.max() >= params.t):
        raise PlaintextRangeError("plaintext values must lie in [0, t)")
    padded = np.zeros(n, dtype=np.int64)
    padded[: len(vals)] = vals
    p0, p1 = pk
    u = sample_ternary(params.ring, rng)
    e0 = sample_gaussian(params.ring, params.sigma, rng)
    e1 = sample_gaussian(params.ring, params.sigma, rng)
    c0 = p0 * u + e0 + _scale_up(padded, params)
    c1 = p1 * u + e1
    return HeCiphertext(c0, c1, 1)


def bfv_add(a: HeCiphertext, b: HeCiphertext, params: BfvParams) -> HeCiphertext:
    if a.c0.params != params.ring or b.c0.params != params.ring:
        raise ValueError("ciphertext parameters do not match")
    adds = a.adds + b.adds
    if not check_noise_budget(adds, params):
        raise NoiseBudgetExceeded(
            f"{adds} contributions exceed the noise budget "
            f"({noise_bound(adds, params):.1f} >= {noise_budget(params):.1f})")
    return HeCiphertext(a.c0 + b.c0, a.c1 + b.c1, adds)


def bfv_sum(cts: Sequence[HeCiphertext], params: BfvParams) -> HeCiphertext:
    if not cts:
        raise ValueError("nothing to sum")
    acc = cts[0]
    for ct in cts[1:]:
        acc = bfv_add(acc, ct, params)
    return acc


def bfv_decrypt(sk: RingElement, ct: HeCiphertext, params: BfvParams, scale: float = 1.0) -> QuantizedBlock:
    q, t = params.ring.q, params.t
    x = (ct.c0 + ct.c1 * sk).coeffs
    # round(t x / q) mod t; t x < 2^48 fits int64
    m = ((t * x + q // 2) // q) % t
    return QuantizedBlock(m, scale)


# -- fixed-point encoding ---------------------------------------------------


def quantize_gradient(x, scale: float, params: BfvParams, overflow: str = "raise") -> list[QuantizedBlock]:
    """Centered fixed-point ``round(x * scale) mod t`` split into blocks of at most n slots.

    ``overflow="wrap"`` silently reduces out-of-range values mod t instead of
    raising; only an adversarial client has a use for it.
    """
    t, n = params.t, params.ring.n
    ints = np.rint(np.asarray(x, dtype=np.float64) * scale).astype(np.int64)
    if overflow == "raise":
        if len(ints) and (ints.min() < -(t // 2) or ints.max() >= t // 2):
            raise PlaintextRangeError("value exceeds the centered plaintext range; lower the scale")
    elif overflow != "wrap":
        raise ValueError(f"unknown overflow policy {overflow!r}")
    vals = np.mod(ints, t)
    return [QuantizedBlock(vals[i:i + n], scale) for i in range(0, len(vals), n)]


def dequantize_sum(blocks: Sequence[QuantizedBlock], scale: float, N: int, params: BfvParams,
                   length: int | None = None) -> np.ndarray:
    """Centered lift of a mod-t sum of N contributions, divided by ``scale * N``."""
    if N < 1:
        raise ValueError("need at least one contributor")
    if not blocks:
        return np.zeros(0)
    t = params.t
    vals = np.concatenate([np.asarray(b.values, dtype=np.int64) for b in blocks]) % t
    if length is not None:
        vals = vals[:length]
    vals = np.where(vals >= t // 2, vals - t, vals)
    return vals / (scale * N)
