"""Arithmetic in R_q = Z_q[X]/(X^n + 1) and the samplers built on :class:`Rng`.

Multiplication is schoolbook (``np.convolve`` is a direct O(n^2) product)
followed by the negacyclic fold X^n = -1.  Moduli that are too wide for an
int64 accumulator are handled by splitting the right operand into limbs.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .rng import Rng

_ACC_BITS = 63
GAUSSIAN_TAILCUT = 10.0


class ParameterMismatch(ValueError):
    pass


@dataclass(frozen=True)
class RingParams:
    n: int
    q: int
    limb_bits: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two, got {self.n}")
        if self.q < 2:
            raise ValueError("q must be >= 2")
        # widest limb w with n * (q-1) * (2^w - 1) < 2^63
        room = ((1 << _ACC_BITS) - 1) // (self.n * max(self.q - 1, 1))
        if room < 1:
            raise ValueError(f"q={self.q} too large for n={self.n} in a 63-bit accumulator")
        object.__setattr__(self, "limb_bits", (room + 1).bit_length() - 1)

    @property
    def coeff_bytes(self) -> int:
        return max(1, ((self.q - 1).bit_length() + 7) // 8)

    @property
    def byte_size(self) -> int:
        return self.n * self.coeff_bytes


def _as_coeffs(values, params: RingParams) -> np.ndarray:
    arr = np.asarray(values)
    if arr.shape != (params.n,):
        raise ValueError(f"expected {params.n} coefficients, got shape {arr.shape}")
    if arr.dtype == object:
        arr = np.array([int(v) % params.q for v in arr], dtype=np.int64)
    else:
        arr = np.mod(arr.astype(np.int64), params.q)
    arr.setflags(write=False)
    return arr


class RingElement:
    """Immutable element of R_q, coefficients stored in ``[0, q)``."""

    __slots__ = ("params", "coeffs")

    def __init__(self, params: RingParams, coeffs):
        self.params = params
        self.coeffs = _as_coeffs(coeffs, params)

    @classmethod
    def zero(cls, params: RingParams) -> "RingElement":
        return cls(params, np.zeros(params.n, dtype=np.int64))

    @classmethod
    def monomial(cls, params: RingParams, degree: int, coeff: int = 1) -> "RingElement":
        """``coeff * X^degree`` reduced in R_q (degrees >= n wrap with a sign flip)."""
        c = np.zeros(params.n, dtype=np.int64)
        sign = -1 if (degree // params.n) % 2 else 1
        c[degree % params.n] = sign * coeff
        return cls(params, c)

    def centered(self) -> np.ndarray:
        """Coefficients lifted to ``[-q/2, q/2)``."""
        q = self.params.q
        c = self.coeffs.copy()
        c[c >= (q + 1) // 2] -= q
        return c

    def inf_norm(self) -> int:
        return int(np.abs(self.centered()).max(initial=0))

    def _check(self, other) -> None:
        if not isinstance(other, RingElement):
            raise TypeError(f"expected RingElement, got {type(other).__name__}")
        if other.params != self.params:
            raise ParameterMismatch(f"{self.params} != {other.params}")

    def __add__(self, other):
        return ring_add(self, other)

    def __sub__(self, other):
        self._check(other)
        return RingElement(self.params, self.coeffs - other.coeffs)

    def __neg__(self):
        return RingElement(self.params, -self.coeffs)

    def __mul__(self, other):
        if isinstance(other, (int, np.integer)):
            q = self.params.q
            k = int(other) % q
            if (q - 1) * (q - 1) < 1 << _ACC_BITS:
                return RingElement(self.params, (self.coeffs * k) % q)
            return RingElement(self.params, np.array([int(c) * k for c in self.coeffs], dtype=object))
        return ring_mul(self, other)

    __rmul__ = __mul__

    def __eq__(self, other):
        return (isinstance(other, RingElement) and other.params == self.params
                and np.array_equal(self.coeffs, other.coeffs))

    def __hash__(self):
        return hash((self.params, self.coeffs.tobytes()))

    def __repr__(self):
        head = ", ".join(str(int(c)) for c in self.coeffs[:4])
        return f"RingElement(n={self.params.n}, q={self.params.q}, [{head}{', ...' if self.params.n > 4 else ''}])"

    def to_bytes(self) -> bytes:
        return encode_coeffs(self.coeffs, self.params.coeff_bytes)

    @classmethod
    def from_bytes(cls, params: RingParams, data: bytes) -> "RingElement":
        if len(data) != params.byte_size:
            raise ValueError(f"expected {params.byte_size} bytes, got {len(data)}")
        return cls(params, decode_coeffs(data, params.coeff_bytes, params.n))


def encode_coeffs(coeffs: np.ndarray, width: int) -> bytes:
    """Little-endian fixed-width encoding of non-negative integers."""
    wide = np.ascontiguousarray(coeffs, dtype="<u8").view(np.uint8).reshape(-1, 8)
    return wide[:, :width].tobytes()


def decode_coeffs(data: bytes, width: int, count: int) -> np.ndarray:
    raw = np.frombuffer(data, dtype=np.uint8).reshape(count, width)
    wide = np.zeros((count, 8), dtype=np.uint8)
    wide[:, :width] = raw
    return wide.view("<u8").reshape(count).astype(np.int64)


def ring_add(a: RingElement, b: RingElement) -> RingElement:
    a._check(b)
    return RingElement(a.params, a.coeffs + b.coeffs)


def _convolve_mod(a: np.ndarray, b: np.ndarray, params: RingParams) -> np.ndarray:
    q, w = params.q, params.limb_bits
    if w >= (q - 1).bit_length():
        return np.convolve(a, b) % q
    # Horner over limbs of b, most significant first; acc * 2^w stays below 2^63
    mask = (1 << w) - 1
    nlimbs = -(-(q - 1).bit_length() // w)
    acc = np.zeros(2 * params.n - 1, dtype=np.int64)
    for k in reversed(range(nlimbs)):
        limb = (b >> (k * w)) & mask
        acc = ((acc << w) % q + np.convolve(a, limb) % q) % q
    return acc


def ring_mul(a: RingElement, b: RingElement) -> RingElement:
    """Schoolbook product in R_q with X^n = -1."""
    a._check(b)
    n, q = a.params.n, a.params.q
    full = _convolve_mod(a.coeffs, b.coeffs, a.params)
    out = full[:n].copy()
    out[: n - 1] -= full[n:]
    return RingElement(a.params, out % q)


class ModuleVector:
    """Vector of k ring elements over one :class:`RingParams`."""

    __slots__ = ("elems",)

    def __init__(self, elems: Sequence[RingElement]):
        elems = tuple(elems)
        if not elems:
            raise ValueError("a module vector needs k >= 1 elements")
        p = elems[0].params
        if any(e.params != p for e in elems):
            raise ParameterMismatch("module vector elements must share parameters")
        self.elems = elems

    @property
    def params(self) -> RingParams:
        return self.elems[0].params

    def __len__(self):
        return len(self.elems)

    def __iter__(self):
        return iter(self.elems)

    def __getitem__(self, i):
        return self.elems[i]

    def __add__(self, other: "ModuleVector") -> "ModuleVector":
        if len(other) != len(self):
            raise ParameterMismatch("module rank mismatch")
        return ModuleVector(a + b for a, b in zip(self, other))

    def __sub__(self, other: "ModuleVector") -> "ModuleVector":
        if len(other) != len(self):
            raise ParameterMismatch("module rank mismatch")
        return ModuleVector(a - b for a, b in zip(self, other))

    def __eq__(self, other):
        return isinstance(other, ModuleVector) and self.elems == other.elems

    def dot(self, other: "ModuleVector") -> RingElement:
        if len(other) != len(self):
            raise ParameterMismatch("module rank mismatch")
        acc = RingElement.zero(self.params)
        for a, b in zip(self, other):
            acc = acc + a * b
        return acc

    def to_bytes(self) -> bytes:
        return b"".join(e.to_bytes() for e in self.elems)

    @classmethod
    def from_bytes(cls, params: RingParams, k: int, data: bytes) -> "ModuleVector":
        size = params.byte_size
        if len(data) != k * size:
            raise ValueError(f"expected {k * size} bytes, got {len(data)}")
        return cls(RingElement.from_bytes(params, data[i * size:(i + 1) * size]) for i in range(k))


def mat_vec(rows: Sequence[ModuleVector], v: ModuleVector) -> ModuleVector:
    return ModuleVector(row.dot(v) for row in rows)


def transpose(rows: Sequence[ModuleVector]) -> list[ModuleVector]:
    k = len(rows[0])
    return [ModuleVector(rows[i][j] for i in range(len(rows))) for j in range(k)]


# -- samplers ---------------------------------------------------------------


def sample_uniform(params: RingParams, rng: Rng) -> RingElement:
    return RingElement(params, rng.randbelow(params.q, params.n))


def sample_cbd(params: RingParams, eta: int, rng: Rng) -> RingElement:
    """Centered binomial: sum of ``eta`` fair bits minus sum of ``eta`` fair bits."""
    if eta < 1:
        raise ValueError("eta must be >= 1")
    bits = rng.bits(2 * eta * params.n).reshape(params.n, 2 * eta)
    return RingElement(params, bits[:, :eta].sum(axis=1) - bits[:, eta:].sum(axis=1))


def sample_ternary(params: RingParams, rng: Rng) -> RingElement:
    return RingElement(params, rng.randbelow(3, params.n) - 1)


def expand_matrix(seed: bytes, params: RingParams, k: int) -> list[ModuleVector]:
    """k x k matrix of uniform ring elements, entry (i, j) drawn from ``Rng(seed).spawn("A", i, j)``."""
    base = Rng(seed)
    return [ModuleVector(sample_uniform(params, base.spawn("A", i, j)) for j in range(k))
            for i in range(k)]


@functools.lru_cache(maxsize=16)
def _gaussian_table(sigma: float):
    # Proposal: round(N(0, sigma^2)). Its pmf p(x) is a difference of normal CDFs;
    # the acceptance ratio rho(x) / (M p(x)) corrects it to the discrete Gaussian.
    cut = int(math.ceil(GAUSSIAN_TAILCUT * sigma))
    xs = np.arange(0, cut + 1, dtype=np.float64)
    p = ndtr(-(xs - 0.5) / sigma) - ndtr(-(xs + 0.5) / sigma)
    p[0] = 1.0 - 2.0 * ndtr(-0.5 / sigma)
    rho = np.exp(-(xs ** 2) / (2 * sigma * sigma))
    ratio = rho / p
    return cut, ratio / ratio.max()


def sample_gaussian_vec(dim: int, sigma: float, rng: Rng) -> np.ndarray:
    """``dim`` i.i.d. draws from the discrete Gaussian D_{Z, sigma}, tail-cut at 10 sigma."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if dim == 0:
        return np.zeros(0, dtype=np.int64)
    cut, accept = _gaussian_table(float(sigma))
    out = np.empty(dim, dtype=np.int64)
    filled = 0
    while filled < dim:
        want = dim - filled
        draw = int(want * 1.05) + 8
        x = np.rint(rng.normal(draw) * sigma).astype(np.int64)
        u = rng.random(draw)
        ax = np.abs(x)
        inside = ax <= cut
        ok = inside.copy()
        ok[inside] = u[inside] < accept[ax[inside]]
        got = x[ok][:want]
        out[filled:filled + len(got)] = got
        filled += len(got)
    return out


def sample_gaussian(params: RingParams, sigma: float, rng: Rng) -> RingElement:
    return RingElement(params, sample_gaussian_vec(params.n, sigma, rng))
