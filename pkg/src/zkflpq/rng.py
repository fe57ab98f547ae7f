"""Seedable deterministic random stream.

The generator is SHAKE-256 in counter mode: block ``i`` of the stream is
``SHAKE256(b"zkflpq-rng/v1" || seed || i_le64)`` truncated to ``BLOCK`` bytes.
The output only depends on the 32-byte seed, so the same seed reproduces the
same stream on every platform.
"""

from __future__ import annotations

import hashlib

import numpy as np

_DOMAIN = b"zkflpq-rng/v1"
BLOCK = 1 << 16


def _as_seed(seed) -> bytes:
    if isinstance(seed, (bytes, bytearray)):
        seed = bytes(seed)
        if len(seed) == 32:
            return seed
        return hashlib.sha3_256(b"zkflpq-seed" + seed).digest()
    if isinstance(seed, int):
        if seed < 0:
            raise ValueError("integer seeds must be non-negative")
        return hashlib.sha3_256(b"zkflpq-seed-int" + seed.to_bytes(32, "little")).digest()
    if isinstance(seed, str):
        return hashlib.sha3_256(b"zkflpq-seed-str" + seed.encode()).digest()
    raise TypeError(f"unsupported seed type {type(seed).__name__}")


class Rng:
    """Deterministic byte stream with vectorised samplers on top.

    Instances are single-owner; use :meth:`spawn` to hand independent
    streams to other parties.
    """

    def __init__(self, seed=0):
        self.seed = _as_seed(seed)
        self._counter = 0
        self._buf = b""
        self._pos = 0

    def __repr__(self):
        return f"Rng(seed={self.seed.hex()[:16]}..., block={self._counter})"

    def _refill(self, need: int) -> None:
        chunks = [self._buf[self._pos:]]
        have = len(chunks[0])
        while have < need:
            block = hashlib.shake_256(
                _DOMAIN + self.seed + self._counter.to_bytes(8, "little")
            ).digest(BLOCK)
            self._counter += 1
            chunks.append(block)
            have += len(block)
        self._buf = b"".join(chunks)
        self._pos = 0

    def read(self, n: int) -> bytes:
        if n < 0:
            raise ValueError("n must be non-negative")
        if len(self._buf) - self._pos < n:
            self._refill(n)
        out = self._buf[self._pos:self._pos + n]
        self._pos += n
        return out

    def copy(self) -> "Rng":
        other = Rng.__new__(Rng)
        other.seed = self.seed
        other._counter = self._counter
        other._buf = self._buf
        other._pos = self._pos
        return other

    def spawn(self, *labels) -> "Rng":
        """Child stream keyed by this stream's seed and ``labels``.

        Spawning does not consume from the parent, so children are stable
        no matter how much the parent has been read.
        """
        h = hashlib.sha3_256(b"zkflpq-spawn" + self.seed)
        for label in labels:
            data = str(label).encode()
            h.update(len(data).to_bytes(4, "little") + data)
        return Rng(h.digest())

    # -- samplers ---------------------------------------------------------

    def uint64(self, size: int) -> np.ndarray:
        return np.frombuffer(self.read(8 * size), dtype="<u8").astype(np.uint64)

    def randbelow(self, bound: int, size: int) -> np.ndarray:
        """``size`` i.i.d. integers uniform in ``[0, bound)`` (rejection on a bit mask)."""
        if bound < 1:
            raise ValueError("bound must be >= 1")
        if bound > 1 << 62:
            raise ValueError("bound too large")
        if size == 0:
            return np.zeros(0, dtype=np.int64)
        bits = (bound - 1).bit_length()
        width = 2 if bits <= 16 else 4 if bits <= 32 else 8
        dtype = np.dtype(f"<u{width}")
        mask = dtype.type((1 << bits) - 1)
        out = np.empty(size, dtype=np.int64)
        filled = 0
        while filled < size:
            want = size - filled
            # acceptance is > 1/2, oversample a little to usually finish in one pass
            count = int(want * 1.1 * (1 << bits) / bound) + 16
            draw = np.frombuffer(self.read(width * count), dtype=dtype) & mask
            ok = draw[draw < bound][:want]
            out[filled:filled + len(ok)] = ok
            filled += len(ok)
        return out

    def random(self, size: int) -> np.ndarray:
        """Floats uniform in ``[0, 1)`` with 53 bits of resolution."""
        return (self.uint64(size) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))

    def bits(self, size: int) -> np.ndarray:
        raw = np.frombuffer(self.read((size + 7) // 8), dtype=np.uint8)
        return np.unpackbits(raw, bitorder="little")[:size].astype(np.int64)

    def normal(self, size: int) -> np.ndarray:
        """Standard normal draws (Box-Muller)."""
        half = (size + 1) // 2
        u1 = 1.0 - self.random(half)  # (0, 1]
        u2 = self.random(half)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
        return z[:size]

    def numpy_generator(self) -> np.random.Generator:
        """A PCG64 generator seeded from this stream (used for bulk ML randomness)."""
        return np.random.default_rng(int.from_bytes(self.read(32), "little"))
