"""Non-interactive lattice proof that a quantized update has small l2 norm.

The prover commits to the quantized update ``w`` with an unstructured SIS
commitment ``C = A (w || r) mod q`` and to a Gaussian mask ``T = A (y || r')``,
derives the challenge from ``SHA3-256(C || T || tau)``, and answers with
``z = y + c w`` and ``r_z = r' + c r mod q``.  The verifier checks

  (a) ``||z||_2 <= B`` with ``B = 1.5 sigma_y sqrt(d)``,
  (b) the challenge was derived from ``(C, T, tau)``,
  (c) ``A (z || r_z) = T + c C (mod q)``.

Everything lives in quantized units: ``w = round(dw * scale)`` and
``sigma_y = beta * tau * scale``.

Challenge window
----------------
Check (a) only separates short from long updates through the ``c^2 ||w||^2``
term in ``||z||^2``, so the multiplier ``c`` must be large (a tiny ``c`` lets
any update through) but not so large that an honest ``||w|| <= tau * scale``
overshoots ``B``.  The multiplier is therefore drawn from a window just below
``c_max``, the largest value for which an honest update at exactly the
threshold clears ``B`` with ``completeness_sigmas`` standard deviations of
margin::

    c = c_max - (H(C || T || tau) mod 2^kappa)

:meth:`ZkpParams.norm_gap` reports the resulting ratio above which updates
are rejected with the same margin.

The prover's restart rule defaults to aborting on ``||z|| > B``.  The
Gaussian rejection rule (:func:`rejection_sample_accept`) is available with
``rejection="gaussian"``; it only accepts with useful probability when
``sigma_y >= beta * ||c w||``, which the window above does not satisfy at
gradient dimensions.
"""

from __future__ import annotations

import functools
import hashlib
import math
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .ring import sample_gaussian_vec
from .rng import Rng

FS_TAG = b"zkflpq-zkp-fs/v1"
PROOF_MAGIC = b"ZKNP\x01"
BLOCK_COLS = 8192
SKIP_CHECK_ENV = "ZKFLPQ_SKIP_CHECK"


class ProofAborted(RuntimeError):
    """The prover hit its restart limit; ``last`` is the final (unaccepted) transcript."""

    def __init__(self, msg, last: "NormProof", restarts: int):
        super().__init__(msg)
        self.last = last
        self.restarts = restarts


@dataclass(frozen=True)
class ZkpParams:
    d: int
    ell: int = 128
    m: int = 256
    q: int = 7681
    sigma_r: float = 1024.0
    beta: float = 12.0
    kappa: int = 8
    tau: float = 5.0
    scale: float = 4096.0
    max_restarts: int = 64
    completeness_sigmas: float = 6.0
    # False: plain c = H mod 2^kappa (no window), kept for comparison runs
    windowed: bool = True

    def __post_init__(self):
        if self.d < 1 or self.ell < 1 or self.m < 1:
            raise ValueError("dimensions must be positive")
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if self.q >= 1 << 16:
            raise ValueError("commitment modulus must fit in 16 bits")
        if self.windowed and _c_max(self.d, self.beta, self.completeness_sigmas) - (1 << self.kappa) + 1 < 1:
            raise ValueError(
                f"no challenge window of 2^{self.kappa} fits below c_max={self.c_max} at d={self.d}; "
                "lower kappa or completeness_sigmas")

    def sigma_y(self, tau: float | None = None) -> float:
        return self.beta * (self.tau if tau is None else tau) * self.scale

    def bound(self, tau: float | None = None) -> float:
        return 1.5 * self.sigma_y(tau) * math.sqrt(self.d)

    @property
    def c_max(self) -> int:
        if not self.windowed:
            return (1 << self.kappa) - 1
        return _c_max(self.d, self.beta, self.completeness_sigmas)

    @property
    def c_min(self) -> int:
        return self.c_max - (1 << self.kappa) + 1

    @property
    def rejection_m(self) -> float:
        return math.exp(12.0 / self.beta + 1.0 / (2.0 * self.beta ** 2))

    def norm_gap(self) -> float:
        """Norm ratio ``||dw|| / tau`` above which check (a) rejects with the completeness margin."""
        d, k = self.d, self.completeness_sigmas
        lo, hi = 1.0, 1e6
        for _ in range(200):
            rho = 0.5 * (lo + hi)
            x = self.c_min * rho / self.beta
            if x * x - k * math.sqrt(2 * d + 4 * x * x) >= 1.25 * d:
                hi = rho
            else:
                lo = rho
        return hi


@functools.lru_cache(maxsize=64)
def _c_max(d: int, beta: float, k: float) -> int:
    # honest ||z||^2 / sigma_y^2 ~ d + x^2 with fluctuation sd sqrt(2d + 4x^2), x = c / beta;
    # largest x with d + x^2 + k sd <= 2.25 d
    def fits(x):
        return x * x + k * math.sqrt(2 * d + 4 * x * x) <= 1.25 * d

    if not fits(0.0):
        return 0
    lo, hi = 0.0, math.sqrt(1.25 * d)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if fits(mid) else (lo, mid)
    return int(math.floor(lo * beta))


@dataclass(frozen=True)
class QuantizedGradient:
    w_tilde: np.ndarray
    scale: float

    @classmethod
    def from_update(cls, delta_w, scale: float) -> "QuantizedGradient":
        return cls(np.rint(np.asarray(delta_w, dtype=np.float64) * scale).astype(np.int64), scale)


@dataclass(frozen=True, eq=False)
class NormProof:
    C: np.ndarray
    T: np.ndarray
    c: int
    z: np.ndarray
    r_z: np.ndarray
    # prover-side bookkeeping, not serialized
    restarts: int = field(default=0, compare=False)

    def __eq__(self, other):
        if not isinstance(other, NormProof):
            return NotImplemented
        return (int(self.c) == int(other.c)
                and all(np.array_equal(getattr(self, f), getattr(other, f)) for f in ("C", "T", "z", "r_z")))

    __hash__ = None

    def to_bytes(self) -> bytes:
        z = np.asarray(self.z, dtype=np.int64)
        width = 4 if len(z) == 0 or (z.min() >= -(1 << 31) and z.max() < 1 << 31) else 8
        head = PROOF_MAGIC + struct.pack("<IIIBQ", len(z), len(self.r_z), len(self.C), width, int(self.c))
        return b"".join([
            head,
            np.asarray(self.C, dtype="<u2").tobytes(),
            np.asarray(self.T, dtype="<u2").tobytes(),
            z.astype(f"<i{width}").tobytes(),
            np.asarray(self.r_z, dtype="<u2").tobytes(),
        ])

    @classmethod
    def from_bytes(cls, data: bytes) -> "NormProof":
        if not data.startswith(PROOF_MAGIC):
            raise ValueError("not a norm proof")
        pos = len(PROOF_MAGIC)
        d, ell, m, width, c = struct.unpack_from("<IIIBQ", data, pos)
        pos += struct.calcsize("<IIIBQ")
        if width not in (4, 8):
            raise ValueError("bad integer width")
        expect = pos + 2 * m + 2 * m + width * d + 2 * ell
        if len(data) != expect:
            raise ValueError(f"expected {expect} bytes, got {len(data)}")

        def take(count, dtype, size):
            nonlocal pos
            arr = np.frombuffer(data, dtype=dtype, count=count, offset=pos).astype(np.int64)
            pos += count * size
            return arr

        C = take(m, "<u2", 2)
        T = take(m, "<u2", 2)
        z = take(d, f"<i{width}", width)
        r_z = take(ell, "<u2", 2)
        return cls(C, T, c, z, r_z)


# -- commitment -------------------------------------------------------------


@functools.lru_cache(maxsize=2)
def _expanded(seed: bytes, m: int, cols: int, q: int) -> tuple:
    base = Rng(seed)
    blocks = []
    for j, start in enumerate(range(0, cols, BLOCK_COLS)):
        width = min(BLOCK_COLS, cols - start)
        blk = base.spawn("commit-A", j).randbelow(q, m * width).astype(np.uint16).reshape(m, width)
        blk.setflags(write=False)
        blocks.append(blk)
    return tuple(blocks)


@dataclass(frozen=True)
class CommitmentKey:
    """Public matrix A in Z_q^{m x (d + ell)}, expanded column-block by column-block from ``seed``.

    Block ``j`` covers columns ``[8192 j, 8192 (j + 1))`` and is drawn from
    ``Rng(seed).spawn("commit-A", j)``.  Expanded blocks are kept in a small
    process-wide cache (about 56 MB at the default gradient dimension).
    """

    seed: bytes
    m: int
    cols: int
    q: int

    @classmethod
    def generate(cls, params: ZkpParams, rng: Rng) -> "CommitmentKey":
        return cls(rng.read(32), params.m, params.d + params.ell, params.q)

    def blocks(self):
        return _expanded(self.seed, self.m, self.cols, self.q)

    def matrix(self) -> np.ndarray:
        """Dense A; only sensible for small dimensions."""
        return np.concatenate(self.blocks(), axis=1).astype(np.int64)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """``A x mod q`` for a vector or an (cols, k) stack of vectors."""
        x = np.asarray(x)
        if x.shape[0] != self.cols:
            raise ValueError(f"expected {self.cols} rows, got {x.shape[0]}")
        # reduced entries keep every partial sum below 2^53, so float64 BLAS is exact
        xr = np.mod(x.astype(np.int64), self.q).astype(np.float64)
        acc = np.zeros((self.m,) + x.shape[1:], dtype=np.float64)
        start = 0
        for blk in self.blocks():
            w = blk.shape[1]
            acc += blk.astype(np.float64) @ xr[start:start + w]
            acc %= self.q
            start += w
        return acc.astype(np.int64)


def commit(key: CommitmentKey, x, r, params: ZkpParams) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    r = np.asarray(r, dtype=np.int64)
    if x.shape != (params.d,) or r.shape != (params.ell,):
        raise ValueError(f"commit expects x of length {params.d} and r of length {params.ell}")
    return key.matvec(np.concatenate([x, r]))


# -- Fiat-Shamir ------------------------------------------------------------


def fiat_shamir_hash(C, T, tau: float, kappa: int) -> int:
    h = hashlib.sha3_256()
    h.update(FS_TAG)
    h.update(np.asarray(C, dtype="<u2").tobytes())
    h.update(np.asarray(T, dtype="<u2").tobytes())
    h.update(struct.pack("<d", float(tau)))
    return int.from_bytes(h.digest(), "little") % (1 << kappa)


def fiat_shamir_challenge(C, T, tau: float, params: ZkpParams) -> int:
    h = fiat_shamir_hash(C, T, tau, params.kappa)
    return params.c_max - h if params.windowed else h


# -- rejection sampling -----------------------------------------------------


def rejection_sample_accept(z, c: int, w_tilde, sigma_y: float, rng: Rng, beta: float = 12.0) -> bool:
    """Gaussian rejection step: accept with prob. min(1, D_s(z) / (M D_{s, c w}(z)))."""
    v = c * np.asarray(w_tilde, dtype=np.float64)
    vv = float(v @ v)
    if vv == 0.0:
        return True
    M = math.exp(12.0 / beta + 1.0 / (2.0 * beta ** 2))
    log_ratio = (vv - 2.0 * float(np.asarray(z, dtype=np.float64) @ v)) / (2.0 * sigma_y ** 2)
    u = float(rng.random(1)[0])
    return math.log(u) < log_ratio - math.log(M) if u > 0 else True


# -- prover / verifier ------------------------------------------------------


def prove_norm(key: CommitmentKey, grad: QuantizedGradient, params: ZkpParams, rng: Rng,
               tau: float | None = None, rejection: str = "norm",
               max_restarts: int | None = None) -> NormProof:
    tau = params.tau if tau is None else tau
    max_restarts = params.max_restarts if max_restarts is None else max_restarts
    if rejection not in ("norm", "gaussian"):
        raise ValueError(f"unknown rejection rule {rejection!r}")
    w = np.asarray(grad.w_tilde, dtype=np.int64)
    if w.shape != (params.d,):
        raise ValueError(f"gradient has length {len(w)}, expected {params.d}")
    sigma_y = params.sigma_y(tau)
    B2 = params.bound(tau) ** 2
    wf = w.astype(np.float64)
    ww = float(wf @ wf)

    r = sample_gaussian_vec(params.ell, params.sigma_r, rng)
    C = None
    last = None
    for attempt in range(max_restarts + 1):
        y = sample_gaussian_vec(params.d, sigma_y, rng)
        r_prime = sample_gaussian_vec(params.ell, params.sigma_r, rng)
        final = attempt == max_restarts
        if rejection == "norm" and C is not None and not final:
            # ||y + c w||^2 is a parabola in c; skip the commitment if no c in the window can pass
            yf = y.astype(np.float64)
            yy, yw = float(yf @ yf), float(yf @ wf)
            cs = [params.c_min, params.c_max]
            if ww > 0:
                cs.append(min(max(-yw / ww, params.c_min), params.c_max))
            if min(yy + 2 * c_ * yw + c_ * c_ * ww for c_ in cs) > B2:
                continue
        if C is None:
            both = key.matvec(np.stack([np.concatenate([w, r]), np.concatenate([y, r_prime])], axis=1))
            C, T = both[:, 0], both[:, 1]
        else:
            T = key.matvec(np.concatenate([y, r_prime]))
        c = fiat_shamir_challenge(C, T, tau, params)
        z = y + c * w
        r_z = np.mod(r_prime + c * r, params.q)
        last = NormProof(C, T, c, z, r_z, restarts=attempt)
        if rejection == "norm":
            zf = z.astype(np.float64)
            ok = float(zf @ zf) <= B2
        else:
            ok = rejection_sample_accept(z, c, w, sigma_y, rng, params.beta)
        if ok:
            return last
    raise ProofAborted(f"no accepted transcript after {max_restarts} restarts", last, max_restarts)


CHECKS = ("a", "b", "c")


@dataclass(frozen=True)
class VerifyResult:
    ok: bool
    failed: tuple = ()
    norm: float = 0.0
    bound: float = 0.0

    def __bool__(self):
        return self.ok

    @property
    def reason(self) -> str | None:
        """First failing check: ``"malformed"``, ``"a"`` (norm), ``"b"`` (challenge) or ``"c"`` (algebra)."""
        return self.failed[0] if self.failed else None


def _skipped_checks() -> set:
    # test hook: disables verifier checks, used by the selftest negative control
    return {c.strip() for c in os.environ.get(SKIP_CHECK_ENV, "").split(",") if c.strip()}


def verify_norm(key: CommitmentKey, proof: NormProof, tau: float, params: ZkpParams) -> VerifyResult:
    try:
        C = np.asarray(proof.C, dtype=np.int64)
        T = np.asarray(proof.T, dtype=np.int64)
        z = np.asarray(proof.z, dtype=np.int64)
        r_z = np.asarray(proof.r_z, dtype=np.int64)
        c = int(proof.c)
    except (TypeError, ValueError, OverflowError):
        return VerifyResult(False, ("malformed",))
    if (C.shape != (params.m,) or T.shape != (params.m,) or z.shape != (params.d,)
            or r_z.shape != (params.ell,)):
        return VerifyResult(False, ("malformed",))
    if C.min() < 0 or C.max() >= params.q or T.min() < 0 or T.max() >= params.q:
        return VerifyResult(False, ("malformed",))

    skip = _skipped_checks()
    failed = []
    zf = z.astype(np.float64)
    norm = math.sqrt(float(zf @ zf))
    bound = params.bound(tau)
    if "a" not in skip and not norm <= bound:
        failed.append("a")
    if "b" not in skip and c != fiat_shamir_challenge(C, T, tau, params):
        failed.append("b")
    if "c" not in skip:
        lhs = key.matvec(np.concatenate([z, r_z]))
        rhs = np.mod(T + (c % params.q) * C, params.q)
        if not np.array_equal(lhs, rhs):
            failed.append("c")
    return VerifyResult(not failed, tuple(failed), norm, bound)


def norm_estimate(proof: NormProof, tau: float, params: ZkpParams) -> float:
    """Estimate of ``||dw||`` read off an accepted transcript (``||z||^2 - d sigma_y^2``)."""
    zf = np.asarray(proof.z, dtype=np.float64)
    excess = float(zf @ zf) - params.d * params.sigma_y(tau) ** 2
    return math.sqrt(max(excess, 0.0)) / (proof.c * params.scale)


def garbage_proof(key: CommitmentKey, params: ZkpParams, rng: Rng, tau: float | None = None) -> NormProof:
    """Transcript with random commitments, a short response and a consistent challenge.

    It passes checks (a) and (b) by construction, so only the algebraic
    check (c) stands between it and acceptance.
    """
    tau = params.tau if tau is None else tau
    C = rng.randbelow(params.q, params.m)
    T = rng.randbelow(params.q, params.m)
    c = fiat_shamir_challenge(C, T, tau, params)
    z = sample_gaussian_vec(params.d, params.sigma_y(tau), rng)
    r_z = rng.randbelow(params.q, params.ell)
    return NormProof(C, T, c, z, r_z)
