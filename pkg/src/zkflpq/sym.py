"""AES-256-GCM sealing of client payloads under the KEM session key.

Framing on the wire is ``nonce (12) || body || tag (16)``; the body is the
GCM ciphertext of the plaintext, same length.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .rng import Rng

NONCE_BYTES = 12
TAG_BYTES = 16
KEY_BYTES = 32


class AuthenticationError(Exception):
    """Raised when a sealed payload does not open under the given key."""


@dataclass(frozen=True)
class SealedPayload:
    nonce: bytes
    body: bytes
    tag: bytes

    def to_bytes(self) -> bytes:
        return self.nonce + self.body + self.tag

    @classmethod
    def from_bytes(cls, data: bytes) -> "SealedPayload":
        if len(data) < NONCE_BYTES + TAG_BYTES:
            raise ValueError("sealed payload too short")
        return cls(data[:NONCE_BYTES], data[NONCE_BYTES:-TAG_BYTES], data[-TAG_BYTES:])

    def __len__(self):
        return NONCE_BYTES + len(self.body) + TAG_BYTES


def seal(key: bytes, plaintext: bytes, rng: Rng, aad: bytes = b"") -> SealedPayload:
    if len(key) != KEY_BYTES:
        raise ValueError("session key must be 256 bits")
    nonce = rng.read(NONCE_BYTES)
    ct = AESGCM(key).encrypt(nonce, plaintext, aad or None)
    return SealedPayload(nonce, ct[:-TAG_BYTES], ct[-TAG_BYTES:])


def open_sealed(key: bytes, sealed: SealedPayload, aad: bytes = b"") -> bytes:
    if len(key) != KEY_BYTES:
        raise ValueError("session key must be 256 bits")
    try:
        return AESGCM(key).decrypt(sealed.nonce, sealed.body + sealed.tag, aad or None)
    except InvalidTag as exc:
        raise AuthenticationError("payload failed authentication") from exc


# length-prefixed concatenation used for the payload body


def frame(*parts: bytes) -> bytes:
    return b"".join(struct.pack("<Q", len(p)) + p for p in parts)


def unframe(data: bytes) -> list[bytes]:
    parts, pos = [], 0
    while pos < len(data):
        if pos + 8 > len(data):
            raise ValueError("truncated frame header")
        (size,) = struct.unpack_from("<Q", data, pos)
        pos += 8
        if pos + size > len(data):
            raise ValueError("truncated frame body")
        parts.append(data[pos:pos + size])
        pos += size
    return parts


open = open_sealed  # noqa: A001 - mirrors seal/open naming
