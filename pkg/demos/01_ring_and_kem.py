"""Negacyclic ring arithmetic and a KEM-protected message, end to end."""

from zkflpq import RingElement, RingParams, Rng, ring_mul
from zkflpq.kem import KemParams, kem_decaps, kem_encaps, kem_keygen
from zkflpq.sym import open_sealed, seal

p = RingParams(8, 97)
x7, x1 = RingElement.monomial(p, 7), RingElement.monomial(p, 1)
print("X^7 * X in Z_97[X]/(X^8 + 1):", ring_mul(x7, x1).centered().tolist())

rng = Rng(2024)
server = kem_keygen(KemParams(), rng.spawn("server"))
ct, client_key = kem_encaps(server.ek, rng.spawn("client"))
server_key = kem_decaps(server.dk, ct)
print("shared secrets agree:", client_key == server_key)

sealed = seal(client_key, b"model update for round 1", rng.spawn("aead"), aad=b"round-1")
print(f"ciphertext {len(ct.to_bytes())} B, sealed payload {len(sealed)} B")
print("server reads:", open_sealed(server_key, sealed, aad=b"round-1").decode())
