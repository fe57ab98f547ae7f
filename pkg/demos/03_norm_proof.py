"""Prove ||dw|| <= tau for a real-sized update, then watch a scale-50 update fail."""

import time

import numpy as np

from zkflpq import CommitmentKey, ProofAborted, QuantizedGradient, Rng, ZkpParams, prove_norm, verify_norm
from zkflpq.fl import N_PARAMS

params = ZkpParams(d=N_PARAMS)
rng = Rng(11)
key = CommitmentKey.generate(params, rng.spawn("key"))
print(f"challenge window [{params.c_min}, {params.c_max}], rejects norms above {params.norm_gap():.3f} tau")

honest = rng.normal(N_PARAMS)
honest *= 3.0 / np.linalg.norm(honest)
t0 = time.perf_counter()
proof = prove_norm(key, QuantizedGradient.from_update(honest, params.scale), params, rng.spawn("p1"))
t1 = time.perf_counter()
res = verify_norm(key, proof, params.tau, params)
t2 = time.perf_counter()
print(f"honest ||dw||=3.0: verified={bool(res)} ||z||/B={res.norm / res.bound:.3f} "
      f"prove {t1 - t0:.2f}s verify {t2 - t1:.2f}s, {len(proof.to_bytes()) / 1024:.0f} KB")

bad = rng.normal(N_PARAMS) * 50
try:
    forged = prove_norm(key, QuantizedGradient.from_update(bad, params.scale), params, rng.spawn("p2"),
                        max_restarts=0)
except ProofAborted as exc:
    forged = exc.last
res = verify_norm(key, forged, params.tau, params)
print(f"byzantine ||dw||={np.linalg.norm(bad):.0f}: verified={bool(res)} failed checks={res.failed} "
      f"||z||/B={res.norm / res.bound:.1f}")
