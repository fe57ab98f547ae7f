"""Empirical rejection rate of single proof attempts as ||dw|| / tau crosses the norm gap."""

import numpy as np

from zkflpq import CommitmentKey, ProofAborted, QuantizedGradient, Rng, ZkpParams, prove_norm, verify_norm
from zkflpq.fl import N_PARAMS

TRIALS = 20
params = ZkpParams(d=N_PARAMS)
rng = Rng(12)
key = CommitmentKey.generate(params, rng.spawn("key"))
print(f"predicted gap {params.norm_gap():.3f}")
print(f"{'ratio':>6s} {'rejected':>9s}")
for ratio in (0.9, 1.0, 1.02, 1.04, 1.06, 1.08, 1.10, 1.15, 1.5, 10.0):
    rejected = 0
    for i in range(TRIALS):
        v = rng.normal(N_PARAMS)
        v *= ratio * params.tau / np.linalg.norm(v)
        try:
            proof = prove_norm(key, QuantizedGradient.from_update(v, params.scale), params,
                               rng.spawn(ratio, i), max_restarts=0)
        except ProofAborted as exc:
            proof = exc.last
        rejected += not verify_norm(key, proof, params.tau, params)
    print(f"{ratio:6.2f} {rejected:4d}/{TRIALS}")
