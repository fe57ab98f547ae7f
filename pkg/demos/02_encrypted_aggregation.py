"""Five clients encrypt quantized updates; only their sum is ever decrypted."""

import numpy as np

from zkflpq import BfvParams, Rng
from zkflpq.he import bfv_encrypt, dequantize_sum, noise_bound, noise_budget, quantize_gradient
from zkflpq.protocol import Aggregator, Decryptor

params = BfvParams()
rng = Rng(7)
decryptor, aggregator = Decryptor(params, rng.spawn("keys")), Aggregator(params)

scale = 256.0
updates = [rng.normal(512) * 0.05 for _ in range(5)]

cts = [[bfv_encrypt(decryptor.public_key, b, params, rng) for b in quantize_gradient(u, scale, params)]
       for u in updates]
mean = dequantize_sum(decryptor.decrypt(aggregator.aggregate(cts)), scale, 5, params)
err = np.abs(mean - np.mean(updates, axis=0))
print(f"noise after 5 additions {noise_bound(5, params):.0f} of budget {noise_budget(params):.0f}")
print(f"max |HE mean - plaintext mean| = {err.max():.2e}  (rounding bound 0.5 / scale = {0.5 / scale:.2e})")
try:
    decryptor.decrypt(cts[0])
except TypeError as exc:
    print("decrypting one client's ciphertext:", exc)
