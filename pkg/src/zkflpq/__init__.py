"""Post-quantum federated learning: MLWE key encapsulation, BFV aggregation and lattice norm proofs."""

from .fl import (ClientShard, Dataset, GradientUpdate, MlpModel, apply_update, evaluate, fedavg,
                 generate_dataset, local_sgd, partition_dirichlet)
from .he import (BfvParams, HeCiphertext, NoiseBudgetExceeded, QuantizedBlock, bfv_add,
                 bfv_decrypt, bfv_encrypt, bfv_keygen, check_noise_budget, dequantize_sum,
                 quantize_gradient)
from .kem import KemCiphertext, KemKeyPair, KemParams, kem_decaps, kem_encaps, kem_keygen
from .protocol import (ConfigError, ProtocolConfig, RoundRecord, adaptive_threshold,
                       byzantine_update, run_experiment, run_round, simulate_tls_baseline)
from .ring import ModuleVector, RingElement, RingParams, ring_add, ring_mul
from .rng import Rng
from .sym import AuthenticationError, SealedPayload, open_sealed, seal
from .zkp import (CommitmentKey, NormProof, ProofAborted, QuantizedGradient, ZkpParams, commit,
                  fiat_shamir_challenge, prove_norm, rejection_sample_accept, verify_norm)

__version__ = "0.1.0"
