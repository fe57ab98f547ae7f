"""One federated round end to end, the Byzantine client, and the two baseline transports.

Modes
-----
``standard_fl``  plaintext float64 updates; transport cost is simulated.
``fl_kem``       the same updates sealed under a per-message KEM session key.
``zkfl_pq``      sealed payload carrying BFV ciphertexts for the first
                 ``he_coverage`` parameters, the quantized remainder in the
                 clear, and a norm proof over the full quantized update.
                 Only clients whose proof verifies are aggregated.

All randomness is spawned from one root seed with labels that do not depend
on the mode, so the three modes see the same data, shards, initial model,
local SGD shuffles and adversarial vectors.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
import os
import struct
import tempfile
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Iterable, Sequence

import numpy as np

from . import fl
from .he import (BfvParams, HeCiphertext, QuantizedBlock, bfv_decrypt, bfv_encrypt,
                 bfv_keygen, bfv_sum, dequantize_sum, quantize_gradient)
from .kem import KemCiphertext, KemParams, kem_decaps, kem_encaps, kem_keygen
from .rng import Rng
from .sym import AuthenticationError, SealedPayload, frame, open_sealed, seal, unframe
from .zkp import (CommitmentKey, NormProof, ProofAborted, QuantizedGradient, ZkpParams,
                  garbage_proof, norm_estimate, prove_norm, verify_norm)

MODES = ("standard_fl", "fl_kem", "zkfl_pq")
ADVERSARIES = ("prover", "garbage")
CSV_COLUMNS = ("round", "mode", "accuracy", "loss", "t_train_kem", "t_he_enc", "t_he_agg",
               "t_he_dec", "t_zkp_gen", "t_zkp_verify", "bytes", "n_accepted", "n_rejected")
TIMING_KEYS = CSV_COLUMNS[4:10]
CONFIG_SECTION = "zkflpq"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ProtocolConfig:
    mode: str = "zkfl_pq"
    rounds: int = 10
    n_clients: int = 5
    tau: float = 5.0
    malicious_ids: tuple = (3,)
    malicious_start_round: int = 4
    malicious_scale: float = 50.0
    adversary: str = "prover"
    he_coverage: int = 512
    he_scale: float = 256.0
    zkp_scale: float = 4096.0
    kappa: int = 8
    beta: float = 12.0
    sigma_r: float = 1024.0
    completeness_sigmas: float = 6.0
    max_restarts: int = 64
    server_eta: float = 1.0
    local_epochs: int = 3
    lr: float = 0.01
    batch: int = 32
    alpha: float = 0.5
    n_samples: int = 1000
    adaptive_tau: bool = False
    adaptive_k: float = 3.0
    # lower clamp on the adaptive threshold; converged honest updates estimate to ~0
    adaptive_floor: float = 0.5
    tls_base_s: float = 2e-3
    tls_per_byte_s: float = 1e-9
    record_timing: bool = True
    seed: int = 1

    def __post_init__(self):
        object.__setattr__(self, "malicious_ids", tuple(sorted(int(i) for i in self.malicious_ids)))
        self.validate()

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.adversary not in ADVERSARIES:
            raise ConfigError(f"adversary must be one of {ADVERSARIES}, got {self.adversary!r}")
        if self.rounds < 0:
            raise ConfigError("rounds must be >= 0")
        if self.n_clients < 1:
            raise ConfigError("n_clients must be >= 1")
        bad = [i for i in self.malicious_ids if not 1 <= i <= self.n_clients]
        if bad:
            raise ConfigError(f"malicious ids {bad} are not client ids 1..{self.n_clients}")
        if len(set(self.malicious_ids)) != len(self.malicious_ids):
            raise ConfigError("duplicate malicious ids")
        if len(self.malicious_ids) >= self.n_clients:
            raise ConfigError("at least one client must be honest")
        if not self.tau > 0:
            raise ConfigError("tau must be positive")
        if not 0 <= self.he_coverage <= fl.N_PARAMS:
            raise ConfigError(f"he_coverage must lie in [0, {fl.N_PARAMS}]")
        if self.lr < 0:
            raise ConfigError("lr must be non-negative")
        for name in ("he_scale", "zkp_scale", "alpha", "beta", "sigma_r"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.local_epochs < 0 or self.batch < 1 or self.n_samples < self.n_clients:
            raise ConfigError("invalid training settings")
        if not self.adaptive_floor > 0:
            raise ConfigError("adaptive_floor must be positive")
        if self.malicious_scale < 0:
            raise ConfigError("malicious_scale must be >= 0")

    def replace(self, **kw) -> "ProtocolConfig":
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data.update(kw)
        return ProtocolConfig(**data)

    def zkp_params(self) -> ZkpParams:
        return ZkpParams(d=fl.N_PARAMS, beta=self.beta, kappa=self.kappa, tau=self.tau,
                         scale=self.zkp_scale, sigma_r=self.sigma_r,
                         max_restarts=self.max_restarts,
                         completeness_sigmas=self.completeness_sigmas)

    def is_malicious(self, client_id: int, rnd: int) -> bool:
        return client_id in self.malicious_ids and rnd >= self.malicious_start_round

    # -- flat key-value file ---------------------------------------------

    @classmethod
    def from_mapping(cls, values: dict) -> "ProtocolConfig":
        kinds = {f.name: f.type for f in fields(cls)}
        default = cls()
        out = {}
        for key, raw in values.items():
            key = key.strip()
            if key not in kinds:
                raise ConfigError(f"unknown config key {key!r}")
            proto = getattr(default, key)
            try:
                out[key] = _parse_value(proto, raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
        return cls(**out)

    @classmethod
    def from_file(cls, path) -> "ProtocolConfig":
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_text(text)

    @classmethod
    def from_text(cls, text: str) -> "ProtocolConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        parser.optionxform = str
        try:
            parser.read_string(f"[{CONFIG_SECTION}]\n" + text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        values = {}
        for section in parser.sections():
            values.update(parser.items(section))
        return cls.from_mapping(values)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(i) for i in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


def _parse_value(proto, raw: str):
    raw = raw.strip()
    if isinstance(proto, bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(raw)
    if isinstance(proto, int):
        return int(raw)
    if isinstance(proto, float):
        return float(raw)
    if isinstance(proto, tuple):
        return tuple(int(x) for x in raw.replace(" ", "").split(",") if x)
    return raw


# -- adversary and helpers ---------------------------------------------------


def byzantine_update(dim: int, scale: float, rng: Rng, client_id: int = 0, round: int = 0) -> fl.GradientUpdate:
    """I.i.d. standard normal vector times ``scale``."""
    return fl.GradientUpdate(rng.numpy_generator().standard_normal(dim) * scale, client_id, round)


def adaptive_threshold(prev_norms: Sequence[float], k: float, fallback: float | None = None) -> float:
    """``mean + k * std`` (population std) of the previous round's accepted norms."""
    norms = np.asarray(list(prev_norms), dtype=np.float64)
    if len(norms) < 2:
        if fallback is None:
            raise ValueError("need at least two norms")
        return fallback
    return float(norms.mean() + k * norms.std())


def simulate_tls_baseline(payload_bytes: int, base_s: float = 2e-3, per_byte_s: float = 1e-9) -> float:
    """Modelled TLS cost per message: a fixed handshake/record overhead plus a per-byte term."""
    if payload_bytes < 0:
        raise ValueError("payload size must be non-negative")
    return base_s + per_byte_s * payload_bytes


# -- server roles ------------------------------------------------------------

_AGGREGATE_TOKEN = object()


class AggregateCiphertext:
    """Summed BFV blocks; only :class:`Aggregator` can build one."""

    __slots__ = ("blocks", "contributors")

    def __init__(self, blocks: tuple, contributors: int, _token=None):
        if _token is not _AGGREGATE_TOKEN:
            raise TypeError("aggregate ciphertexts are produced by Aggregator.aggregate only")
        self.blocks = tuple(blocks)
        self.contributors = contributors


class Aggregator:
    """Adds ciphertexts; never sees the secret key."""

    def __init__(self, params: BfvParams):
        self.params = params

    def aggregate(self, per_client: Sequence[Sequence[HeCiphertext]]) -> AggregateCiphertext:
        if not per_client:
            raise ValueError("no ciphertexts to aggregate")
        n_blocks = len(per_client[0])
        if any(len(c) != n_blocks for c in per_client):
            raise ValueError("clients sent different block counts")
        summed = tuple(bfv_sum([c[j] for c in per_client], self.params) for j in range(n_blocks))
        return AggregateCiphertext(summed, len(per_client), _token=_AGGREGATE_TOKEN)


class Decryptor:
    """Trusted holder of the BFV secret key; decrypts aggregates and nothing else."""

    def __init__(self, params: BfvParams, rng: Rng):
        self.params = params
        keys = bfv_keygen(params, rng)
        self.public_key = keys.pk
        self._sk = keys.sk

    def decrypt(self, agg: AggregateCiphertext) -> list[QuantizedBlock]:
        if not isinstance(agg, AggregateCiphertext):
            raise TypeError("the decryptor only accepts aggregate ciphertexts")
        return [bfv_decrypt(self._sk, ct, self.params) for ct in agg.blocks]


# -- messages and records ----------------------------------------------------


@dataclass(frozen=True)
class ClientMessage:
    client_id: int
    kem_ct: KemCiphertext
    sealed: SealedPayload | None
    plain: bytes | None = None  # standard_fl only

    def wire_bytes(self) -> int:
        if self.plain is not None:
            return len(self.plain)
        return len(self.kem_ct.to_bytes()) + len(self.sealed)


@dataclass
class RoundRecord:
    round: int
    mode: str
    accuracy: float
    loss: float
    timings: dict
    bytes: int
    bytes_per_client: dict
    accepted: list
    rejected: dict
    malicious: list
    tau: float
    skipped: bool = False
    he_mae: float | None = None
    he_rel_err: float | None = None
    he_mean_abs: float | None = None
    update_norms: dict = field(default_factory=dict)
    norm_estimates: dict = field(default_factory=dict)

    @property
    def n_accepted(self) -> int:
        return len(self.accepted)

    @property
    def n_rejected(self) -> int:
        return len(self.rejected)

    def round_time(self) -> float:
        return float(sum(self.timings.values()))

    def csv_row(self) -> list:
        return ([self.round, self.mode, _fmt(self.accuracy), _fmt(self.loss)]
                + [_fmt(self.timings.get(k, 0.0)) for k in TIMING_KEYS]
                + [self.bytes, self.n_accepted, self.n_rejected])

    def to_json(self) -> dict:
        out = asdict(self)
        out["rejected"] = {str(k): v for k, v in self.rejected.items()}
        out["bytes_per_client"] = {str(k): v for k, v in self.bytes_per_client.items()}
        out["update_norms"] = {str(k): v for k, v in self.update_norms.items()}
        out["norm_estimates"] = {str(k): v for k, v in self.norm_estimates.items()}
        return out


def _fmt(x: float) -> str:
    return format(float(x), ".10g")


# -- state -------------------------------------------------------------------


@dataclass
class ProtocolState:
    config: ProtocolConfig
    dataset: fl.Dataset
    shards: list
    model: fl.MlpModel
    root: Rng
    kem_keys: object = None
    decryptor: Decryptor | None = None
    aggregator: Aggregator | None = None
    commit_key: CommitmentKey | None = None
    zkp_params: ZkpParams | None = None
    bfv_params: BfvParams = field(default_factory=BfvParams)
    kem_params: KemParams = field(default_factory=KemParams)
    round: int = 0
    prev_norms: list = field(default_factory=list)


def init_state(config: ProtocolConfig, dataset: fl.Dataset | None = None) -> ProtocolState:
    root = Rng(config.seed)
    if dataset is None:
        dataset = fl.generate_dataset(root.spawn("data").seed, n_samples=config.n_samples)
    shards = fl.partition_dirichlet(dataset, config.n_clients, config.alpha, root.spawn("shards").seed)
    model = fl.MlpModel.init(root.spawn("init"))
    state = ProtocolState(config, dataset, shards, model, root)
    if config.mode != "standard_fl":
        state.kem_keys = kem_keygen(state.kem_params, root.spawn("kem-keygen"))
    if config.mode == "zkfl_pq":
        state.decryptor = Decryptor(state.bfv_params, root.spawn("bfv-keygen"))
        state.aggregator = Aggregator(state.bfv_params)
        state.zkp_params = config.zkp_params()
        state.commit_key = CommitmentKey.generate(state.zkp_params, root.spawn("commit-key"))
    return state


# -- payload encoding --------------------------------------------------------


def _encode_remainder(w_tilde: np.ndarray) -> bytes:
    if len(w_tilde) and (w_tilde.min() < -(1 << 31) or w_tilde.max() >= 1 << 31):
        raise OverflowError("quantized remainder does not fit in int32")
    return w_tilde.astype("<i4").tobytes()


def encode_zk_payload(cts: Sequence[HeCiphertext], remainder: np.ndarray, proof: NormProof) -> bytes:
    return frame(struct.pack("<I", len(cts)), *[c.to_bytes() for c in cts],
                 _encode_remainder(remainder), proof.to_bytes())


def decode_zk_payload(data: bytes, params: BfvParams):
    parts = unframe(data)
    if not parts or len(parts[0]) != 4:
        raise ValueError("malformed payload")
    (count,) = struct.unpack("<I", parts[0])
    if len(parts) != count + 3:
        raise ValueError("malformed payload")
    cts = [HeCiphertext.from_bytes(params, p) for p in parts[1:1 + count]]
    remainder = np.frombuffer(parts[1 + count], dtype="<i4").astype(np.int64)
    proof = NormProof.from_bytes(parts[2 + count])
    return cts, remainder, proof


def _aad(rnd: int, client_id: int) -> bytes:
    return struct.pack("<4sII", b"zkfl", rnd, client_id)


# -- one round ---------------------------------------------------------------


class _Clock:
    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.totals = {k: 0.0 for k in TIMING_KEYS}

    def timed(self, key):
        clock = self

        class _Span:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                if clock.enabled:
                    clock.totals[key] += time.perf_counter() - self.t0
                return False

        return _Span()

    def add(self, key, seconds):
        if self.enabled:
            self.totals[key] += seconds


def _client_update(state: ProtocolState, shard: fl.ClientShard, rnd: int) -> fl.GradientUpdate:
    cfg = state.config
    if cfg.is_malicious(shard.client_id, rnd):
        return byzantine_update(state.model.n_params, cfg.malicious_scale,
                                state.root.spawn("byzantine", rnd, shard.client_id), shard.client_id, rnd)
    gen = state.root.spawn("sgd", rnd, shard.client_id).numpy_generator()
    return fl.local_sgd(state.model, state.dataset, shard, gen, epochs=cfg.local_epochs,
                        lr=cfg.lr, batch=cfg.batch, round=rnd)


def _round_tau(state: ProtocolState) -> float:
    cfg = state.config
    if cfg.adaptive_tau:
        return max(adaptive_threshold(state.prev_norms, cfg.adaptive_k, fallback=cfg.tau), cfg.adaptive_floor)
    return cfg.tau


def run_round(state: ProtocolState, rng: Rng | None = None) -> tuple[ProtocolState, RoundRecord]:
    """Execute the next round in place and return ``(state, record)``.

    ``rng`` seeds the transport and proof randomness; it defaults to a
    stream derived from the state's root seed, the mode and the round.
    """
    cfg = state.config
    rnd = state.round + 1
    rng = rng if rng is not None else state.root.spawn("crypto", cfg.mode, rnd)
    clock = _Clock(cfg.record_timing)
    tau = _round_tau(state)
    cov = cfg.he_coverage

    updates: dict[int, fl.GradientUpdate] = {}
    messages: list[ClientMessage] = []
    malicious = []
    for shard in state.shards:
        cid = shard.client_id
        crng = rng.spawn("client", cid)
        bad = cfg.is_malicious(cid, rnd)
        if bad:
            malicious.append(cid)
        with clock.timed("t_train_kem"):
            upd = _client_update(state, shard, rnd)
        updates[cid] = upd

        if cfg.mode == "standard_fl":
            body = upd.delta.astype("<f8").tobytes()
            clock.add("t_train_kem", simulate_tls_baseline(len(body), cfg.tls_base_s, cfg.tls_per_byte_s))
            messages.append(ClientMessage(cid, None, None, body))
            continue

        with clock.timed("t_train_kem"):
            kem_ct, key = kem_encaps(state.kem_keys.ek, crng.spawn("kem"))
        if cfg.mode == "fl_kem":
            body = upd.delta.astype("<f8").tobytes()
        else:
            with clock.timed("t_zkp_gen"):
                grad = QuantizedGradient.from_update(upd.delta, cfg.zkp_scale)
                proof = _make_proof(state, grad, tau, bad, crng.spawn("zkp"))
            with clock.timed("t_he_enc"):
                blocks = quantize_gradient(upd.delta[:cov], cfg.he_scale, state.bfv_params,
                                           overflow="wrap" if bad else "raise")
                hrng = crng.spawn("he")
                cts = [bfv_encrypt(state.decryptor.public_key, b, state.bfv_params, hrng) for b in blocks]
            body = encode_zk_payload(cts, grad.w_tilde[cov:], proof)
        with clock.timed("t_train_kem"):
            sealed = seal(key, body, crng.spawn("aead"), aad=_aad(rnd, cid))
        messages.append(ClientMessage(cid, kem_ct, sealed))

    # server side
    accepted, rejected = [], {}
    plain_updates: dict[int, np.ndarray] = {}
    he_cts: dict[int, list] = {}
    remainders: dict[int, np.ndarray] = {}
    estimates: dict[int, float] = {}
    for msg in messages:
        cid = msg.client_id
        if cfg.mode == "standard_fl":
            plain_updates[cid] = np.frombuffer(msg.plain, dtype="<f8")
            accepted.append(cid)
            continue
        with clock.timed("t_train_kem"):
            key = kem_decaps(state.kem_keys.dk, msg.kem_ct)
            try:
                body = open_sealed(key, msg.sealed, aad=_aad(rnd, cid))
            except AuthenticationError:
                rejected[cid] = "aead"
                continue
        if cfg.mode == "fl_kem":
            plain_updates[cid] = np.frombuffer(body, dtype="<f8")
            accepted.append(cid)
            continue
        try:
            cts, remainder, proof = decode_zk_payload(body, state.bfv_params)
        except ValueError:
            rejected[cid] = "malformed"
            continue
        with clock.timed("t_zkp_verify"):
            result = verify_norm(state.commit_key, proof, tau, state.zkp_params)
        if not result:
            rejected[cid] = f"zkp:{result.reason}"
            continue
        accepted.append(cid)
        he_cts[cid] = cts
        remainders[cid] = remainder
        estimates[cid] = norm_estimate(proof, tau, state.zkp_params)

    record = RoundRecord(
        round=rnd, mode=cfg.mode, accuracy=0.0, loss=0.0, timings={}, bytes=0,
        bytes_per_client={m.client_id: m.wire_bytes() for m in messages},
        accepted=sorted(accepted), rejected=dict(sorted(rejected.items())), malicious=malicious,
        tau=tau, update_norms={c: u.norm for c, u in updates.items()},
        norm_estimates=estimates)
    record.bytes = int(sum(record.bytes_per_client.values()))

    if not accepted:
        record.skipped = True
    elif cfg.mode in ("standard_fl", "fl_kem"):
        agg = np.mean([plain_updates[c] for c in accepted], axis=0)
        state.model = fl.apply_update(state.model, agg, cfg.server_eta)
    else:
        n_valid = len(accepted)
        head = np.zeros(0)
        if cov:
            with clock.timed("t_he_agg"):
                agg_ct = state.aggregator.aggregate([he_cts[c] for c in accepted])
            with clock.timed("t_he_dec"):
                blocks = state.decryptor.decrypt(agg_ct)
                head = dequantize_sum(blocks, cfg.he_scale, n_valid, state.bfv_params, length=cov)
            oracle = np.mean([updates[c].delta[:cov] for c in accepted], axis=0)
            err = np.abs(head - oracle)
            record.he_mae = float(err.mean())
            record.he_mean_abs = float(np.abs(oracle).mean())
            record.he_rel_err = (float(err.mean() / record.he_mean_abs)
                                 if record.he_mean_abs > 0 else 0.0)
        tail = np.mean([remainders[c] for c in accepted], axis=0) / cfg.zkp_scale
        agg = np.concatenate([head, tail])
        state.model = fl.apply_update(state.model, agg, cfg.server_eta)
        state.prev_norms = [estimates[c] for c in accepted]

    record.accuracy, record.loss = fl.evaluate(state.model, state.dataset)
    record.timings = dict(clock.totals)
    state.round = rnd
    return state, record


def _make_proof(state: ProtocolState, grad: QuantizedGradient, tau: float, malicious: bool,
                rng: Rng) -> NormProof:
    cfg, params = state.config, state.zkp_params
    if malicious and cfg.adversary == "garbage":
        return garbage_proof(state.commit_key, params, rng, tau)
    # the malicious prover makes one attempt; an honest one over an oversized
    # update runs out of restarts.  Either way the last transcript is sent.
    try:
        return prove_norm(state.commit_key, grad, params, rng, tau=tau,
                          max_restarts=0 if malicious else None)
    except ProofAborted as exc:
        return exc.last


def run_experiment(config: ProtocolConfig, dataset: fl.Dataset | None = None,
                   on_round=None) -> list[RoundRecord]:
    state = init_state(config, dataset)
    records = []
    for _ in range(config.rounds):
        state, rec = run_round(state)
        records.append(rec)
        if on_round is not None:
            on_round(rec)
    return records


# -- output ------------------------------------------------------------------


def records_to_csv(records: Iterable[RoundRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rec in records:
        w.writerow(rec.csv_row())
    return buf.getvalue()


def _atomic_write(path, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(records: Iterable[RoundRecord], path) -> None:
    _atomic_write(path, records_to_csv(records))


def write_json(obj, path) -> None:
    _atomic_write(path, dumps_json(obj) + "\n")


def dumps_json(obj) -> str:
    """JSON with non-finite floats (a diverged model's loss) written as null."""
    return json.dumps(_finite(obj), indent=2, sort_keys=True, allow_nan=False)


def _finite(o):
    if isinstance(o, RoundRecord):
        o = o.to_json()
    if isinstance(o, dict):
        return {str(k): _finite(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_finite(v) for v in o]
    if isinstance(o, np.ndarray):
        return [_finite(v) for v in o.tolist()]
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, (float, np.floating)):
        return float(o) if math.isfinite(o) else None
    return o


def summarize(records: Sequence[RoundRecord]) -> dict:
    """Per-mode summary: final metrics, detection rate, false-positive rate, timing shares."""
    if not records:
        return {"degenerate": True, "rounds": 0}
    sub_bad = sum(len(r.malicious) for r in records)
    rej_bad = sum(1 for r in records for c in r.malicious if c in r.rejected)
    sub_good = sum(len(r.bytes_per_client) - len(r.malicious) for r in records)
    rej_good = sum(1 for r in records for c in r.rejected if c not in r.malicious)
    totals = {k: sum(r.timings.get(k, 0.0) for r in records) for k in TIMING_KEYS}
    grand = sum(totals.values())
    he = [r for r in records if r.he_mae is not None]
    return {
        "degenerate": False,
        "mode": records[0].mode,
        "rounds": len(records),
        "final_accuracy": records[-1].accuracy,
        "final_loss": records[-1].loss,
        "mean_round_time_s": grand / len(records),
        "mean_message_kb": sum(r.bytes for r in records) / len(records) / 1024,
        "malicious_submitted": sub_bad,
        "malicious_rejected": rej_bad,
        "detection_rate": rej_bad / sub_bad if sub_bad else None,
        "honest_submitted": sub_good,
        "honest_rejected": rej_good,
        "false_positive_rate": rej_good / sub_good if sub_good else 0.0,
        "skipped_rounds": sum(r.skipped for r in records),
        "timing_s": totals,
        "timing_pct": {k: (100.0 * v / grand if grand > 0 else 0.0) for k, v in totals.items()},
        "he_mae": float(np.mean([r.he_mae for r in he])) if he else None,
    }
