"""Acceptance criteria 1-9, each at its stated tolerance.

Every test records one PASS/FAIL line, printed together at the end of the
session.  Seeds are pinned in ``SEEDS`` so reruns are bit-for-bit identical.
"""


import numpy as np
import pytest

from conftest import CRITERIA
from zkflpq import fl, harness
from zkflpq.he import (BfvParams, QuantizedBlock, bfv_decrypt, bfv_encrypt, bfv_keygen, bfv_sum,
                       check_noise_budget, noise_bound, noise_budget)
from zkflpq.kem import KemParams, kem_decaps, kem_encaps, kem_keygen
from zkflpq.protocol import ProtocolConfig, byzantine_update, records_to_csv
from zkflpq.ring import RingElement, RingParams, ring_add, ring_mul, sample_uniform
from zkflpq.rng import Rng
from zkflpq.zkp import (CommitmentKey, NormProof, ProofAborted, QuantizedGradient, ZkpParams,
                        garbage_proof, prove_norm, verify_norm)

SEEDS = {"he": 101, "kem": 202, "zkp": 303, "ring": 404, "gradcheck": 505, "fedavg": 606}
TRIALS = 200


def report(number: int, title: str, ok: bool, detail: str) -> None:
    CRITERIA.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})")


# -- 1 ---------------------------------------------------------------------------------

def test_criterion_1_he_correctness():
    p = BfvParams()
    assert (p.ring.n, p.ring.q, p.t, p.sigma) == (512, 2**32 - 5, 2**16, 3.2)
    rng = Rng(SEEDS["he"])
    keys = bfv_keygen(p, rng.spawn("keys"))
    exact = 0
    for _ in range(100):
        msgs = [rng.randbelow(p.t, p.ring.n) for _ in range(5)]
        cts = [bfv_encrypt(keys.pk, QuantizedBlock(m), p, rng) for m in msgs]
        out = bfv_decrypt(keys.sk, bfv_sum(cts, p), p).values
        exact += np.array_equal(out, np.sum(msgs, axis=0) % p.t)
    budget_ok = noise_bound(5, p) == 18_944 and round(noise_budget(p)) == 32_768 and check_noise_budget(5, p)
    ok = exact == 100 and budget_ok
    report(1, "HE correctness", ok,
           f"{exact}/100 batches exact, budget {noise_bound(5, p):.0f} < {noise_budget(p):.0f}")
    assert ok


# -- 2 ---------------------------------------------------------------------------------

def test_criterion_2_kem_round_trip():
    p = KemParams()
    assert (p.ring.n, p.k, p.ring.q) == (256, 3, 3329)
    rng = Rng(SEEDS["kem"])
    mismatches = 0
    for i in range(1000):
        kp = kem_keygen(p, rng.spawn("keygen", i))
        ct, K = kem_encaps(kp.ek, rng.spawn("encaps", i))
        mismatches += kem_decaps(kp.dk, ct) != K
    report(2, "KEM round trip", mismatches == 0, f"{mismatches} mismatches in 1000 cycles")
    assert mismatches == 0


# -- 3 and 4 --------------------------------------------------------------------------------

ZKP = ZkpParams(d=fl.N_PARAMS, tau=5.0, beta=12.0)


@pytest.fixture(scope="module")
def zkp_key():
    return CommitmentKey.generate(ZKP, Rng(SEEDS["zkp"]).spawn("key"))


@pytest.fixture(scope="module")
def honest_proofs(zkp_key):
    rng = Rng(SEEDS["zkp"]).spawn("honest")
    out = []
    for i in range(TRIALS):
        v = rng.normal(ZKP.d)
        v *= 0.9 * ZKP.tau / np.linalg.norm(v)
        grad = QuantizedGradient.from_update(v, ZKP.scale)
        out.append(prove_norm(zkp_key, grad, ZKP, rng.spawn("prove", i)))
    return out


def test_criterion_3_zkp_completeness(zkp_key, honest_proofs):
    verified = sum(bool(verify_norm(zkp_key, pr, ZKP.tau, ZKP)) for pr in honest_proofs)
    restarts = float(np.mean([pr.restarts for pr in honest_proofs]))
    ok = verified == TRIALS and restarts < 3
    report(3, "ZKP completeness", ok, f"{verified}/{TRIALS} verify at 0.9 tau, mean restarts {restarts:.2f}")
    assert ok


def test_criterion_4_zkp_soundness(zkp_key, honest_proofs):
    rng = Rng(SEEDS["zkp"]).spawn("soundness")
    byz_rejected, norms = 0, []
    for i in range(TRIALS):
        upd = byzantine_update(ZKP.d, 50.0, rng.spawn("byz", i))
        norms.append(upd.norm)
        grad = QuantizedGradient.from_update(upd.delta, ZKP.scale)
        try:
            proof = prove_norm(zkp_key, grad, ZKP, rng.spawn("prove", i), max_restarts=0)
        except ProofAborted as exc:
            proof = exc.last
        byz_rejected += not verify_norm(zkp_key, proof, ZKP.tau, ZKP)

    garbage_rejected = sum(
        not verify_norm(zkp_key, garbage_proof(zkp_key, ZKP, rng.spawn("garbage", i)), ZKP.tau, ZKP)
        for i in range(TRIALS))

    tamper_rejected = 0
    for i, pr in enumerate(honest_proofs):
        z = pr.z.copy()
        j = int(rng.randbelow(ZKP.d, 1)[0])
        z[j] += 1 + int(rng.randbelow(ZKP.q - 1, 1)[0])
        res = verify_norm(zkp_key, NormProof(pr.C, pr.T, pr.c, z, pr.r_z), ZKP.tau, ZKP)
        tamper_rejected += (not res) and "c" in res.failed

    ok = byz_rejected == garbage_rejected == tamper_rejected == TRIALS
    report(4, "ZKP soundness", ok,
           f"byzantine {byz_rejected}/{TRIALS} (mean norm {np.mean(norms):.0f}), "
           f"garbage {garbage_rejected}/{TRIALS}, tamper via check (c) {tamper_rejected}/{TRIALS}")
    assert ok


# -- 5 and 9 ---------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def default_run():
    return harness.cmd_run(ProtocolConfig())


def test_criterion_5_end_to_end(default_run):
    summary, records = default_run
    zk, std, kem = (summary.modes[m] for m in ("zkfl_pq", "standard_fl", "fl_kem"))
    zk_recs = [r for r in records if r.mode == "zkfl_pq"]
    rejected = [(r.round, c) for r in zk_recs for c in r.rejected]
    honest_norms = [v for r in zk_recs for c, v in r.update_norms.items() if c not in r.malicious]
    checks = {
        "zk accuracy": zk["final_accuracy"] == 1.0,
        "zk loss": zk["final_loss"] < 0.01,
        "std accuracy": std["final_accuracy"] <= 0.40,
        "kem accuracy": kem["final_accuracy"] <= 0.40,
        "rejections": rejected == [(r, 3) for r in range(4, 11)],
        "honest norms": max(honest_norms) < 5.0,
    }
    ok = all(checks.values())
    report(5, "end-to-end Byzantine experiment", ok,
           f"zkfl_pq acc {zk['final_accuracy']:.3f} loss {zk['final_loss']:.2g}, "
           f"standard_fl acc {std['final_accuracy']:.3f}, fl_kem acc {kem['final_accuracy']:.3f}, "
           f"{len(rejected)} rejections, max honest norm {max(honest_norms):.2f}")
    assert ok, checks


def test_criterion_9_round_time_ordering(default_run):
    summary, _ = default_run
    zk, std = summary.modes["zkfl_pq"], summary.modes["standard_fl"]
    ok = zk["mean_round_time_s"] > std["mean_round_time_s"]
    report(9, "round-time ordering", ok,
           f"zkfl_pq {zk['mean_round_time_s']:.3f} s > standard_fl {std['mean_round_time_s']:.3f} s")
    assert ok


@pytest.mark.bench
def test_criterion_9_zkp_share_bench():
    rep, _ = harness.cmd_bench(ProtocolConfig())
    ok = rep["zkp_share_ok"]
    report(9, "ZKP share of round time (bench)", ok, f"{100 * rep['zkp_share']:.1f}% of zkfl_pq round, limit 5%")
    assert ok


# -- 6 ---------------------------------------------------------------------------------------

def test_criterion_6_ablation_malicious():
    rows, _ = harness.cmd_ablate_malicious(ProtocolConfig(), counts=[0, 1, 2, 3])
    ok = all(r["final_accuracy"] == 1.0 and r["false_positive_rate"] == 0.0
             and (r["detection_rate"] == 1.0 if r["malicious"] else r["detection_rate"] is None)
             for r in rows)
    report(6, "ablation over malicious count", ok, "; ".join(
        f"{r['malicious']}: acc {r['final_accuracy']:.2f} det {r['detection_rate']} fpr {r['false_positive_rate']:.3f}"
        for r in rows))
    assert ok


def test_criterion_6_ablation_threshold():
    rows, _ = harness.cmd_ablate_threshold(ProtocolConfig(), taus=[1.0, 2.0, 5.0, 10.0, 50.0])
    ok = all(r["detection_rate"] == 1.0 for r in rows)
    ok &= all(r["false_positive_rate"] == 0.0 for r in rows if r["tau"] >= 5)
    ok &= all(r["false_positive_rate"] > 0.05 for r in rows if r["tau"] <= 2)
    report(6, "ablation over threshold", ok, "; ".join(
        f"tau {r['tau']:g}: det {r['detection_rate']} fpr {r['false_positive_rate']:.3f}" for r in rows))
    assert ok


# -- 7 ---------------------------------------------------------------------------------------

def test_criterion_7_he_reconstruction_error():
    rep, _ = harness.cmd_he_error_report(ProtocolConfig())
    ok = rep["mae_ok"] and rep["trend_ok"]
    report(7, "HE reconstruction error", ok,
           f"mean MAE {rep['mean_mae']:.2e} (< 1e-3: {rep['mae_ok']}), relative error "
           f"early {rep['early_rel_err']:.3f} late {rep['late_rel_err']:.3f} (decreasing: {rep['trend_ok']})")
    assert rep["mae_ok"]
    assert rep["trend_ok"], "relative error does not decrease from early to late rounds"


# -- 8 ---------------------------------------------------------------------------------------

def naive_negacyclic(a, b, n, q):
    out = [0] * n
    for i in range(n):
        for j in range(n):
            k = i + j
            if k < n:
                out[k] += int(a[i]) * int(b[j])
            else:
                out[k - n] -= int(a[i]) * int(b[j])
    return [v % q for v in out]


def test_criterion_8_property_suites():
    rng = Rng(SEEDS["ring"])
    ring_ok = True
    for n, q in ((2, 17), (4, 17), (8, 97), (16, 257), (16, 7681)):
        p = RingParams(n, q)
        for _ in range(40):
            a, b, c = (sample_uniform(p, rng) for _ in range(3))
            ring_ok &= ring_mul(a, b).coeffs.tolist() == naive_negacyclic(a.coeffs, b.coeffs, n, q)
            ring_ok &= ring_mul(a, ring_add(b, c)) == ring_add(ring_mul(a, b), ring_mul(a, c))
            ring_ok &= ring_mul(ring_mul(a, b), c) == ring_mul(a, ring_mul(b, c))
            ring_ok &= ring_mul(a, RingElement.monomial(p, 0)) == a

    # backprop vs central finite differences on sampled coordinates
    grng = Rng(SEEDS["gradcheck"])
    ds = fl.generate_dataset(0)
    model = fl.MlpModel.init(grng.spawn("init"), gain=0.5)
    X, y = ds.train()
    X, y = X[:32] / 8.0, y[:32]
    _, g = model.loss_and_grad(X, y)
    worst = 0.0
    for i in grng.randbelow(fl.N_PARAMS, 10):
        for h in (1e-6,):
            w = model.params.copy()
            w[i] += h
            up = model.with_params(w).loss(X, y)
            w[i] -= 2 * h
            down = model.with_params(w).loss(X, y)
        num = (up - down) / (2 * h)
        worst = max(worst, abs(num - g[i]) / max(abs(num), abs(g[i]), 1e-8))
    grad_ok = worst < 1e-4

    # FedAvg over 5 honest clients with equal shards equals the plain mean of their updates
    frng = np.random.default_rng(SEEDS["fedavg"])
    idx = frng.permutation(ds.train_idx)[:500]
    shards = [fl.ClientShard(i + 1, np.sort(idx[100 * i:100 * (i + 1)])) for i in range(5)]
    base = fl.MlpModel.init(Rng(SEEDS["fedavg"]))
    ups = [fl.local_sgd(base, ds, s, np.random.default_rng(s.client_id)) for s in shards]
    manual = (ups[0].delta + ups[1].delta + ups[2].delta + ups[3].delta + ups[4].delta) / 5
    fedavg_ok = np.abs(fl.fedavg(ups) - manual).max() <= 1e-15

    # determinism: two default runs with timing disabled give byte-identical CSVs
    cfg = ProtocolConfig(record_timing=False)
    csv_a = records_to_csv(harness.cmd_run(cfg)[1])
    csv_b = records_to_csv(harness.cmd_run(cfg)[1])
    det_ok = csv_a == csv_b and len(csv_a.splitlines()) == 31

    ok = ring_ok and grad_ok and fedavg_ok and det_ok
    report(8, "property suites", ok,
           f"ring oracle {ring_ok}, gradcheck max rel err {worst:.1e}, fedavg {fedavg_ok}, "
           f"byte-identical CSV {det_ok}")
    assert ok
