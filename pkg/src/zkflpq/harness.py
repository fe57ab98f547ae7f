"""Experiment runner: paired runs of the three modes, ablations, HE error report, self-test, bench.

Every command returns ``(result, ok)`` where ``ok`` says whether the
command's built-in checks held.  The CLI maps that to exit code 0 or 1, and
configuration problems to exit code 2.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import fl
from .protocol import (MODES, ConfigError, ProtocolConfig, RoundRecord, _atomic_write,
                       run_experiment, summarize, write_csv, write_json)
from .rng import Rng

DEFAULT_TAUS = (1.0, 2.0, 5.0, 10.0, 50.0)
DEFAULT_COUNTS = (0, 1, 2, 3)
# order in which clients turn malicious in the count ablation
MALICIOUS_ORDER = (3, 4, 5, 1, 2)


@dataclass
class ExperimentSummary:
    config: dict
    modes: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    @property
    def degenerate(self) -> bool:
        return all(m.get("degenerate") for m in self.modes.values()) if self.modes else True

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def to_json(self) -> dict:
        return {"config": self.config, "degenerate": self.degenerate, "modes": self.modes,
                "checks": self.checks, "ok": self.ok}


def _ensure_dir(out) -> str:
    if out is None:
        return None
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")
    return out


def _config_dict(cfg: ProtocolConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["malicious_ids"] = list(cfg.malicious_ids)
    return d


def _check_round_invariants(records: Sequence[RoundRecord]) -> bool:
    for r in records:
        if set(r.accepted) | set(r.rejected) != set(r.bytes_per_client):
            return False
        if set(r.accepted) & set(r.rejected):
            return False
    return True


# -- run --------------------------------------------------------------------


def cmd_run(config: ProtocolConfig, out=None, modes: Sequence[str] = MODES, dataset=None):
    """Run every mode in ``modes`` on the same seed; write rounds.csv, summary.json, transcript.json."""
    out = _ensure_dir(out)
    summary = ExperimentSummary(_config_dict(config))
    all_records = []
    for mode in modes:
        records = run_experiment(config.replace(mode=mode), dataset=dataset)
        all_records.extend(records)
        summary.modes[mode] = summarize(records)
        summary.checks[f"{mode}:round_invariants"] = _check_round_invariants(records)
    zk = summary.modes.get("zkfl_pq")
    if zk and not zk.get("degenerate") and zk["malicious_submitted"]:
        summary.checks["zkfl_pq:detection_rate_1"] = zk["detection_rate"] == 1.0
    if out:
        write_csv(all_records, os.path.join(out, "rounds.csv"))
        write_json(summary.to_json(), os.path.join(out, "summary.json"))
        write_json({"records": all_records}, os.path.join(out, "transcript.json"))
    return summary, all_records


# -- ablations ----------------------------------------------------------------


def _ablation_row(records, key, value) -> dict:
    s = summarize(records)
    return {key: value, "final_accuracy": s.get("final_accuracy"),
            "detection_rate": s.get("detection_rate"),
            "false_positives": s.get("honest_rejected", 0),
            "false_positive_rate": s.get("false_positive_rate", 0.0),
            "malicious_submitted": s.get("malicious_submitted", 0)}


def cmd_ablate_malicious(config: ProtocolConfig, counts: Sequence[int] = DEFAULT_COUNTS, out=None):
    out = _ensure_dir(out)
    for k in counts:
        if not 0 <= k < config.n_clients:
            raise ConfigError(f"malicious count {k} leaves no honest quorum of {config.n_clients}")
    order = [c for c in MALICIOUS_ORDER if c <= config.n_clients]
    order += [c for c in range(1, config.n_clients + 1) if c not in order]
    rows, ok = [], True
    base = config.replace(mode="zkfl_pq")
    for k in counts:
        records = run_experiment(base.replace(malicious_ids=tuple(order[:k])))
        row = _ablation_row(records, "malicious", k)
        rows.append(row)
        if config.rounds:
            ok &= row["final_accuracy"] == 1.0 and row["false_positives"] == 0
            ok &= row["detection_rate"] in (None, 1.0)
    if out:
        _write_table(rows, os.path.join(out, "ablate_malicious.csv"))
    return rows, bool(ok)


def cmd_ablate_threshold(config: ProtocolConfig, taus: Sequence[float] = DEFAULT_TAUS, out=None):
    out = _ensure_dir(out)
    if not taus or any(not t > 0 for t in taus):
        raise ConfigError("thresholds must be a non-empty list of positive numbers")
    rows, ok = [], True
    base = config.replace(mode="zkfl_pq")
    for tau in taus:
        records = run_experiment(base.replace(tau=float(tau)))
        row = _ablation_row(records, "tau", float(tau))
        rows.append(row)
        if config.rounds:
            ok &= row["detection_rate"] in (None, 1.0)
            if tau >= 5:
                ok &= row["false_positive_rate"] == 0.0
            if tau <= 2:
                ok &= row["false_positive_rate"] > 0.05
    if out:
        _write_table(rows, os.path.join(out, "ablate_threshold.csv"))
    return rows, bool(ok)


def _write_table(rows, path) -> None:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]) if rows else [], lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    _atomic_write(path, buf.getvalue())


# -- HE error -------------------------------------------------------------------


def he_error_trend(rel_errors: Sequence[float]) -> tuple[float, float]:
    """Mean relative error over the first and the last third of the rounds."""
    k = max(1, len(rel_errors) // 3)
    return float(np.mean(rel_errors[:k])), float(np.mean(rel_errors[-k:]))


def cmd_he_error_report(config: ProtocolConfig, out=None, mae_limit: float = 1e-3):
    out = _ensure_dir(out)
    records = [r for r in run_experiment(config.replace(mode="zkfl_pq")) if r.he_mae is not None]
    rows = [{"round": r.round, "mae": r.he_mae, "mean_abs_update": r.he_mean_abs,
             "rel_err": r.he_rel_err} for r in records]
    report = {"rounds": rows}
    ok = True
    if records:
        mae = float(np.mean([r.he_mae for r in records]))
        early, late = he_error_trend([r.he_rel_err for r in records])
        report.update(mean_mae=mae, early_rel_err=early, late_rel_err=late,
                      mae_ok=mae < mae_limit, trend_ok=late < early)
        ok = report["mae_ok"] and report["trend_ok"]
    if out:
        write_json(report, os.path.join(out, "he_error.json"))
        if rows:
            _write_table(rows, os.path.join(out, "he_error.csv"))
    return report, bool(ok)


# -- bench ------------------------------------------------------------------------


def cmd_bench(config: ProtocolConfig, out=None, zkp_share_limit: float = 0.05):
    """Timing ordering checks: zkfl_pq rounds are slower than standard_fl, and proofs are a small share."""
    out = _ensure_dir(out)
    cfg = config.replace(record_timing=True)
    res = {}
    for mode in ("standard_fl", "zkfl_pq"):
        res[mode] = summarize(run_experiment(cfg.replace(mode=mode)))
    std, zk = res["standard_fl"], res["zkfl_pq"]
    report = {"modes": res}
    if zk.get("degenerate"):
        return report, True
    zk_share = (zk["timing_s"]["t_zkp_gen"] + zk["timing_s"]["t_zkp_verify"]) / sum(zk["timing_s"].values())
    report.update(
        slowdown=zk["mean_round_time_s"] / std["mean_round_time_s"],
        zkp_share=zk_share,
        ordering_ok=zk["mean_round_time_s"] > std["mean_round_time_s"],
        zkp_share_ok=zk_share < zkp_share_limit,
    )
    if out:
        write_json(report, os.path.join(out, "bench.json"))
    return report, bool(report["ordering_ok"] and report["zkp_share_ok"])


# -- selftest -----------------------------------------------------------------------


def _suite_ring(seed):
    from .ring import RingParams, ring_mul, sample_uniform
    rng = Rng(seed).spawn("selftest-ring")
    trials = passed = 0
    for n, q in ((8, 97), (16, 257), (16, 7681)):
        p = RingParams(n, q)
        for _ in range(10):
            a, b = sample_uniform(p, rng), sample_uniform(p, rng)
            ref = np.zeros(n, dtype=object)
            for i in range(n):
                for j in range(n):
                    k, s = (i + j, 1) if i + j < n else (i + j - n, -1)
                    ref[k] += s * int(a.coeffs[i]) * int(b.coeffs[j])
            trials += 1
            passed += [int(v) % q for v in ref] == ring_mul(a, b).coeffs.tolist()
    return trials, passed


def _suite_kem(seed):
    from .kem import KemParams, kem_decaps, kem_encaps, kem_keygen
    rng = Rng(seed).spawn("selftest-kem")
    params = KemParams()
    trials = passed = 0
    for _ in range(20):
        keys = kem_keygen(params, rng)
        ct, k1 = kem_encaps(keys.ek, rng)
        trials += 1
        passed += kem_decaps(keys.dk, ct) == k1
    return trials, passed


def _suite_he(seed):
    from .he import BfvParams, QuantizedBlock, bfv_decrypt, bfv_encrypt, bfv_keygen, bfv_sum
    rng = Rng(seed).spawn("selftest-he")
    params = BfvParams()
    keys = bfv_keygen(params, rng)
    trials = passed = 0
    for _ in range(10):
        ms = [rng.randbelow(params.t, params.ring.n) for _ in range(5)]
        cts = [bfv_encrypt(keys.pk, QuantizedBlock(m), params, rng) for m in ms]
        out = bfv_decrypt(keys.sk, bfv_sum(cts, params), params).values
        trials += 1
        passed += np.array_equal(out, np.sum(ms, axis=0) % params.t)
    return trials, passed


def _zkp_setup(seed):
    from .zkp import CommitmentKey, ZkpParams
    params = ZkpParams(d=fl.N_PARAMS)
    rng = Rng(seed).spawn("selftest-zkp")
    return params, CommitmentKey.generate(params, rng), rng


def _suite_zkp_completeness(seed, trials=5):
    from .zkp import QuantizedGradient, prove_norm, verify_norm
    params, key, rng = _zkp_setup(seed)
    gen = rng.spawn("grads").numpy_generator()
    passed = 0
    for i in range(trials):
        v = gen.standard_normal(params.d)
        v *= 0.9 * params.tau / np.linalg.norm(v)
        proof = prove_norm(key, QuantizedGradient.from_update(v, params.scale), params, rng.spawn(i))
        passed += bool(verify_norm(key, proof, params.tau, params))
    return trials, passed


def _suite_zkp_soundness(seed, trials=5):
    import dataclasses as dc
    from .protocol import byzantine_update
    from .zkp import (ProofAborted, QuantizedGradient, garbage_proof, prove_norm,
                      verify_norm)
    params, key, rng = _zkp_setup(seed)
    gen = rng.spawn("grads").numpy_generator()
    total = passed = 0
    for i in range(trials):
        bad = byzantine_update(params.d, 50.0, rng.spawn("byz", i))
        try:
            proof = prove_norm(key, QuantizedGradient.from_update(bad.delta, params.scale), params,
                               rng.spawn("p", i), max_restarts=0)
        except ProofAborted as exc:
            proof = exc.last
        passed += not verify_norm(key, proof, params.tau, params)
        passed += not verify_norm(key, garbage_proof(key, params, rng.spawn("g", i)), params.tau, params)
        v = gen.standard_normal(params.d)
        v *= 0.5 * params.tau / np.linalg.norm(v)
        honest = prove_norm(key, QuantizedGradient.from_update(v, params.scale), params, rng.spawn("h", i))
        z = honest.z.copy()
        z[i] += 1
        passed += not verify_norm(key, dc.replace(honest, z=z), params.tau, params)
        total += 3
    return total, passed


def _suite_gradcheck(seed):
    layers = (12, 6, 5, 4)
    rng = Rng(seed).spawn("selftest-grad")
    model = fl.MlpModel.init(rng, layers)
    gen = rng.numpy_generator()
    X = gen.standard_normal((16, layers[0]))
    y = gen.integers(0, layers[-1], size=16)
    _, g = model.loss_and_grad(X, y)
    idx = gen.choice(model.n_params, size=10, replace=False)
    passed = 0
    for i in idx:
        h = 1e-5
        wp = model.params.copy()
        wp[i] += h
        wm = model.params.copy()
        wm[i] -= h
        num = (model.with_params(wp).loss(X, y) - model.with_params(wm).loss(X, y)) / (2 * h)
        passed += abs(num - g[i]) <= 1e-4 * max(abs(num), abs(g[i]), 1e-8) or abs(num - g[i]) < 1e-9
    return len(idx), passed


SUITES = (
    ("ring convolution oracle", _suite_ring),
    ("kem round trip", _suite_kem),
    ("he homomorphism oracle", _suite_he),
    ("zkp completeness", _suite_zkp_completeness),
    ("zkp soundness", _suite_zkp_soundness),
    ("gradient finite differences", _suite_gradcheck),
)


def cmd_selftest(seed: int = 0, stream=None):
    stream = stream or sys.stdout
    rows, ok = [], True
    print(f"{'suite':32s} {'trials':>6s} {'passed':>6s}  result", file=stream)
    for name, fn in SUITES:
        t0 = time.perf_counter()
        trials, passed = fn(seed)
        good = passed == trials
        ok &= good
        rows.append({"suite": name, "trials": trials, "passed": int(passed), "ok": good,
                     "seconds": time.perf_counter() - t0})
        print(f"{name:32s} {trials:6d} {int(passed):6d}  {'PASS' if good else 'FAIL'}", file=stream)
    return rows, bool(ok)


# -- CLI ---------------------------------------------------------------------------


def _fmt_rate(x) -> str:
    return "N/A" if x is None else f"{100 * x:.1f}%"


def _print_run(summary: ExperimentSummary) -> None:
    if summary.degenerate:
        print("no rounds executed (degenerate summary)")
        return
    names = list(summary.modes)
    print(f"{'metric':28s}" + "".join(f"{n:>14s}" for n in names))
    rows = [
        ("mean round time (s)", lambda s: f"{s['mean_round_time_s']:.3f}"),
        ("final accuracy", lambda s: f"{s['final_accuracy']:.3f}"),
        ("final loss", lambda s: f"{s['final_loss']:.4g}"),
        ("mean message (KB/round)", lambda s: f"{s['mean_message_kb']:.0f}"),
        ("byzantine detection", lambda s: _fmt_rate(s["detection_rate"])),
        ("false positive rate", lambda s: _fmt_rate(s["false_positive_rate"])),
    ]
    for label, f in rows:
        print(f"{label:28s}" + "".join(f"{f(summary.modes[n]):>14s}" for n in names))
    zk = summary.modes.get("zkfl_pq")
    if zk:
        print("\nzkfl_pq timing breakdown")
        for k, pct in zk["timing_pct"].items():
            print(f"  {k:14s} {zk['timing_s'][k] / zk['rounds']:9.4f} s  {pct:6.2f}%")


def _print_rows(rows) -> None:
    if not rows:
        return
    keys = list(rows[0])
    print("  ".join(f"{k:>20s}" for k in keys))
    for r in rows:
        cells = []
        for k in keys:
            v = r[k]
            if v is None:
                cells.append("N/A")
            elif isinstance(v, float):
                cells.append(f"{v:.4g}")
            else:
                cells.append(str(v))
        print("  ".join(f"{c:>20s}" for c in cells))


def _load_config(args) -> ProtocolConfig:
    cfg = ProtocolConfig.from_file(args.config) if args.config else ProtocolConfig()
    kw = {}
    if args.seed is not None:
        kw["seed"] = args.seed
    if getattr(args, "no_timing", False):
        kw["record_timing"] = False
    if getattr(args, "rounds", None) is not None:
        kw["rounds"] = args.rounds
    return cfg.replace(**kw) if kw else cfg


def _common_flags(default):
    # subcommands repeat the global flags with suppressed defaults so a flag
    # given before the subcommand is not reset by the subparser
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=default, help="flat key = value scenario file")
    common.add_argument("--seed", type=int, default=default, help="root seed (overrides the config)")
    common.add_argument("--out", default=default, help="output directory")
    common.add_argument("--mode", choices=MODES, default=default, help="restrict `run` to one mode")
    common.add_argument("--rounds", type=int, default=default, help="override the number of rounds")
    common.add_argument("--no-timing", action="store_true", default=default if default is not None else False,
                        help="write zeros in timing columns so CSVs are byte-comparable")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags(argparse.SUPPRESS)
    p = argparse.ArgumentParser(prog="zkflpq", description=__doc__.splitlines()[0],
                                parents=[_common_flags(None)])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="paired run of the three modes")
    am = sub.add_parser("ablate-malicious", parents=[common], help="vary the number of malicious clients")
    am.add_argument("--counts", type=int, nargs="+", default=list(DEFAULT_COUNTS))
    at = sub.add_parser("ablate-threshold", parents=[common], help="vary the norm threshold")
    at.add_argument("--taus", type=float, nargs="+", default=list(DEFAULT_TAUS))
    sub.add_parser("he-error", parents=[common], help="HE vs plaintext aggregation error per round")
    sub.add_parser("selftest", parents=[common], help="run the module oracle suites")
    sub.add_parser("bench", parents=[common], help="timing ordering checks")
    sub.add_parser("config", parents=[common], help="print the effective configuration")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        if args.command == "run":
            modes = (args.mode,) if args.mode else MODES
            summary, _ = cmd_run(cfg, args.out, modes)
            _print_run(summary)
            ok = summary.ok
        elif args.command == "ablate-malicious":
            rows, ok = cmd_ablate_malicious(cfg, args.counts, args.out)
            _print_rows(rows)
        elif args.command == "ablate-threshold":
            rows, ok = cmd_ablate_threshold(cfg, args.taus, args.out)
            _print_rows(rows)
        elif args.command == "he-error":
            report, ok = cmd_he_error_report(cfg, args.out)
            _print_rows(report["rounds"])
            if "mean_mae" in report:
                print(f"\nmean MAE {report['mean_mae']:.3e}  early rel. err {report['early_rel_err']:.3f}"
                      f"  late rel. err {report['late_rel_err']:.3f}")
        elif args.command == "selftest":
            _, ok = cmd_selftest(cfg.seed)
        elif args.command == "bench":
            report, ok = cmd_bench(cfg, args.out)
            if "slowdown" in report:
                print(f"zkfl_pq / standard_fl round time: {report['slowdown']:.1f}x"
                      f"  ZKP share of zkfl_pq round: {100 * report['zkp_share']:.1f}%")
        else:
            sys.stdout.write(cfg.to_text())
            ok = True
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    print("OK" if ok else "CHECKS FAILED")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
