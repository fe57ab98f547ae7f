import csv
import io
import json
import subprocess
import sys

import pytest

from zkflpq import harness
from zkflpq.protocol import CSV_COLUMNS, ConfigError, ProtocolConfig
from zkflpq.zkp import SKIP_CHECK_ENV


def test_parser_has_every_subcommand():
    p = harness.build_parser()
    for cmd in ("run", "ablate-malicious", "ablate-threshold", "he-error", "selftest", "bench", "config"):
        args = p.parse_args([cmd, "--seed", "3", "--out", "x"])
        assert args.command == cmd and args.seed == 3 and args.out == "x"
    args = p.parse_args(["--config", "c.ini", "run", "--mode", "fl_kem", "--no-timing"])
    assert args.config == "c.ini" and args.mode == "fl_kem" and args.no_timing


def test_zero_rounds_is_degenerate(tmp_path, capsys):
    assert harness.main(["run", "--rounds", "0", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "rounds.csv").read_text()
    assert text == ",".join(CSV_COLUMNS) + "\n"
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["degenerate"] is True
    assert "degenerate" in capsys.readouterr().out


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("malicious_ids = 1,2,3,4,5\n")
    assert harness.main(["run", "--config", str(bad)]) == 2
    assert harness.main(["ablate-malicious", "--rounds", "0", "--counts", "5"]) == 2
    assert harness.main(["ablate-threshold", "--rounds", "0", "--taus", "-1"]) == 2
    assert harness.main(["run", "--config", str(tmp_path / "missing.ini")]) == 2
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert harness.main(["run", "--rounds", "0", "--out", str(blocker / "sub")]) == 2
    assert "config error" in capsys.readouterr().err


def test_ablate_malicious_rejects_no_quorum():
    with pytest.raises(ConfigError):
        harness.cmd_ablate_malicious(ProtocolConfig(rounds=0), counts=[5])


def test_config_subcommand_round_trips(tmp_path, capsys):
    assert harness.main(["config", "--seed", "9", "--rounds", "4"]) == 0
    out = capsys.readouterr().out
    text = out[:out.rindex("OK")]
    cfg = ProtocolConfig.from_text(text)
    assert cfg.seed == 9 and cfg.rounds == 4


def test_selftest_passes_and_reports_trials():
    buf = io.StringIO()
    rows, ok = harness.cmd_selftest(0, stream=buf)
    assert ok
    names = [r["suite"] for r in rows]
    assert names == [n for n, _ in harness.SUITES]
    assert all(r["trials"] > 0 and r["passed"] == r["trials"] for r in rows)
    assert buf.getvalue().count("PASS") == len(rows)


def test_selftest_negative_control(monkeypatch):
    monkeypatch.setenv(SKIP_CHECK_ENV, "c")
    rows, ok = harness.cmd_selftest(0, stream=io.StringIO())
    assert not ok
    failed = [r["suite"] for r in rows if not r["ok"]]
    assert failed == ["zkp soundness"]


def test_zero_gradients_give_zero_he_error(tmp_path):
    cfg = ProtocolConfig(rounds=2, lr=0.0, malicious_ids=(), record_timing=False)
    report, _ = harness.cmd_he_error_report(cfg, out=tmp_path)
    assert [r["mae"] for r in report["rounds"]] == [0.0, 0.0]
    assert report["mae_ok"]
    assert (tmp_path / "he_error.csv").exists() and (tmp_path / "he_error.json").exists()


def test_run_writes_outputs(tmp_path):
    cfg = ProtocolConfig(rounds=1, record_timing=False)
    summary, records = harness.cmd_run(cfg, out=tmp_path, modes=("standard_fl", "zkfl_pq"))
    rows = list(csv.DictReader((tmp_path / "rounds.csv").open()))
    assert [r["mode"] for r in rows] == ["standard_fl", "zkfl_pq"]
    assert summary.checks == {"standard_fl:round_invariants": True, "zkfl_pq:round_invariants": True}
    transcript = json.loads((tmp_path / "transcript.json").read_text())
    assert len(transcript["records"]) == 2


def test_he_error_trend_helper():
    assert harness.he_error_trend([3.0, 2.0, 1.0]) == (3.0, 1.0)
    assert harness.he_error_trend([0.1, 0.2, 0.3, 0.4, 0.5, 0.6]) == pytest.approx((0.15, 0.55))


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "zkflpq", "config"], capture_output=True, text=True)
    assert res.returncode == 0 and "mode = zkfl_pq" in res.stdout
