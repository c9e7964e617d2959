import json
import subprocess
import sys

import pytest

from sosreg.cli import main


def run_cli(args):
    return main(args)


class TestThreshold:
    def test_prints_threshold(self, capsys):
        code = run_cli(["counterex", "threshold", "--gamma-alpha", "1"])
        out = capsys.readouterr().out
        assert code == 0
        assert "s0 = 0.68629" in out

    def test_verify_flip(self, capsys, tmp_path):
        report = tmp_path / "flip.json"
        code = run_cli(["counterex", "threshold", "--gamma-alpha", "1", "--verify-flip",
                        "--report", str(report)])
        assert code == 0
        payload = json.loads(report.read_text())
        assert payload["report"]["flip"]["flips"] is True


class TestDecompose:
    def test_parabola_passes(self, tmp_path):
        report = tmp_path / "dec.json"
        code = run_cli([
            "decompose", "--function", "x^2", "--dim", "1", "--delta", "0.25",
            "--no-holder", "--report", str(report),
        ])
        assert code == 0
        payload = json.loads(report.read_text())
        assert payload["report"]["residual_sup"] <= 1e-8
        assert payload["config"]["delta"] == 0.25

    def test_wrong_dim_is_config_error(self, capsys):
        code = run_cli(["decompose", "--function", "x^2 + y^2", "--dim", "1"])
        assert code == 1

    def test_cells_csv(self, tmp_path):
        csv_path = tmp_path / "cells.csv"
        code = run_cli([
            "decompose", "--function", "x^2", "--delta", "0.25", "--no-holder",
            "--csv", str(csv_path), "--report", str(tmp_path / "r.json"),
        ])
        assert code == 0
        header = csv_path.read_text().splitlines()[0]
        assert header.split(",")[:2] == ["nu", "c0"]


class TestDeterminism:
    def test_reports_identical_for_same_seed(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        args = ["monotone", "--function", "flat_exp", "--s", "0.5", "--samples", "50",
                "--t-min", "0.05", "--region-center", "0.5", "--region-radius", "0.45",
                "--seed", "3"]
        assert run_cli(args + ["--report", str(a)]) == 0
        assert run_cli(args + ["--report", str(b)]) == 0
        assert a.read_text() == b.read_text()


class TestConfigFile:
    def test_config_supplies_defaults_and_flags_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("s = 0.5\nsamples = 40\nt-min = 0.05\nregion-radius = 0.45\nregion-center = 0.5\n")
        r1 = tmp_path / "r1.json"
        assert run_cli(["monotone", "--function", "flat_exp", "--config", str(cfg),
                        "--report", str(r1)]) == 0
        p1 = json.loads(r1.read_text())
        assert p1["config"]["s"] == 0.5
        r2 = tmp_path / "r2.json"
        assert run_cli(["monotone", "--function", "flat_exp", "--config", str(cfg),
                        "--s", "0.7", "--report", str(r2)]) == 0
        p2 = json.loads(r2.read_text())
        assert p2["config"]["s"] == 0.7

    def test_malformed_config(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("not a pair\n")
        assert run_cli(["monotone", "--function", "flat_exp", "--config", str(cfg)]) == 1


class TestScan:
    def test_scan_csv_columns(self, tmp_path):
        csv_path = tmp_path / "scan.csv"
        code = run_cli([
            "counterex", "scan", "--s-range", "0.5:0.8:0.15", "--beta", "0.75",
            "--rho", "0.5", "--csv", str(csv_path), "--report", str(tmp_path / "scan.json"),
        ])
        assert code == 0
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "s,beta,rho,S,T,verdictSOS,verdictMonotone"
        assert len(lines) >= 3

    def test_bad_range(self):
        assert run_cli(["counterex", "scan", "--s-range", "oops"]) == 1


class TestChecks:
    def test_odd_even_passes_for_quartic(self, tmp_path):
        code = run_cli(["check", "odd-even", "--function", "x^4", "--samples", "400",
                        "--report", str(tmp_path / "r.json")])
        assert code == 0

    def test_slow_vary(self, tmp_path):
        code = run_cli(["check", "slow-vary", "--function", "x^4/24", "--delta", "0.25",
                        "--samples", "400", "--report", str(tmp_path / "r.json")])
        assert code == 0

    def test_diff_ineq_failure_is_exit_2(self, tmp_path):
        code = run_cli(["check", "diff-ineq", "--function", "x^2", "--delta", "0.25",
                        "--eta", "0.45", "--report", str(tmp_path / "r.json")])
        assert code == 2

    def test_roots_oracle(self, tmp_path):
        code = run_cli(["roots", "--function", "x^4 + 1", "--gamma", "0.5", "--order", "2",
                        "--region-radius", "0.8", "--report", str(tmp_path / "r.json")])
        assert code == 0


class TestCatalog:
    def test_lists_every_entry(self, capsys):
        code = run_cli(["catalog"])
        out = capsys.readouterr().out
        assert code == 0
        for name in ("motzkin_M", "quartic_L", "flat_exp_sq", "family_f"):
            assert name in out


class TestConsoleEntry:
    def test_installed_script(self):
        proc = subprocess.run(
            [sys.executable, "-m", "sosreg.cli", "counterex", "threshold"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "0.68629" in proc.stdout
