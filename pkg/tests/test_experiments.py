import json
import math
import os
import subprocess
import sys

import pytest

from hypwave.cli import main as cli_main
from hypwave.errors import ConfigurationError
from hypwave.experiments import (
    EXPERIMENTS,
    ExperimentConfig,
    convergence_study,
    emit_report,
    parse_config,
    run_experiment,
    serialize_config,
)


class TestConfigParsing:
    def test_empty_text_default(self):
        config = parse_config("")
        assert config.experiment == "soliton-energy"

    def test_round_trip(self):
        text = "experiment = poincare-gap\ngrid.d = 3\ngrid.n = 100\nsoliton.lambda = 0.25\n"
        config = parse_config(text)
        assert config.d == 3 and config.n == 100 and config.lam == 0.25
        canonical = serialize_config(config)
        assert serialize_config(parse_config(canonical)) == canonical

    def test_lambda_out_of_range_names_key(self):
        with pytest.raises(ConfigurationError, match="lambda"):
            parse_config("soliton.family = P\nsoliton.lambda = 1.5\n")

    def test_unknown_key(self):
        with pytest.raises(ConfigurationError, match="mystery"):
            parse_config("mystery = 3\n")

    def test_unknown_experiment(self):
        with pytest.raises(ConfigurationError, match="unknown experiment"):
            parse_config("experiment = frobnicate\n")

    def test_malformed_line(self):
        with pytest.raises(ConfigurationError, match="line 2"):
            parse_config("grid.d = 2\nnot a pair\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigurationError, match="duplicate"):
            parse_config("grid.d = 2\ngrid.d = 3\n")

    def test_comments_and_blanks(self):
        config = parse_config("# header\n\ngrid.d = 3  # inline\n")
        assert config.d == 3

    def test_bad_number(self):
        with pytest.raises(ConfigurationError, match="grid.n"):
            parse_config("grid.n = many\n")


class TestReports:
    def test_empty_records_header_only(self):
        text = emit_report([], "csv")
        assert text == "experiment,metric,value\n"

    def test_json_round_trip(self):
        config = ExperimentConfig(experiment="laplacian-consistency", d=3, n=200,
                                  r_max=6.0)
        records = run_experiment(config)
        text = emit_report(records, "json")
        parsed = json.loads(text)
        assert parsed[0]["experiment"] == "laplacian-consistency"
        assert parsed[0]["metric:l2_err"] == records[0].metrics["l2_err"]

    def test_determinism_byte_identical(self):
        config = ExperimentConfig(experiment="poincare-gap", d=3, n=400, r_max=20.0,
                                  seed=11)
        a = emit_report(run_experiment(config), "csv")
        b = emit_report(run_experiment(config), "csv")
        assert a == b
        # column order is part of the contract
        header = a.splitlines()[0].split(",")
        assert header == sorted(header, key=lambda c: (c != "experiment",
                                                       c in ("metric", "value"), c))

    def test_bad_format(self):
        with pytest.raises(ConfigurationError):
            emit_report([], "yaml")

    def test_written_file(self, tmp_path):
        config = ExperimentConfig(experiment="laplacian-consistency", d=2, n=64,
                                  r_max=4.0)
        out = tmp_path / "report.csv"
        emit_report(run_experiment(config), "csv", str(out))
        assert out.read_text().startswith("experiment,")


class TestRegistry:
    def test_all_experiments_registered(self):
        assert set(EXPERIMENTS) == {
            "soliton-energy", "poincare-gap", "soliton-stability", "heat-smoothing",
            "caloric-gauge-residuals", "dispersive-decay", "strichartz-sweep",
            "lp-reconstruction", "laplacian-consistency"}

    def test_soliton_energy_values(self):
        records = run_experiment(ExperimentConfig(experiment="soliton-energy"))
        by_family = {(r.params["family"], round(r.params["lambda"], 6)): r
                     for r in records}
        rec = by_family[("P", round(1 / math.sqrt(2), 6))]
        assert rec.metrics["energy"] == pytest.approx(4 * math.pi, rel=1e-3)
        assert all(r.passed for r in records)

    def test_poincare_gap_d4(self):
        records = run_experiment(ExperimentConfig(
            experiment="poincare-gap", d=4, n=1500, r_max=30.0))
        assert records[0].metrics["min_rayleigh"] >= 2.20
        assert records[0].passed

    def test_validation_runs_before_dispatch(self):
        with pytest.raises(ConfigurationError):
            run_experiment(ExperimentConfig(experiment="nope"))


class TestConvergence:
    def test_laplacian_order_two(self):
        config = ExperimentConfig(experiment="laplacian-consistency", d=2, n=300,
                                  r_max=6.0)
        records = convergence_study(config, 3)
        order = records[-1].metrics["order"]
        assert order == pytest.approx(2.0, abs=0.1)

    def test_soliton_stationarity_order(self):
        config = ExperimentConfig(experiment="soliton-stability", n=600, r_max=12.0,
                                  T=2.0)
        records = convergence_study(config, 3)
        assert records[-1].metrics["order"] >= 1.9

    def test_exact_zero_residual(self):
        config = ExperimentConfig(experiment="soliton-energy", lam=0.0, n=256,
                                  r_max=16.0)
        records = convergence_study(config, 3)
        assert "order_exact" in records[-1].metrics

    def test_non_refinable(self):
        with pytest.raises(ConfigurationError, match="refinable"):
            convergence_study(ExperimentConfig(experiment="strichartz-sweep"), 3)

    def test_needs_three_levels(self):
        with pytest.raises(ConfigurationError):
            convergence_study(ExperimentConfig(experiment="soliton-energy"), 2)


class TestCli:
    def test_list(self, capsys):
        assert cli_main(["list"]) == 0
        assert "soliton-energy" in capsys.readouterr().out

    def test_run_writes_csv(self, tmp_path, capsys):
        out = tmp_path / "r.csv"
        code = cli_main(["run", "--set", "experiment=laplacian-consistency",
                         "--set", "grid.n=64", "--set", "grid.r_max=4.0",
                         "--out", str(out)])
        assert code == 0
        assert out.read_text().startswith("experiment,")

    def test_env_var_output_dir(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("HYPWAVE_OUT", str(tmp_path))
        code = cli_main(["run", "--set", "experiment=laplacian-consistency",
                         "--set", "grid.n=64", "--set", "grid.r_max=4.0"])
        assert code == 0
        assert (tmp_path / "laplacian-consistency.csv").exists()

    def test_bad_config_exit_one(self, capsys):
        assert cli_main(["run", "--set", "experiment=frobnicate"]) == 1

    def test_threshold_violation_exit_two(self, capsys, recwarn):
        # a truncated domain misses the soliton energy tolerance
        code = cli_main(["run", "--set", "experiment=soliton-energy",
                         "--set", "grid.r_max=3.0", "--set", "grid.n=300",
                         "--set", "soliton.lambda=0.9"])
        captured = capsys.readouterr()
        assert code == 2
        assert "THRESHOLD VIOLATION" in captured.err

    def test_sweep_parallel(self, capsys):
        code = cli_main(["sweep", "--set", "experiment=soliton-energy",
                         "--sweep", "soliton.lambda=0.2,0.4,0.6", "--jobs", "2"])
        out = capsys.readouterr().out
        assert code == 0
        assert out.count("metric:rel_err") >= 9

    def test_console_script_entry(self):
        proc = subprocess.run([sys.executable, "-m", "hypwave.cli", "list"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
