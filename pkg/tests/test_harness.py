"""Harness tests: config handling, seed determinism, CSV schemas, exit codes."""

import logging
from pathlib import Path

import numpy as np
import pytest

import gminmax.harness as harness
from gminmax.checks import MinMaxInstance, ball_net
from gminmax.cli import main
from gminmax.covariance import CovarianceSpec, build
from gminmax.harness import (
    EXIT_CHECK_VIOLATION,
    EXIT_OK,
    ExperimentConfig,
    load_config,
    run_classification_sweep,
    run_regression_sweep,
)


def tiny_regression_cfg(tmp_path, **kw):
    defaults = dict(
        experiment="regression_sweep",
        lambda_grid=[0.5, 5.0],
        trials=3,
        master_seed=7,
        output_dir=str(tmp_path),
        k=2,
        n=20,
        d_grid=[12],
        cov_specs=[
            {"kind": "spiked", "sigma_base": 0.5, "spike_sigma": 1.0},
            {"kind": "isotropic", "sigma_base": 1.0},
        ],
        noise_sigmas=[0.1, 0.2],
        theta_star="ones",
    )
    defaults.update(kw)
    return ExperimentConfig(**defaults)


class TestConfig:
    def test_load_and_overrides(self, tmp_path):
        cfg_text = """
experiment = "regression_sweep"
master_seed = 3
trials = 4
output_dir = "somewhere"
lambda_log_grid = {lo = -1, hi = 1, points = 5}

[regression]
k = 2
n = 30
d = [10, 20]
noise_sigmas = [0.1, 0.2]
theta_star = "ones"

[[regression.covariances]]
kind = "spiked"
sigma_base = 0.5
spike_sigma = 1.0

[[regression.covariances]]
kind = "isotropic"
sigma_base = 1.0
"""
        path = tmp_path / "exp.toml"
        path.write_text(cfg_text)
        cfg = load_config(path)
        assert cfg.experiment == "regression_sweep"
        assert cfg.d_grid == [10, 20]
        assert len(cfg.lambda_grid) == 5
        assert cfg.lambda_grid[0] == pytest.approx(0.1)
        assert cfg.cov_specs[0]["kind"] == "spiked"

    def test_classification_section(self, tmp_path):
        path = tmp_path / "cls.toml"
        path.write_text(
            """
experiment = "classification_sweep"
lambda_grid = [1.0, 10.0]

[classification]
d = 500
n = 400
sigma1 = 5.0
sigma2 = 5.0
sigma = 15.0
r = 0.8
"""
        )
        cfg = load_config(path)
        assert cfg.class_d == 500
        assert cfg.sigma == 15.0

    def test_rejects_unknown_experiment(self):
        with pytest.raises(Exception, match="unknown experiment"):
            ExperimentConfig(experiment="nope", lambda_grid=[1.0])


class TestRegressionSweep:
    def test_csv_schema_and_determinism(self, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        res_a = run_regression_sweep(tiny_regression_cfg(out_a))
        res_b = run_regression_sweep(tiny_regression_cfg(out_b))
        assert len(res_a) == 1
        theory_a, exp_a = map(Path, res_a[0].files)
        theory_b, exp_b = map(Path, res_b[0].files)
        assert theory_a.read_bytes() == theory_b.read_bytes()
        assert exp_a.read_bytes() == exp_b.read_bytes()
        header = exp_a.read_text().splitlines()[0]
        assert header == "lam,train,trainstd,gen,genstd"
        assert theory_a.read_text().splitlines()[0] == "lam,train,gen"
        assert len(exp_a.read_text().splitlines()) == 3  # header + 2 lambdas

    def test_rows_populated_single_lambda(self, tmp_path):
        cfg = tiny_regression_cfg(tmp_path, lambda_grid=[1.0], trials=1)
        res = run_regression_sweep(cfg)[0]
        row = res.rows[0]
        assert row["train_std"] == 0.0
        for key in ("train_theory", "gen_theory", "train_emp", "gen_emp"):
            assert np.isfinite(row[key])
        assert not res.flags

    def test_theory_tracks_empirics(self, tmp_path):
        cfg = tiny_regression_cfg(tmp_path, n=60, d_grid=[30], trials=12)
        res = run_regression_sweep(cfg)[0]
        for row in res.rows:
            for col in ("train", "gen"):
                spread = max(
                    0.05, 3 * row[f"{col}_std"] / np.sqrt(cfg.trials)
                )
                assert abs(row[f"{col}_theory"] - row[f"{col}_emp"]) <= spread


class TestClassificationSweep:
    def test_schema_and_smoke(self, tmp_path):
        cfg = ExperimentConfig(
            experiment="classification_sweep",
            lambda_grid=[5.0],
            trials=2,
            master_seed=1,
            output_dir=str(tmp_path),
            class_d=40,
            class_n=20,
            sigma1=1.0,
            sigma2=1.0,
            sigma=2.0,
            r=0.5,
        )
        res = run_classification_sweep(cfg)
        path = Path(res.files[0])
        lines = path.read_text().splitlines()
        assert lines[0] == "lam,PO,POR1,AO"
        assert len(lines) == 2
        row = res.rows[0]
        assert 0.0 <= row["ao_error"] <= 1.0
        assert 0.0 <= row["po_error"] <= 1.0


class TestChecksRunner:
    @pytest.fixture()
    def small_suite(self, monkeypatch):
        # shrink the fixed instances so the runner is test-sized
        full = harness.default_check_instances

        def two_instances(master_seed=0):
            return full(master_seed)[:2]

        def one_lip_instance(master_seed=0):
            iso = build(CovarianceSpec("isotropic", 3, sigma_base=1.0))
            net = ball_net(1.0, 3, 120, 5, surface=True)
            return [
                MinMaxInstance(
                    k=1, d=3, n_list=[3], S_w=net, S_v_blocks=[net], covariances=[iso]
                )
            ]

        monkeypatch.setattr(harness, "default_check_instances", two_instances)
        monkeypatch.setattr(harness, "lipschitz_instances", one_lip_instance)

    def test_default_instances_pass(self, tmp_path, small_suite):
        cfg = ExperimentConfig(
            experiment="checks", lambda_grid=[], output_dir=str(tmp_path),
            check_trials=12_000, t_points=11,
        )
        status, files = harness.run_checks(cfg)
        assert status == EXIT_OK
        names = {Path(f).name for f in files}
        assert "covariance_gap.csv" in names
        assert "gcgmt_instance0.csv" in names
        assert "lipschitz.csv" in names

    def test_low_trials_warns_but_runs(self, tmp_path, small_suite, caplog):
        cfg = ExperimentConfig(
            experiment="checks", lambda_grid=[], output_dir=str(tmp_path),
            check_trials=10, t_points=5,
        )
        with caplog.at_level(logging.WARNING, logger="gminmax.harness"):
            status, _ = harness.run_checks(cfg)
        assert any("statistical power" in rec.message for rec in caplog.records)
        assert status in (EXIT_OK, EXIT_CHECK_VIOLATION)

    def test_injected_sign_flip_detected(self, tmp_path, small_suite, monkeypatch):
        import gminmax.checks as checks

        true_gap = checks.covariance_gap

        def flipped(*args, **kwargs):
            return -true_gap(*args, **kwargs)

        monkeypatch.setattr(checks, "covariance_gap", flipped)
        cfg = ExperimentConfig(
            experiment="checks", lambda_grid=[], output_dir=str(tmp_path),
            check_trials=200, t_points=3,
        )
        status, _ = harness.run_checks(cfg)
        assert status == EXIT_CHECK_VIOLATION


class TestCli:
    def test_config_run_with_overrides(self, tmp_path):
        cfg_path = tmp_path / "exp.toml"
        cfg_path.write_text(
            """
experiment = "regression_sweep"
lambda_grid = [1.0]
trials = 2
output_dir = "unused"

[regression]
k = 1
n = 15
d = 8
noise_sigmas = [0.1]
theta_star = "ones"

[[regression.covariances]]
kind = "isotropic"
sigma_base = 1.0
"""
        )
        out = tmp_path / "cli_out"
        code = main(
            ["--config", str(cfg_path), "--out", str(out), "--seed", "5", "--trials", "2"]
        )
        assert code == EXIT_OK
        assert (out / "regression_n15_d8_k1_theory.csv").exists()

    def test_missing_arguments(self, capsys):
        assert main([]) == harness.EXIT_SOLVER_FAILURE
        assert "required" in capsys.readouterr().err


class TestParallelJobs:
    def test_worker_pool_matches_serial(self, tmp_path):
        serial = run_regression_sweep(tiny_regression_cfg(tmp_path / "s", jobs=1))
        parallel = run_regression_sweep(tiny_regression_cfg(tmp_path / "p", jobs=2))
        a = Path(serial[0].files[1]).read_bytes()
        b = Path(parallel[0].files[1]).read_bytes()
        assert a == b
