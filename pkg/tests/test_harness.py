import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glassopt import harness, netkit
from glassopt.alice import AliceConfig, reference_adam
from glassopt.harness import (
    DataParams,
    ExperimentConfig,
    aggregate,
    default_partitions,
    load_config,
    parse_config,
    powerlaw_experiment,
    run_experiment,
    serialize_config,
)
from glassopt.netkit import Batch, ConfigError, ModelSpec


class TestAggregate:
    def test_single_value(self):
        assert aggregate([3.0]) == (3.0, 3.0, 3.0)

    def test_even_count_median_is_middle_mean(self):
        assert aggregate([1.0, 2.0, 3.0, 4.0]) == (1.0, 2.5, 4.0)

    def test_empty_rejected(self):
        with pytest.raises(ConfigError):
            aggregate([])

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=12), st.randoms())
    def test_permutation_invariant(self, values, rng):
        shuffled = list(values)
        rng.shuffle(shuffled)
        assert aggregate(shuffled) == aggregate(values)


class TestConfigFormat:
    def _full_config(self):
        return ExperimentConfig(
            name="demo",
            task="synthetic-classification",
            seeds=(3, 1, 4),
            steps=17,
            batch_size=32,
            optimizer="alice",
            model=ModelSpec((5, 8, 8, 3), "xent"),
            alice=AliceConfig(lam=0.004, beta1=0.85, lam_max=0.02, terms=("rho",), naq=True),
            data=DataParams(samples=300, classes=3, noise=1.5),
        )

    def test_round_trip(self):
        cfg = self._full_config()
        assert parse_config(serialize_config(cfg)) == cfg

    def test_round_trip_without_model(self):
        cfg = ExperimentConfig(name="walk", task="glass-walk-suite", seeds=(1,), steps=5)
        assert parse_config(serialize_config(cfg)) == cfg

    def test_unknown_key_reports_line(self):
        text = "name = x\ntask = glass-walk-suite\nbogus_key = 1\n"
        with pytest.raises(ConfigError, match=r":3: unknown key 'bogus_key'"):
            parse_config(text)

    def test_bad_value_reports_line_and_field(self):
        with pytest.raises(ConfigError, match=r":2: bad value for 'steps'"):
            parse_config("name = x\nsteps = soon\n")

    def test_missing_equals_reports_line(self):
        with pytest.raises(ConfigError, match=r":1: expected 'key = value'"):
            parse_config("just some words\n")

    def test_comments_and_blank_lines_ignored(self):
        cfg = parse_config("# a comment\n\nname = ok\ntask = least-squares\n")
        assert cfg.name == "ok"

    def test_invalid_task_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("task = minesweeper\n")

    def test_load_config_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.cfg")

    def test_manifest_is_parseable(self, tmp_path):
        cfg = ExperimentConfig(name="m", task="least-squares", seeds=(0,))
        run_experiment(cfg, tmp_path)
        manifest = (tmp_path / "m" / "manifest.txt").read_text()
        assert parse_config(manifest) == cfg


class TestTasks:
    def test_classification_batch_shapes(self):
        batch = harness.make_classification_batch(DataParams(samples=50), 7, 4, seed=0)
        assert batch.inputs.shape == (50, 7)
        assert batch.targets.shape == (50,)
        assert batch.targets.min() >= 0 and batch.targets.max() < 4

    def test_regression_batch_deterministic(self):
        a = harness.make_regression_batch(DataParams(samples=20), 5, 2, seed=3)
        b = harness.make_regression_batch(DataParams(samples=20), 5, 2, seed=3)
        assert np.array_equal(a.inputs, b.inputs)
        assert np.array_equal(a.targets, b.targets)

    def test_default_partitions_cover(self):
        spec = ModelSpec((4, 6, 6, 2))
        parts = default_partitions(spec)
        assert set(parts) == {"layer_1", "layer_2", "layer_3"}
        joined = np.sort(np.concatenate(list(parts.values())))
        assert np.array_equal(joined, np.arange(spec.param_count))


class TestRunExperiment:
    def test_single_seed_min_equals_max(self, tmp_path):
        cfg = ExperimentConfig(name="one", task="least-squares", seeds=(5,))
        summary = run_experiment(cfg, tmp_path)
        assert summary.minimum == summary.median == summary.maximum

    def test_failures_recorded_not_raised(self, tmp_path):
        cfg = ExperimentConfig(
            name="broken",
            task="synthetic-regression",
            seeds=(0,),
            steps=2,
            model=None,  # training without a model spec fails per-seed
        )
        summary = run_experiment(cfg, tmp_path)
        assert math.isnan(summary.minimum)
        assert summary.errors
        assert (tmp_path / "broken" / "seed_0" / "error.txt").exists()

    def test_training_artifacts_written(self, tmp_path):
        cfg = ExperimentConfig(
            name="train",
            task="synthetic-regression",
            seeds=(1, 2),
            steps=4,
            batch_size=0,
            model=ModelSpec((3, 6, 2)),
            alice=AliceConfig(lam=1e-3, lam_max=0.01),
        )
        summary = run_experiment(cfg, tmp_path)
        base = tmp_path / "train"
        log = (base / "seed_1" / "train_log.csv").read_text().splitlines()
        assert log[0] == ",".join(harness.TRAIN_LOG_HEADER)
        assert len(log) == 5
        summary_lines = (base / "summary.csv").read_text().splitlines()
        assert summary_lines[0] == "seed,final_metric"
        assert [line.split(",")[0] for line in summary_lines[1:]] == [
            "1", "2", "min", "median", "max",
        ]
        assert len(summary.per_seed) == 2

    def test_three_seed_quadratic_bowl_matches_reference_adam(self, tmp_path):
        # Alice pinned to Adam limits must land exactly on reference Adam runs.
        lr = 2e-3
        cfg = ExperimentConfig(
            name="pinned",
            task="synthetic-regression",
            seeds=(0, 1, 2),
            steps=40,
            batch_size=16,
            model=ModelSpec((3, 6, 2)),
            alice=AliceConfig(
                lam=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, phi=1.0, omega=1.0,
                lam_min=lr, lam_max=lr, limit_method="adam", quick_steps=0,
            ),
        )
        summary = run_experiment(cfg, tmp_path)
        for seed, metric in summary.per_seed:
            data = harness.task_batch(cfg, seed)
            params = netkit.build_model(cfg.model, seed)
            stream = harness._minibatch_stream(data, cfg.batch_size, seed)
            grad_fn = lambda th: netkit.gradient(cfg.model, th, next(stream))[1]  # noqa: E731
            trajectory = reference_adam(params, grad_fn, lr, n_steps=cfg.steps)
            reference_final = netkit.loss(cfg.model, trajectory[-1], data)
            assert abs(metric - reference_final) <= 1e-12

    def test_baseline_optimizers_run(self, tmp_path):
        for name in ("adam", "sgdm"):
            cfg = ExperimentConfig(
                name=f"base_{name}",
                task="synthetic-regression",
                seeds=(0,),
                steps=3,
                optimizer=name,
                model=ModelSpec((3, 6, 2)),
            )
            summary = run_experiment(cfg, tmp_path)
            assert not summary.errors

    def test_oracle_tasks_produce_reports(self, tmp_path):
        for task in ("naq-exactness", "estimator-suite", "glass-walk-suite"):
            cfg = ExperimentConfig(name=task, task=task, seeds=(0,), steps=30)
            summary = run_experiment(cfg, tmp_path)
            assert not summary.errors
            report = tmp_path / task / "seed_0" / "report.csv"
            assert report.read_text().splitlines()[0] == ",".join(harness.REPORT_HEADER)

    def test_output_dir_from_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv(harness.OUTPUT_ENV, str(tmp_path / "envout"))
        cfg = ExperimentConfig(name="env", task="least-squares", seeds=(0,))
        run_experiment(cfg)
        assert (tmp_path / "envout" / "env" / "summary.csv").exists()


class TestPowerlawExperiment:
    def test_probe_on_small_network(self):
        spec = ModelSpec((4, 8, 8, 3), "xent")
        data = harness.make_classification_batch(
            DataParams(samples=120, classes=3, noise=1.0), 4, 3, seed=0
        )
        report = powerlaw_experiment(
            spec, data, lam=0.002, n_samples=8, seed=0, warmup_steps=10
        )
        names = [e.name for e in report.entries]
        assert names == ["layer_1", "layer_2", "layer_3"]
        assert all(e.defined for e in report.entries)

    def test_probe_task_via_run_experiment(self, tmp_path):
        cfg = ExperimentConfig(
            name="probe",
            task="powerlaw-probe",
            seeds=(0,),
            batch_size=32,
            model=ModelSpec((4, 8, 8, 3), "xent"),
            data=DataParams(samples=100, classes=3),
        )
        cfg.probe.samples = 8
        cfg.probe.warmup_steps = 5
        summary = run_experiment(cfg, tmp_path)
        assert not summary.errors
        lines = (tmp_path / "probe" / "seed_0" / "powerlaw.csv").read_text().splitlines()
        assert lines[0] == "partition,sum_v_lambda,sum_v_2lambda,p"

    def test_shared_probe_seed_pairs_scales(self):
        # a purely quadratic synthetic gradient must give exactly p = 2
        spec = ModelSpec((3, 4, 2))
        rng = np.random.default_rng(0)
        h_matrix = rng.standard_normal((spec.param_count, spec.param_count))
        h_matrix = (h_matrix + h_matrix.T) / 2
        from glassopt.glass import measure_variations, power_law

        grad_fn = lambda th: h_matrix @ th  # noqa: E731
        m1 = measure_variations(grad_fn, np.zeros(spec.param_count), 0.01, 16, seed=4)
        m2 = measure_variations(grad_fn, np.zeros(spec.param_count), 0.02, 16, seed=4)
        report = power_law(m1, m2, {"all": np.arange(spec.param_count)})
        assert report.exponent("all") == pytest.approx(2.0, abs=1e-9)


class TestVerifySuites:
    def test_unknown_suite(self):
        with pytest.raises(ConfigError):
            harness.run_verify_suite("bogus")

    @pytest.mark.parametrize("suite", ["step", "naq"])
    def test_fast_suites_pass(self, suite):
        rows = harness.run_verify_suite(suite, seed=0)
        assert rows and all(r.passed for r in rows)
