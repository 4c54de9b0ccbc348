import pytest

from glassopt import cli
from glassopt.harness import ExperimentConfig, serialize_config
from glassopt.netkit import ModelSpec


def write_config(tmp_path, cfg, name="run.cfg"):
    path = tmp_path / name
    path.write_text(serialize_config(cfg))
    return path


class TestVerifyCommand:
    def test_step_suite_passes(self, tmp_path, capsys):
        code = cli.main(["verify", "--suite", "step", "--out", str(tmp_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert "[PASS]" in out and "[FAIL]" not in out
        assert (tmp_path / "verify_step.csv").exists()

    def test_unknown_suite_usage_error(self):
        with pytest.raises(SystemExit) as excinfo:
            cli.main(["verify", "--suite", "bogus"])
        assert excinfo.value.code == 2


class TestSimulateCommand:
    def test_glass_walk_report(self, tmp_path, capsys):
        code = cli.main(
            ["simulate", "glass-walk", "--trials", "20000", "--seed", "3",
             "--out", str(tmp_path)]
        )
        assert code == 0
        lines = (tmp_path / "glass_walk.csv").read_text().splitlines()
        assert lines[0] == "quantity,empirical,predicted,std_error,n"
        assert "mean_abs_loss_change" in capsys.readouterr().out

    def test_underdetermined_ls(self, tmp_path):
        code = cli.main(["simulate", "underdetermined-ls", "--seed", "1", "--out", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "underdetermined_ls.csv").exists()

    def test_invalid_density_is_config_error(self, tmp_path, capsys):
        code = cli.main(["simulate", "glass-walk", "--rho", "-1", "--out", str(tmp_path)])
        assert code == 2
        assert "config error" in capsys.readouterr().err

    def test_unknown_scenario_usage_error(self):
        with pytest.raises(SystemExit) as excinfo:
            cli.main(["simulate", "coin-flip"])
        assert excinfo.value.code == 2


class TestTrainCommand:
    def test_tiny_training_run(self, tmp_path, capsys):
        cfg = ExperimentConfig(
            name="cli_train",
            task="synthetic-regression",
            seeds=(0, 1),
            steps=3,
            model=ModelSpec((3, 6, 2)),
        )
        path = write_config(tmp_path, cfg)
        code = cli.main(["train", "--config", str(path), "--out", str(tmp_path / "out")])
        assert code == 0
        assert "aggregate (min, median, max)" in capsys.readouterr().out
        assert (tmp_path / "out" / "cli_train" / "summary.csv").exists()

    def test_distinct_term_configs_produce_distinct_logs(self, tmp_path):
        logs = {}
        for label, terms in (("rho", ("rho",)), ("habs", ("h_abs",))):
            cfg = ExperimentConfig(
                name=f"terms_{label}",
                task="synthetic-regression",
                seeds=(0,),
                steps=4,
                batch_size=0,
                model=ModelSpec((3, 6, 2)),
            )
            cfg.alice.terms = terms
            cfg.alice.lam_max = 0.05
            path = write_config(tmp_path, cfg, f"{label}.cfg")
            assert cli.main(["train", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
            log = (tmp_path / "o" / f"terms_{label}" / "seed_0" / "train_log.csv").read_text()
            logs[label] = [",".join(line.split(",")[:-1]) for line in log.splitlines()]
        assert logs["rho"] != logs["habs"]

    def test_missing_config_exits_two(self, tmp_path, capsys):
        code = cli.main(["train", "--config", str(tmp_path / "missing.cfg")])
        assert code == 2
        assert "config error" in capsys.readouterr().err


class TestProbeCommand:
    def test_probe_writes_powerlaw_csv(self, tmp_path):
        cfg = ExperimentConfig(
            name="cli_probe",
            task="powerlaw-probe",
            seeds=(0,),
            batch_size=32,
            model=ModelSpec((4, 8, 8, 3), "xent"),
        )
        cfg.data.samples = 100
        cfg.data.classes = 3
        cfg.probe.samples = 8
        cfg.probe.warmup_steps = 5
        path = write_config(tmp_path, cfg)
        code = cli.main(["probe", "--config", str(path), "--out", str(tmp_path / "out")])
        assert code == 0
        report = tmp_path / "out" / "cli_probe" / "seed_0" / "powerlaw.csv"
        assert report.read_text().startswith("partition,sum_v_lambda,sum_v_2lambda,p")

    def test_malformed_config_line_diagnostics(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("name = x\nalice.bogus = 3\n")
        code = cli.main(["probe", "--config", str(path)])
        assert code == 2
        err = capsys.readouterr().err
        assert ":2:" in err and "alice.bogus" in err


def test_version_flag():
    with pytest.raises(SystemExit) as excinfo:
        cli.main(["--version"])
    assert excinfo.value.code == 0
