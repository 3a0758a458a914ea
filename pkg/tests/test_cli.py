"""End-to-end CLI tests on small synthetic inputs."""

import os
from pathlib import Path

import numpy as np
import pytest

from xpatch.cli import TRAIN_SCHEMA, build_parser, main, read_config_file
from xpatch.datasets import make_sine_dataset
from xpatch.training import TrainConfig


@pytest.fixture
def sine_csv(tiny_csv):
    values = make_sine_dataset(260, 2, seed=0).values
    return tiny_csv(values, columns=["east", "west"], name="sine.csv")


def run(argv) -> int:
    return main([str(a) for a in argv])


TRAIN_ARGS = [
    "--lookback", 16, "--horizon", 8, "--patch-len", 4, "--stride", 4,
    "--epochs", 2, "--batch-size", 16, "--scheduler", "standard",
    "--lr", 5e-3, "--loss", "mse",
]


class TestDecompose:
    def test_ema_roundtrip_columns(self, sine_csv, tmp_path, capsys):
        out = tmp_path / "dec.csv"
        assert run(["decompose", "--input", sine_csv, "--method", "ema",
                    "--alpha", 0.3, "--out", out, "--column", "east"]) == 0
        lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        assert lines[0] == "input,trend,seasonal"
        row = np.array([float(v) for v in lines[1].split(",")])
        assert row[0] == pytest.approx(row[1] + row[2])

    def test_even_kernel_usage_error(self, sine_csv, tmp_path):
        code = run(["decompose", "--input", sine_csv, "--method", "sma",
                    "--kernel", 24, "--out", tmp_path / "x.csv"])
        assert code == 2

    def test_alpha_out_of_range(self, sine_csv, tmp_path):
        code = run(["decompose", "--input", sine_csv, "--alpha", 1.5,
                    "--out", tmp_path / "x.csv"])
        assert code == 2

    def test_multichannel_output(self, sine_csv, tmp_path):
        out = tmp_path / "dec.csv"
        assert run(["decompose", "--input", sine_csv, "--out", out]) == 0
        header = [l for l in out.read_text().splitlines() if not l.startswith("#")][0]
        assert header.split(",") == [
            "east_input", "east_trend", "east_seasonal",
            "west_input", "west_trend", "west_seasonal",
        ]

    def test_plot_emitted(self, sine_csv, tmp_path):
        svg = tmp_path / "dec.svg"
        assert run(["decompose", "--input", sine_csv, "--out", tmp_path / "d.csv",
                    "--plot", svg, "--column", "east"]) == 0
        assert svg.read_text().startswith("<svg")


class TestTrainEvalForecast:
    def test_full_pipeline(self, sine_csv, tmp_path):
        out_dir = tmp_path / "run"
        assert run(["train", "--dataset", sine_csv, "--out-dir", out_dir,
                    *TRAIN_ARGS]) == 0
        assert (out_dir / "checkpoint.bin").exists()
        assert (out_dir / "checkpoint.json").exists()
        history = (out_dir / "history.csv").read_text()
        data_lines = [l for l in history.splitlines() if not l.startswith("#")]
        assert data_lines[0] == "epoch,lr,train_loss,val_mse,val_mae"
        assert len(data_lines) == 3
        assert (out_dir / "config.txt").exists()

        report = tmp_path / "report.csv"
        assert run(["eval", "--checkpoint", out_dir / "checkpoint",
                    "--dataset", sine_csv, "--out", report]) == 0
        body = [l for l in report.read_text().splitlines() if not l.startswith("#")]
        assert body[0] == "dataset,L,T,seed,mse,mae,n_windows"

        forecast_csv = tmp_path / "fc.csv"
        assert run(["forecast", "--checkpoint", out_dir / "checkpoint",
                    "--input", sine_csv, "--out", forecast_csv]) == 0
        rows = [l for l in forecast_csv.read_text().splitlines() if not l.startswith("#")]
        assert rows[0] == "east,west"
        assert len(rows) == 1 + 8  # header + horizon

    def test_eval_golden_reproducible(self, sine_csv, tmp_path):
        out_dir = tmp_path / "run"
        run(["train", "--dataset", sine_csv, "--out-dir", out_dir, *TRAIN_ARGS])
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run(["eval", "--checkpoint", out_dir / "checkpoint",
             "--dataset", sine_csv, "--out", a])
        run(["eval", "--checkpoint", out_dir / "checkpoint",
             "--dataset", sine_csv, "--out", b])
        assert a.read_bytes() == b.read_bytes()

    def test_raw_scale_flag(self, sine_csv, tmp_path, capsys):
        out_dir = tmp_path / "run"
        run(["train", "--dataset", sine_csv, "--out-dir", out_dir, *TRAIN_ARGS])
        assert run(["eval", "--checkpoint", out_dir / "checkpoint",
                    "--dataset", sine_csv, "--raw-scale"]) == 0

    def test_identical_seeds_identical_history(self, sine_csv, tmp_path):
        args = ["--dataset", sine_csv, *TRAIN_ARGS, "--seed", 7]
        run(["train", *args, "--out-dir", tmp_path / "r1"])
        run(["train", *args, "--out-dir", tmp_path / "r2"])
        h1 = (tmp_path / "r1" / "history.csv").read_text()
        h2 = (tmp_path / "r2" / "history.csv").read_text()
        assert h1 == h2
        assert (tmp_path / "r1" / "checkpoint.bin").read_bytes() == \
            (tmp_path / "r2" / "checkpoint.bin").read_bytes()

    def test_lookback_divisibility_suggestion(self, sine_csv, tmp_path, capsys):
        code = run(["train", "--dataset", sine_csv, "--lookback", 17,
                    "--horizon", 8, "--out-dir", tmp_path / "x"])
        assert code == 2
        assert "16" in capsys.readouterr().err

    def test_missing_dataset_file(self, tmp_path):
        code = run(["train", "--dataset", tmp_path / "missing.csv",
                    "--out-dir", tmp_path / "x", *TRAIN_ARGS])
        assert code == 3

    def test_forecast_short_input(self, sine_csv, tiny_csv, tmp_path):
        out_dir = tmp_path / "run"
        run(["train", "--dataset", sine_csv, "--out-dir", out_dir, *TRAIN_ARGS])
        short = tiny_csv(np.ones((4, 2)), columns=["east", "west"], name="short.csv")
        code = run(["forecast", "--checkpoint", out_dir / "checkpoint",
                    "--input", short, "--out", tmp_path / "fc.csv"])
        assert code == 3


class TestConfigPrecedence:
    def test_file_values_used(self, sine_csv, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "# smoke config\nlookback = 16\nhorizon = 8\npatch_len = 4\n"
            "stride = 4\nepochs = 1\nbatch_size = 16\nscheduler = standard\n"
            "lr = 0.005\nloss = mse\n"
        )
        out_dir = tmp_path / "run"
        assert run(["train", "--dataset", sine_csv, "--config", cfg,
                    "--out-dir", out_dir]) == 0
        text = (out_dir / "config.txt").read_text()
        assert "lookback=16" in text and "epochs=1" in text

    def test_flag_overrides_file(self, sine_csv, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("lookback = 16\nhorizon = 8\npatch_len = 4\nstride = 4\n"
                       "epochs = 1\nbatch_size = 16\nscheduler = standard\n"
                       "lr = 0.005\nloss = mse\n")
        out_dir = tmp_path / "run"
        assert run(["train", "--dataset", sine_csv, "--config", cfg,
                    "--epochs", 2, "--out-dir", out_dir]) == 0
        assert "epochs=2" in (out_dir / "config.txt").read_text()

    def test_env_seed_respected_and_flag_wins(self, sine_csv, tmp_path, monkeypatch):
        monkeypatch.setenv("XPATCH_SEED", "11")
        out_dir = tmp_path / "r1"
        run(["train", "--dataset", sine_csv, "--out-dir", out_dir, *TRAIN_ARGS])
        assert "seed=11" in (out_dir / "config.txt").read_text()
        out_dir = tmp_path / "r2"
        run(["train", "--dataset", sine_csv, "--out-dir", out_dir,
             *TRAIN_ARGS, "--seed", 3])
        assert "seed=3" in (out_dir / "config.txt").read_text()

    def test_unknown_config_key_rejected(self, sine_csv, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("warp_speed = 9\n")
        assert run(["train", "--dataset", sine_csv, "--config", cfg,
                    "--out-dir", tmp_path / "x"]) == 2

    def test_malformed_config_line(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("this is not a pair\n")
        with pytest.raises(Exception):
            read_config_file(cfg)


class TestAdfAndPlot:
    def test_adf_table(self, tmp_path, tiny_csv):
        rng = np.random.default_rng(0)
        t = np.arange(800.0)
        values = np.stack(
            [np.sin(2 * np.pi * t / 24) + 0.3 * rng.standard_normal(800).cumsum() * 0.1,
             rng.standard_normal(800)], axis=1,
        )
        path = tiny_csv(values, columns=["a", "b"], name="adf.csv")
        out = tmp_path / "adf.csv"
        assert run(["adf", "--input", path, "--chunk-len", 400,
                    "--max-lags", 6, "--out", out]) == 0
        lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        assert lines[0] == "chunk_index,channel,component,t_stat,p_bucket,stationary"
        assert len(lines) == 1 + 2 * 3  # two chunks x three components, one channel

    def test_plot_command(self, sine_csv, tmp_path):
        out = tmp_path / "plot.svg"
        assert run(["plot", "--input", sine_csv, "--columns", "east,west",
                    "--out", out]) == 0
        assert out.read_text().startswith("<svg")

    def test_plot_unknown_column(self, sine_csv, tmp_path):
        assert run(["plot", "--input", sine_csv, "--columns", "north",
                    "--out", tmp_path / "x.svg"]) == 3


class TestGoldenFixtures:
    """Frozen smoke checkpoint and pinned outputs, byte-for-byte."""

    DATA = Path(__file__).parent / "data"

    def _stage(self, tmp_path, monkeypatch, names):
        for name in names:
            (tmp_path / name).write_bytes((self.DATA / name).read_bytes())
        monkeypatch.chdir(tmp_path)

    def test_eval_reproduces_pinned_report(self, tmp_path, monkeypatch):
        self._stage(tmp_path, monkeypatch,
                    ["smoke_ckpt.bin", "smoke_ckpt.json", "smoke_series.csv"])
        assert run(["eval", "--checkpoint", "smoke_ckpt",
                    "--dataset", "smoke_series.csv", "--out", "report.csv"]) == 0
        golden = (self.DATA / "smoke_report_golden.csv").read_bytes()
        assert (tmp_path / "report.csv").read_bytes() == golden

    def test_adf_reproduces_pinned_buckets(self, tmp_path, monkeypatch):
        self._stage(tmp_path, monkeypatch, ["adf_fixture.csv"])
        assert run(["adf", "--input", "adf_fixture.csv", "--chunk-len", 400,
                    "--max-lags", 6, "--out", "adf.csv"]) == 0
        golden = (self.DATA / "adf_golden.csv").read_bytes()
        assert (tmp_path / "adf.csv").read_bytes() == golden


class TestHelpSchema:
    def test_every_train_config_field_has_a_flag(self):
        """The --help surface must cover the whole train-config schema."""
        parser = build_parser()
        sub = next(
            a for a in parser._subparsers._group_actions
        ).choices["train"]
        option_strings = {
            s for action in sub._actions for s in action.option_strings
        }
        for key, (flag, _, _, _) in TRAIN_SCHEMA.items():
            assert flag in option_strings, f"missing flag {flag} for {key}"
        # every dataclass knob of TrainConfig is reachable from the schema
        import dataclasses

        config_fields = {f.name for f in dataclasses.fields(TrainConfig)}
        reachable = set(TRAIN_SCHEMA) | {"loss", "scheduler"}
        assert config_fields - reachable == set()

    def test_help_exits_zero(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--help"])
        assert exc.value.code == 0

    def test_usage_error_exit_code(self):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--no-such-flag"])
        assert exc.value.code == 2

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
