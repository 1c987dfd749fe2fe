import json

import pytest

from paraqnn import cli, dataio, provenance
from paraqnn.cli import main


def run(argv):
    return main(argv)


class TestGenerate:
    def test_writes_dataset(self, tmp_path):
        out = tmp_path / "ds"
        assert run(["generate", "--regime", "rabi", "--seed", "42",
                    "--out", str(out), "--scale", "0.02"]) == 0
        assert (out / "data.csv").is_file()
        assert (out / "manifest.json").is_file()
        ds = dataio.load(out)
        assert len(ds) == 200

    def test_unknown_regime_names_valid_set(self, tmp_path, capsys):
        code = run(["generate", "--regime", "ramsey", "--out", str(tmp_path)])
        assert code == 1
        err = capsys.readouterr().err
        assert "usage" in err
        assert "rabi" in err and "lindblad" in err and "mixed" in err

    def test_missing_out_without_env(self, monkeypatch, capsys):
        monkeypatch.delenv(cli.OUT_ROOT_ENV, raising=False)
        assert run(["generate", "--regime", "rabi"]) == 1
        assert "--out" in capsys.readouterr().err

    def test_env_root_used_as_default(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.OUT_ROOT_ENV, str(tmp_path))
        assert run(["generate", "--regime", "rabi", "--scale", "0.02"]) == 0
        assert (tmp_path / "datasets" / "rabi" / "data.csv").is_file()

    def test_aggregated_flag_errors(self, capsys):
        code = run(["generate", "--regime", "rabi", "--scale", "7",
                    "--seed", "-3"])
        assert code == 1
        err = capsys.readouterr().err
        assert "--scale" in err and "--seed" in err

    def test_temporal_and_clip_flags_recorded(self, tmp_path):
        out = tmp_path / "ds"
        assert run(["generate", "--regime", "rabi", "--out", str(out),
                    "--scale", "0.02", "--temporal-holdout", "--clip"]) == 0
        man = json.loads((out / "manifest.json").read_text())
        assert man["split_mode"] == "temporal"
        assert man["noise"]["clip_output"] is True


class TestTrain:
    @pytest.fixture()
    def dataset_dir(self, tmp_path):
        out = tmp_path / "ds"
        run(["generate", "--regime", "rabi", "--out", str(out),
             "--scale", "0.02"])
        return out

    def test_train_writes_artifacts(self, dataset_dir, tmp_path):
        out = tmp_path / "run"
        code = run(["train", "--model", "paraqnn", "--data", str(dataset_dir),
                    "--seed", "42", "--scale", "0.02", "--out", str(out)])
        assert code == 0
        assert (out / "telemetry.csv").is_file()
        assert (out / "checkpoint.npz").is_file()
        summary = json.loads((out / "summary.json").read_text())
        assert summary["model"] == "paraqnn"
        assert "stamp" in summary
        assert summary["epochs"] == 30  # 1500 * 0.02

    def test_missing_dataset_is_data_error(self, tmp_path, capsys):
        code = run(["train", "--model", "mlp", "--data",
                    str(tmp_path / "nope"), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "data" in capsys.readouterr().err

    def test_unknown_flag_is_usage_error(self, dataset_dir, tmp_path, capsys):
        code = run(["train", "--model", "mlp", "--data", str(dataset_dir),
                    "--frobnicate"])
        assert code == 1

    def test_experimental_mode(self, dataset_dir, tmp_path):
        out = tmp_path / "exp"
        code = run(["train", "--model", "paraqnn", "--data", str(dataset_dir),
                    "--mode", "experimental", "--scale", "0.02",
                    "--out", str(out)])
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["mode"] == "experimental"


class TestBenchmarkCli:
    def test_default_models_are_all_four(self):
        parser = cli.build_parser()
        args = parser.parse_args(["benchmark", "--out", "x"])
        assert args.models.split(",") == ["paraqnn", "pinn-incomplete",
                                          "pinn-known", "mlp"]
        assert args.seeds == "42..46"

    def test_seed_range_parsing(self):
        assert cli._parse_seeds("42..46") == [42, 43, 44, 45, 46]
        assert cli._parse_seeds("1,5,9") == [1, 5, 9]
        with pytest.raises(cli.UsageError):
            cli._parse_seeds("46..42")

    def test_tiny_matrix_runs(self, tmp_path, capsys):
        out = tmp_path / "bench"
        code = run(["benchmark", "--regimes", "rabi", "--models",
                    "paraqnn,mlp", "--seeds", "42", "--scale", "0.02",
                    "--out", str(out)])
        assert code == 0
        assert (out / "report.json").is_file()
        stdout = capsys.readouterr().out
        assert "mean=" in stdout

    def test_invalid_regime_and_model_aggregate(self, tmp_path, capsys):
        code = run(["benchmark", "--regimes", "rabi,bogus", "--models",
                    "paraqnn,gan", "--out", str(tmp_path)])
        assert code == 1
        err = capsys.readouterr().err
        assert "bogus" in err and "gan" in err


class TestPlot:
    def test_plot_from_report(self, tmp_path):
        out = tmp_path / "bench"
        run(["benchmark", "--regimes", "rabi", "--models", "paraqnn",
             "--seeds", "42", "--scale", "0.02", "--out", str(out)])
        code = run(["plot", "--report", str(out / "report.json"),
                    "--out", str(tmp_path / "figs")])
        assert code == 0
        assert (tmp_path / "figs" / "rabi_panel_d.svg").is_file()

    def test_missing_report_is_data_error(self, tmp_path):
        assert run(["plot", "--report", str(tmp_path / "nope.json"),
                    "--out", str(tmp_path)]) == 2


class TestVersionStamp:
    def test_identical_modulo_timestamp(self):
        a = cli.version_stamp({"x": 1}, [42])
        b = cli.version_stamp({"x": 1}, [42])
        assert provenance.stamps_equivalent(a, b)
        assert a["config_hash"] == b["config_hash"]

    def test_config_sensitivity(self):
        a = cli.version_stamp({"x": 1}, [42])
        b = cli.version_stamp({"x": 2}, [42])
        assert a["config_hash"] != b["config_hash"]

    def test_seeds_recorded_sorted(self):
        s = cli.version_stamp({}, [46, 42])
        assert s["seeds"] == [42, 46]
