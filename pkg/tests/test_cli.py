import argparse
import json

import pytest

from cebed import data
from cebed.bench import BenchReport
from cebed.cli import RUN_CONFIG, parse_range, run


@pytest.fixture(scope="module")
def generated(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "ds"
    assert run(["generate", "--num-samples", "200", "--seed", "7", "--out", str(out)]) == 0
    return out


class TestParseRange:
    def test_inclusive_range(self):
        assert parse_range("0:20:5") == (0.0, 5.0, 10.0, 15.0, 20.0)

    def test_two_part_range(self):
        assert parse_range("1:3") == (1.0, 2.0, 3.0)

    def test_list_and_single(self):
        assert parse_range("0, 10,20") == (0.0, 10.0, 20.0)
        assert parse_range("30") == (30.0,)

    def test_fractional_step(self):
        assert parse_range("0:1:0.25") == (0.0, 0.25, 0.5, 0.75, 1.0)

    @pytest.mark.parametrize("bad", ["5:0:1", "0:10:0", "0:1:2:3", "a,b"])
    def test_invalid(self, bad):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_range(bad)


class TestExitCodes:
    def test_help(self, capsys):
        assert run(["--help"]) == 0
        assert "generate" in capsys.readouterr().out

    def test_subcommand_help(self):
        assert run(["eval", "--help"]) == 0

    def test_unknown_subcommand(self):
        assert run(["fly"]) == 2

    def test_missing_required(self):
        assert run(["generate"]) == 2

    def test_bad_choice(self, tmp_path):
        assert run(["generate", "--nfp", "50", "--out", str(tmp_path)]) == 2

    def test_runtime_error(self, tmp_path, capsys):
        assert run(["report", "--in", str(tmp_path / "missing.json")]) == 1
        assert "error" in capsys.readouterr().err


class TestGenerate:
    def test_dataset_written(self, generated):
        ds = data.load(generated)
        assert len(ds) == 200
        assert set(ds.split.tolist()) == {0, 1, 2}

    def test_run_config(self, generated):
        cfg = json.loads((generated / RUN_CONFIG).read_text())
        assert cfg["command"] == "generate"
        assert cfg["seed"] == 7 and cfg["num_samples"] == 200
        assert cfg["family"]["snr_domains"] == [0.0, 5.0, 10.0, 15.0, 20.0]

    def test_rerun_byte_identical(self, generated, tmp_path):
        again = tmp_path / "ds"
        assert run(["generate", "--num-samples", "200", "--seed", "7", "--out", str(again)]) == 0
        names = sorted(p.name for p in generated.iterdir() if p.name != RUN_CONFIG)
        assert names == sorted(p.name for p in again.iterdir() if p.name != RUN_CONFIG)
        for name in names:
            assert (generated / name).read_bytes() == (again / name).read_bytes()


class TestEval:
    def test_accuracy_on_saved_dataset(self, generated, tmp_path, capsys):
        out = tmp_path / "report.json"
        code = run(["eval", "--suite", "accuracy", "--dataset", str(generated), "--seeds", "2", "--out", str(out)])
        assert code == 0
        report = BenchReport.from_json(out.read_text())
        assert report.row("LS").mean_mse > report.row("LMMSE").mean_mse
        assert out.with_suffix(".csv").exists()
        cfg = json.loads((tmp_path / "report.config.json").read_text())
        assert cfg["suite"] == "accuracy" and cfg["seeds"] == 2
        assert "report written" in capsys.readouterr().out

    def test_directory_output(self, generated, tmp_path):
        code = run(["eval", "--suite", "ood", "--dataset", str(generated), "--seeds", "1", "--out", str(tmp_path)])
        assert code == 0
        written = sorted(p.name for p in tmp_path.iterdir())
        assert len(written) == 3
        assert all(name.startswith("ood_") for name in written)

    def test_output_root_env(self, generated, tmp_path, monkeypatch):
        monkeypatch.setenv("CEBED_OUTPUT_ROOT", str(tmp_path / "root"))
        assert run(["eval", "--suite", "accuracy", "--dataset", str(generated), "--seeds", "1"]) == 0
        assert list((tmp_path / "root").glob("accuracy_*.json"))


class TestTrainAndReport:
    def test_train_writes_artifacts(self, generated, tmp_path):
        out = tmp_path / "run"
        argv = ["train", "--model", "ddae", "--dataset", str(generated), "--out", str(out), "--max-epochs", "2", "--batch-size", "32"]
        assert run(argv) == 0
        assert (out / "model.ckpt").stat().st_size > 0
        assert len((out / "history.csv").read_text().splitlines()) == 3
        cfg = json.loads((out / RUN_CONFIG).read_text())
        assert cfg["model"] == "DDAE" and cfg["estimator"]["max_epochs"] == 2

        again = tmp_path / "run2"
        assert run(argv[:-5] + [str(again)] + argv[-4:]) == 0
        assert (out / "history.csv").read_bytes() == (again / "history.csv").read_bytes()
        assert (out / "model.ckpt").read_bytes() == (again / "model.ckpt").read_bytes()

    def test_unknown_model(self, generated, tmp_path):
        assert run(["train", "--model", "resnet", "--dataset", str(generated), "--out", str(tmp_path)]) == 1

    @pytest.mark.parametrize("fmt", ["csv", "json", "md"])
    def test_report_formats(self, generated, tmp_path, fmt):
        rep = tmp_path / "r.json"
        assert run(["eval", "--suite", "accuracy", "--dataset", str(generated), "--seeds", "1", "--out", str(rep)]) == 0
        out = tmp_path / f"out.{fmt}"
        assert run(["report", "--in", str(rep), "--format", fmt, "--out", str(out)]) == 0
        text = out.read_text()
        if fmt == "json":
            assert BenchReport.from_json(text).to_csv() == BenchReport.from_json(rep.read_text()).to_csv()
        elif fmt == "csv":
            assert text.splitlines()[0] == ",".join(BenchReport.CSV_COLUMNS)
        else:
            assert "| LMMSE |" in text
