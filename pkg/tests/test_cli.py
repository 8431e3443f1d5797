import json

import numpy as np
import pytest

from m2n2.cli import main, parse_digits
from m2n2.errors import ConfigError
from m2n2.params import load_params
from m2n2.runner import RunHistory


def test_parse_digits():
    assert parse_digits("0-4") == {0, 1, 2, 3, 4}
    assert parse_digits("1,3,5-7") == {1, 3, 5, 6, 7}
    with pytest.raises(ConfigError):
        parse_digits("0-12")
    with pytest.raises(ConfigError):
        parse_digits("")


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    code = main(["synth", "--out-dir", str(root / "data"),
                 "--train-size", "400", "--test-size", "150", "--seed", "3"])
    assert code == 0
    return root


class TestPipeline:
    def data_args(self, workdir):
        d = workdir / "data"
        return ["--train-images", str(d / "train-images.idx"),
                "--train-labels", str(d / "train-labels.idx"),
                "--test-images", str(d / "test-images.idx"),
                "--test-labels", str(d / "test-labels.idx")]

    def test_synth_wrote_idx_files(self, workdir):
        assert (workdir / "data" / "train-images.idx").exists()
        assert (workdir / "data" / "test-labels.idx").exists()

    def test_pretrain_eval_bruteforce(self, workdir, capsys):
        d = workdir / "data"
        for digits, name, seed in (("0-4", "low", 0), ("5-9", "high", 1)):
            code = main(["pretrain",
                         "--train-images", str(d / "train-images.idx"),
                         "--train-labels", str(d / "train-labels.idx"),
                         "--digits", digits, "--epochs", "3",
                         "--seed", str(seed),
                         "--out", str(workdir / f"{name}.m2n2")])
            assert code == 0
        params = load_params(workdir / "low.m2n2")
        assert params.shape[0] == 19090

        code = main(["eval", "--model", str(workdir / "low.m2n2"),
                     "--images", str(d / "test-images.idx"),
                     "--labels", str(d / "test-labels.idx")])
        assert code == 0
        out = capsys.readouterr().out
        assert "accuracy:" in out

        code = main(["bruteforce",
                     "--model-a", str(workdir / "low.m2n2"),
                     "--model-b", str(workdir / "high.m2n2"),
                     "--step", "0.05", *self.data_args(workdir)])
        assert code == 0
        out = capsys.readouterr().out
        assert "best coefficient" in out and "21 training evaluations" in out

    def test_evolve_and_report(self, workdir, capsys):
        histories = []
        for seed in (0, 1):
            config = {
                "algorithm": "m2n2", "mode": "from-scratch", "evaluations": 40,
                "seed": seed, "archive_size": 5, "train_size": 150,
                "test_size": 60, "metric_cadence": 20,
                "train_images": str(workdir / "data" / "train-images.idx"),
                "train_labels": str(workdir / "data" / "train-labels.idx"),
                "test_images": str(workdir / "data" / "test-images.idx"),
                "test_labels": str(workdir / "data" / "test-labels.idx"),
            }
            cfg_path = workdir / f"cfg{seed}.json"
            cfg_path.write_text(json.dumps(config))
            out_dir = workdir / f"run{seed}"
            assert main(["evolve", "--config", str(cfg_path), "--out", str(out_dir)]) == 0
            assert (out_dir / "history.csv").exists()
            assert (out_dir / "manifest.json").exists()
            histories.append(str(out_dir / "history.csv"))
        capsys.readouterr()

        report_path = workdir / "report.csv"
        assert main(["report", "--out", str(report_path), *histories]) == 0
        header = report_path.read_text().split("\n")[0]
        assert "test_accuracy_mean" in header and "test_accuracy_stderr" in header


class TestExitCodes:
    def test_unknown_flag_is_config_error(self, capsys):
        assert main(["evolve", "--bogus"]) == 1
        assert "configuration error" in capsys.readouterr().err

    def test_unknown_config_key_is_config_error(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"algorithm": "m2n2", "nope": 1}))
        assert main(["evolve", "--config", str(cfg)]) == 1

    def test_missing_data_file_is_data_error(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({
            "algorithm": "m2n2", "mode": "from-scratch", "evaluations": 1,
            "train_images": "/missing.idx", "train_labels": "/missing.idx",
            "test_images": "/missing.idx", "test_labels": "/missing.idx",
        }))
        assert main(["evolve", "--config", str(cfg)]) == 2
        assert "data error" in capsys.readouterr().err

    def test_corrupt_model_file_is_data_error(self, tmp_path, idx_dir):
        bad = tmp_path / "bad.m2n2"
        bad.write_bytes(b"JUNKJUNKJUNKJUNK")
        assert main(["eval", "--model", str(bad),
                     "--images", str(idx_dir / "test-images.idx"),
                     "--labels", str(idx_dir / "test-labels.idx")]) == 2

    def test_missing_required_argument(self, capsys):
        assert main(["pretrain", "--digits", "0-4"]) == 1
