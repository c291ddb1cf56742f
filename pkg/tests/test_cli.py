# -*- coding: utf-8 -*-

"""
命令行端到端测试：在临时目录中调用 main()，检查退出码、标准输出与结果文件
"""

import json
import os

import numpy as np
import pandas as pd
import pytest

from main import main
from src.data_io import load_model


def write_ucr_dir(root, name="Toy", length=8, seed=0):
    """两类（常数0 / 常数1 + 抖动）的小UCR数据集"""
    gen = np.random.default_rng(seed)
    path = root / name
    path.mkdir(parents=True)
    for split, n in (("TRAIN", 4), ("TEST", 3)):
        lines = []
        for label, level in ((1, 0.0), (2, 1.0)):
            for _ in range(n):
                values = level + 0.05 * gen.standard_normal(length)
                lines.append("\t".join([str(label)] + [repr(float(v)) for v in values]))
        (path / f"{name}_{split}.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


def last_line(capsys):
    return capsys.readouterr().out.strip().splitlines()[-1]


@pytest.fixture
def synth_dir(tmp_path):
    out = str(tmp_path / "synth")
    code = main(["synth-gen", "--k", "3", "--m", "2", "--tau-true", "4", "--segments", "2:3",
                 "--duration", "4:6", "--n-train", "10", "--n-test", "4", "--seed", "3", "--out", out])
    assert code == 0
    return out


@pytest.fixture
def seg_model(tmp_path, synth_dir):
    path = str(tmp_path / "seg.model")
    code = main(["train-seg", "--data", os.path.join(synth_dir, "train.jsonl"), "--tau-p", "2",
                 "--steps", "3", "--batch", "4", "--q", "3", "--encoder", "affine", "--seed", "1",
                 "--history-csv", str(tmp_path / "history.csv"), "--out", path])
    assert code == 0
    return path


class TestSegmentationCommands:

    def test_synth_gen_writes_files(self, synth_dir, capsys):
        for name in ("train.jsonl", "test.jsonl", "templates.json"):
            assert os.path.exists(os.path.join(synth_dir, name))
        with open(os.path.join(synth_dir, "templates.json"), encoding="utf-8") as f:
            assert json.load(f)["config"]["segments"] == [2, 3]

    def test_train_seg(self, seg_model, tmp_path):
        model = load_model(seg_model)
        assert model.mode == "segmentation" and model.encoder.kind == "affine"
        assert model.config["steps"] == 3
        history = pd.read_csv(tmp_path / "history.csv")
        assert list(history.columns) == ["step", "loss", "hinge", "dist"]

    @pytest.mark.parametrize("setting", ["segmentation", "alignment"])
    def test_eval_seg(self, seg_model, synth_dir, tmp_path, capsys, setting):
        out_dir = tmp_path / f"eval_{setting}"
        capsys.readouterr()
        code = main(["eval-seg", "--model", seg_model, "--data", os.path.join(synth_dir, "test.jsonl"),
                     "--setting", setting, "--out-dir", str(out_dir)])
        assert code == 0
        assert last_line(capsys).startswith("f_acc=")
        metrics = json.loads((out_dir / "metrics.json").read_text(encoding="utf-8"))
        assert metrics["setting"] == setting and metrics["videos"] == 4
        labels = (out_dir / "test_0000.txt").read_text(encoding="utf-8").split()
        assert all(1 <= int(v) <= 3 for v in labels)

    def test_summarize(self, seg_model, synth_dir, tmp_path, capsys):
        out_dir = tmp_path / "summary"
        capsys.readouterr()
        code = main(["summarize", "--model", seg_model, "--data", os.path.join(synth_dir, "test.jsonl"),
                     "--out-dir", str(out_dir)])
        assert code == 0
        assert last_line(capsys).startswith("matching_rate=")
        assert (out_dir / "summary_metrics.json").exists()
        keys = [int(v) for v in (out_dir / "test_0001.summary.txt").read_text(encoding="utf-8").split()]
        assert keys == sorted(keys)

    def test_wrong_model_mode(self, tmp_path, synth_dir):
        data = write_ucr_dir(tmp_path)
        model = str(tmp_path / "tsc.model")
        assert main(["train-tsc", "--data", data, "--epochs", "1", "--out", model]) == 0
        assert main(["eval-seg", "--model", model, "--data", os.path.join(synth_dir, "test.jsonl")]) == 2


class TestTscCommands:

    def test_train_and_eval(self, tmp_path, capsys):
        data = write_ucr_dir(tmp_path)
        model = str(tmp_path / "toy.model")
        code = main(["train-tsc", "--data", data, "--epochs", "3", "--batch-fraction", "0.5",
                     "--lambda", "0.1", "--lr", "0.01", "--seed", "2", "--out", model])
        assert code == 0
        out = capsys.readouterr().out
        assert "train_accuracy=" in out and f"model={model}" in out

        assert main(["eval-tsc", "--model", model, "--data", data]) == 0
        accuracy = float(last_line(capsys).split("=")[1])
        assert 0.0 <= accuracy <= 1.0

    def test_train_with_lr_cv_and_band(self, tmp_path):
        data = write_ucr_dir(tmp_path)
        model = str(tmp_path / "cv.model")
        assert main(["train-tsc", "--data", data, "--epochs", "1", "--lr", "cv", "--band", "2",
                     "--out", model]) == 0
        saved = load_model(model)
        assert saved.config["learning_rate"] in (1e-3, 1e-2, 1e-1)
        assert saved.config["band"]["width"] == 2

    @pytest.mark.parametrize("method", ["ed", "dtw", "dtww", "dba"])
    def test_baseline(self, tmp_path, capsys, method):
        data = write_ucr_dir(tmp_path)
        assert main(["baseline", "--data", data, "--method", method]) == 0
        assert float(last_line(capsys).split("=")[1]) == 1.0

    def test_window_needs_dtww(self, tmp_path):
        data = write_ucr_dir(tmp_path)
        assert main(["baseline", "--data", data, "--method", "ed", "--window", "2"]) == 1

    def test_report_from_csv(self, tmp_path, capsys):
        table = tmp_path / "acc.csv"
        table.write_text("dataset,A,B\nd1,0.9,0.8\nd2,0.7,0.75\n", encoding="utf-8")
        out = tmp_path / "report.csv"
        assert main(["report", "--table", str(table), "--out", str(out)]) == 0
        frame = pd.read_csv(out, index_col=0)
        assert list(frame.columns) == ["mean_rank", "A", "B"]
        assert frame.loc["A", "mean_rank"] == pytest.approx(1.5)
        assert frame.loc["A", "B"] == pytest.approx(0.5)
        assert "mean_rank" in capsys.readouterr().out

    def test_report_from_xlsx(self, tmp_path, capsys):
        table = tmp_path / "acc.xlsx"
        frame = pd.DataFrame({"A": [0.9, 0.7, 0.8], "B": [0.8, 0.75, 0.8]},
                             index=pd.Index(["d1", "d2", "d3"], name="dataset"))
        frame.to_excel(table)
        assert main(["report", "--table", str(table)]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "method,mean_rank,A,B"
        assert lines[1].startswith("A,1.500000,1.000000,0.666667")

    def test_report_rejects_other_formats(self, tmp_path):
        table = tmp_path / "acc.txt"
        table.write_text("x", encoding="utf-8")
        assert main(["report", "--table", str(table)]) == 2

    def test_benchmark(self, tmp_path, capsys):
        root = tmp_path / "ucr"
        write_ucr_dir(root, "Alpha", seed=1)
        write_ucr_dir(root, "Beta", seed=2)
        out_dir = tmp_path / "bench"
        code = main(["benchmark", "--data-root", str(root), "--epochs", "1", "--out-dir", str(out_dir)])
        assert code == 0
        stdout = capsys.readouterr().out
        assert "Alpha" in stdout and "Beta" in stdout and "DP-DTW" in stdout
        report = json.loads((out_dir / "benchmark_report.json").read_text(encoding="utf-8"))
        assert set(report["mean_ranks"]) == {"DP-DTW", "ED", "DTW", "DTW(W)", "DBA"}
        assert (out_dir / "Alpha.json").exists()


class TestExitCodes:

    def test_missing_data_is_data_error(self, tmp_path):
        assert main(["train-tsc", "--data", str(tmp_path / "nope"), "--out", str(tmp_path / "m")]) == 2

    def test_invalid_option_value(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["train-tsc", "--data", str(tmp_path), "--lambda", "-1", "--out", "m"])
        assert exc.value.code == 1

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as exc:
            main(["fly"])
        assert exc.value.code == 1

    def test_missing_required_option(self):
        with pytest.raises(SystemExit) as exc:
            main(["eval-tsc", "--model", "m"])
        assert exc.value.code == 1

    def test_corrupt_model(self, tmp_path):
        model = tmp_path / "bad.model"
        model.write_text('{"mode": "tsc"}\n', encoding="utf-8")
        data = write_ucr_dir(tmp_path)
        assert main(["eval-tsc", "--model", str(model), "--data", data]) == 2

    def test_run_config_file_with_cli_override(self, tmp_path):
        data = write_ucr_dir(tmp_path)
        config_file = tmp_path / "run.json"
        config_file.write_text(json.dumps({"seed": 4, "tsc": {"epochs": 2, "lam": 0.5}}), encoding="utf-8")
        model = str(tmp_path / "m.model")
        assert main(["train-tsc", "--data", data, "--config", str(config_file), "--lambda", "0.2",
                     "--out", model]) == 0
        saved = load_model(model).config
        assert (saved["epochs"], saved["lam"], saved["seed"]) == (2, 0.2, 4)

    def test_missing_run_config(self, tmp_path):
        data = write_ucr_dir(tmp_path)
        assert main(["train-tsc", "--data", data, "--config", str(tmp_path / "none.json"),
                     "--out", str(tmp_path / "m")]) == 2


def write_background_corpus(path):
    """转录只含类别 1、2，真实标签中夹有背景类 3"""
    gen = np.random.default_rng(5)
    records = []
    for i, (transcript, labels) in enumerate([([1, 2], [3, 1, 1, 2, 2, 3]),
                                              ([2, 1], [2, 2, 3, 3, 1, 1]),
                                              ([1, 2], [1, 1, 1, 2, 2, 2])]):
        frames = (np.array(labels, dtype=float)[:, None] + 0.1 * gen.standard_normal((6, 2))).tolist()
        records.append({"id": f"bg_{i}", "frames": frames, "transcript": transcript, "labels": labels})
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")
    return str(path)


class TestBackgroundLabels:

    @pytest.fixture
    def background_model(self, tmp_path):
        data = write_background_corpus(tmp_path / "bg.jsonl")
        model = str(tmp_path / "bg.model")
        assert main(["train-seg", "--data", data, "--tau-p", "2", "--steps", "2", "--batch", "3",
                     "--q", "2", "--background", "3", "--out", model]) == 0
        return data, model

    def test_model_covers_transcript_classes_only(self, background_model):
        _, model = background_model
        assert load_model(model).num_classes == 2

    @pytest.mark.parametrize("setting", ["alignment", "segmentation"])
    def test_eval_accepts_background_labels(self, background_model, tmp_path, capsys, setting):
        data, model = background_model
        out_dir = tmp_path / "pred"
        assert main(["eval-seg", "--model", model, "--data", data, "--setting", setting,
                     "--out-dir", str(out_dir)]) == 0
        assert last_line(capsys).startswith("f_acc=")
        labels = (out_dir / "bg_0.txt").read_text(encoding="utf-8").split()
        assert set(labels) <= {"1", "2"}

    def test_summarize_accepts_background_labels(self, background_model, capsys):
        data, model = background_model
        assert main(["summarize", "--model", model, "--data", data]) == 0
        assert last_line(capsys).startswith("matching_rate=")

    def test_background_still_out_of_range_in_transcript(self, background_model, tmp_path):
        _, model = background_model
        bad = tmp_path / "bad.jsonl"
        bad.write_text(json.dumps({"id": "x", "frames": [[0.0, 0.0]] * 3, "transcript": [1, 3]}) + "\n",
                       encoding="utf-8")
        assert main(["eval-seg", "--model", model, "--data", str(bad), "--setting", "alignment"]) == 2


class TestOutputFiles:

    def test_outputs_leave_no_temp_files(self, seg_model, synth_dir, tmp_path):
        out_dir = tmp_path / "pred"
        assert main(["eval-seg", "--model", seg_model, "--data", os.path.join(synth_dir, "test.jsonl"),
                     "--out-dir", str(out_dir)]) == 0
        assert main(["summarize", "--model", seg_model, "--data", os.path.join(synth_dir, "test.jsonl"),
                     "--out-dir", str(out_dir)]) == 0
        names = sorted(os.listdir(out_dir))
        assert not [n for n in names if n.startswith(".tmp_")]
        assert "test_0000.txt" in names and "test_0000.summary.txt" in names

    def test_unwritable_log_file_is_data_error(self, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("", encoding="utf-8")
        data = write_ucr_dir(tmp_path)
        assert main(["baseline", "--data", data, "--method", "ed",
                     "--log-file", str(blocker / "run.log")]) == 2

    def test_dump_config(self, tmp_path):
        data = write_ucr_dir(tmp_path)
        config_file = tmp_path / "run.json"
        config_file.write_text(json.dumps({"tsc": {"epochs": 1}}), encoding="utf-8")
        dumped = tmp_path / "dumped.json"
        assert main(["train-tsc", "--data", data, "--config", str(config_file), "--seed", "7",
                     "--dump-config", str(dumped), "--out", str(tmp_path / "m.model")]) == 0
        saved = json.loads(dumped.read_text(encoding="utf-8"))
        assert saved["seed"] == 7 and saved["tsc"] == {"epochs": 1}
