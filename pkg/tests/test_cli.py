import json

import numpy as np
import pytest
from click.testing import CliRunner

from lidarclf.cli import main
from lasfixtures import build_las, point_record_legacy


@pytest.fixture
def runner():
    return CliRunner()


FAST_RUN = ["--synth", "slabs", "-s", "400", "--folds", "3", "--rf-trees", "4",
            "--mlp-epochs", "30", "--ae-epochs", "20", "-k", "4"]


class TestParse:
    def test_las_summary_and_csv(self, runner, tmp_path):
        las = tmp_path / "fix.las"
        las.write_bytes(build_las(0, [
            point_record_legacy(100, 0, 0, classification_byte=2),
            point_record_legacy(200, 0, 0, classification_byte=9),
            point_record_legacy(300, 0, 0, classification_byte=1),
        ]))
        out_csv = tmp_path / "out.csv"
        result = runner.invoke(main, ["parse", str(las), "--classes", "2,9",
                                      "-o", str(out_csv)])
        assert result.exit_code == 0, result.output
        assert "points: 3" in result.output
        assert "retained 2" in result.output
        assert out_csv.exists()

    def test_missing_file(self, runner):
        result = runner.invoke(main, ["parse", "/definitely/not/here.las"])
        assert result.exit_code != 0


class TestSynth:
    def test_writes_csv(self, runner, tmp_path):
        out = tmp_path / "cloud.csv"
        result = runner.invoke(main, ["synth", "--preset", "slabs", "-n", "300",
                                      "--seed", "3", "-o", str(out)])
        assert result.exit_code == 0, result.output
        assert "wrote 300 points" in result.output
        lines = out.read_text().splitlines()
        assert lines[0].startswith("x,y,z,intensity")
        assert len(lines) == 301


class TestRun:
    def test_run_writes_report_and_figures(self, runner, tmp_path):
        out = tmp_path / "report"
        result = runner.invoke(main, ["run", "--framework", "raw",
                                      "--classifier", "rf", *FAST_RUN,
                                      "--seed", "2", "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert "5-fold F1" in result.output or "F1" in result.output
        report = json.loads((out / "report.json").read_text())
        assert report["spec"]["framework"] == "raw"
        assert len(report["cv"]["fold_f1"]) == 3
        assert (out / "confusion_matrix.png").stat().st_size > 0
        assert (out / "fold_scores.csv").read_text().startswith("fold,f1")

    def test_repeat_run_byte_identical_report(self, runner, tmp_path):
        args = ["run", "--framework", "pca", "--classifier", "knn", *FAST_RUN,
                "--seed", "7"]
        r1 = runner.invoke(main, args + ["--out", str(tmp_path / "a")])
        r2 = runner.invoke(main, args + ["--out", str(tmp_path / "b")])
        assert r1.exit_code == 0 and r2.exit_code == 0
        assert (tmp_path / "a" / "report.json").read_bytes() == \
            (tmp_path / "b" / "report.json").read_bytes()

    def test_input_and_synth_conflict(self, runner, tmp_path):
        f = tmp_path / "x.csv"
        f.write_text("x\n")
        result = runner.invoke(main, ["run", "--input", str(f),
                                      "--synth", "slabs"])
        assert result.exit_code != 0

    def test_csv_input_round(self, runner, tmp_path):
        cloud_csv = tmp_path / "cloud.csv"
        r = runner.invoke(main, ["synth", "-n", "400", "--seed", "1",
                                 "-o", str(cloud_csv)])
        assert r.exit_code == 0
        result = runner.invoke(main, ["run", "--input", str(cloud_csv),
                                      "--framework", "raw", "--classifier",
                                      "knn", "-s", "400", "--folds", "3"])
        assert result.exit_code == 0, result.output

    def test_save_model_then_inspect(self, runner, tmp_path):
        mdir = tmp_path / "models"
        result = runner.invoke(main, ["run", "--framework", "pca",
                                      "--classifier", "rf", *FAST_RUN,
                                      "--save-model", str(mdir)])
        assert result.exit_code == 0, result.output
        clf_path = mdir / "classifier.lcm"
        dr_path = mdir / "dimred.lcm"
        assert clf_path.exists() and dr_path.exists()
        info = runner.invoke(main, ["model", "inspect", str(clf_path)])
        assert info.exit_code == 0
        payload = json.loads(info.output)
        assert payload["kind"] == "rf"
        info2 = runner.invoke(main, ["model", "inspect", str(dr_path)])
        assert json.loads(info2.output)["kind"] == "pca"


class TestSuite:
    def test_small_grid(self, runner, tmp_path):
        out = tmp_path / "suite"
        result = runner.invoke(main, ["suite", *FAST_RUN, "--seed", "4",
                                      "--frameworks", "raw,pca",
                                      "--classifiers", "knn",
                                      "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert (out / "grid.csv").exists()
        assert (out / "grid.txt").exists()
        assert (out / "f1_grid.png").stat().st_size > 0
        assert (out / "raw_knn" / "report.json").exists()

    def test_config_file(self, runner, tmp_path):
        cfg = tmp_path / "suite.ini"
        cfg.write_text(
            "[suite]\n"
            "sample_size = 300\n"
            "folds = 3\n"
            "seed = 6\n"
            "frameworks = raw\n"
            "classifiers = knn, rf\n"
            "rf_trees = 3\n"
            "neighbor_k = 4\n"
            "\n"
            "[cell:raw:knn]\n"
            "knn_votes = 1\n")
        result = runner.invoke(main, ["suite", "--config", str(cfg),
                                      "--synth", "slabs"])
        assert result.exit_code == 0, result.output
        assert "raw" in result.output

    def test_failed_cell_sets_exit_code(self, runner, tmp_path):
        cfg = tmp_path / "suite.ini"
        cfg.write_text(
            "[suite]\n"
            "sample_size = 300\n"
            "folds = 3\n"
            "frameworks = raw\n"
            "classifiers = rf\n"
            "\n"
            "[cell:raw:rf]\n"
            "rf_trees = 0\n")
        result = runner.invoke(main, ["suite", "--config", str(cfg),
                                      "--synth", "slabs"])
        assert result.exit_code == 1
        assert "ERROR" in result.output
