"""
Integration Tests for the Command Line

Tests that drive multidre subcommands end to end through parse_and_dispatch.
"""

import csv

import numpy as np
import pytest

from src.main import EXIT_ABORT, EXIT_INVALID, EXIT_OK
from src.schemas.core import GroupedDataset
from src.utils.data_io import read_json, write_group_files

MEANS = [(1.0, 0.0), (-1.0, 0.5), (0.0, -0.5)]


@pytest.fixture
def trained(run_cli, group_files, tmp_path):
    """A log-linear Multi-LR checkpoint trained on three_gaussians."""
    out = tmp_path / "train"
    code, doc = run_cli(
        "train", "--data", *group_files, "--epochs", "30", "--lr", "0.05", "--full-batch", "--out", out
    )
    assert code == EXIT_OK
    return out, doc


class TestTrain:
    """Integration tests for train."""

    def test_writes_outputs(self, trained):
        """Test the checkpoint, report and run record."""
        out, doc = trained
        assert doc["final_loss"] < doc["initial_loss"]
        assert doc["steps"] == 30
        for name in ("model.json", "train_report.json", "run.json"):
            assert (out / name).is_file()
        record = read_json(out / "run.json")
        assert record["command"] == "train"
        assert record["seed"] == 0
        assert record["config"]["lr"] == pytest.approx(0.05)
        assert record["wall_time"] >= 0.0
        assert "numpy" in record["versions"]

    def test_rerun_from_record(self, run_cli, trained, tmp_path):
        """Test replaying run.json reproduces the checkpoint."""
        out, doc = trained
        again = tmp_path / "again"
        code, redo = run_cli("train", "--config", out / "run.json", "--out", again)
        assert code == EXIT_OK
        assert redo["loss_history"] == doc["loss_history"]
        assert read_json(again / "model.json")["params"] == read_json(out / "model.json")["params"]

    def test_scoring_rule(self, run_cli, group_files, tmp_path):
        """Test training under the Brier rule."""
        code, doc = run_cli(
            "train", "--data", *group_files, "--rule", "brier", "--epochs", "5", "--out", tmp_path / "brier"
        )
        assert code == EXIT_OK
        assert doc["loss"]["rule"] == "brier"

    def test_numerical_abort(self, run_cli, group_files, tmp_path):
        """Test a diverging run exits 2 and reports the step."""
        code, doc = run_cli(
            "train", "--data", *group_files, "--objective", "lsif", "--optimizer", "sgd",
            "--lr", "1e6", "--full-batch", "--epochs", "5", "--out", tmp_path / "boom",
        )
        assert code == EXIT_ABORT
        assert doc["type"] == "NumericalAbortError"
        assert doc["step"] >= 1

    def test_validation_and_patience(self, run_cli, group_files, rng, tmp_path):
        """Test early stopping on held-out group files."""
        held_out = GroupedDataset.from_arrays([np.asarray(mu) + rng.standard_normal((40, 2)) for mu in MEANS])
        validation = write_group_files(held_out, tmp_path / "validation")
        code, doc = run_cli(
            "train", "--data", *group_files, "--validation", *validation, "--patience", "5",
            "--epochs", "400", "--lr", "0.05", "--full-batch", "--out", tmp_path / "early",
        )
        assert code == EXIT_OK
        assert len(doc["validation_history"]) == doc["epochs"]
        assert doc["best_epoch"] is not None
        if doc["stopped_early"]:
            assert doc["epochs"] - doc["best_epoch"] == 5

    def test_patience_without_validation(self, run_cli, group_files, tmp_path):
        """Test --patience alone exits 1."""
        code, doc = run_cli("train", "--data", *group_files, "--patience", "5", "--out", tmp_path / "x")
        assert code == EXIT_INVALID

    def test_missing_data_file(self, run_cli, tmp_path):
        """Test a missing file exits 1 and names the path."""
        missing = tmp_path / "absent.csv"
        code, doc = run_cli("train", "--data", missing, missing, "--out", tmp_path / "x")
        assert code == EXIT_INVALID
        assert doc["path"] == str(missing)

    def test_missing_data_flag(self, run_cli, tmp_path):
        """Test train without --data exits 1."""
        code, doc = run_cli("train", "--out", tmp_path / "x")
        assert code == EXIT_INVALID
        assert "--data" in doc["error"]

    def test_conflicting_loss(self, run_cli, group_files, tmp_path):
        """Test --objective with --rule exits 1."""
        code, doc = run_cli("train", "--data", *group_files, "--objective", "lsif", "--rule", "log")
        assert code == EXIT_INVALID
        assert doc["type"] == "ValidationError"


class TestUsage:
    """Integration tests for argument errors."""

    def test_unknown_flag(self, run_cli):
        """Test an unknown flag exits 1 with a usage error."""
        code, doc = run_cli("train", "--no-such-flag")
        assert code == EXIT_INVALID
        assert doc["type"] == "UsageError"

    def test_unknown_command(self, run_cli):
        """Test an unknown subcommand exits 1."""
        code, _ = run_cli("fit-everything")
        assert code == EXIT_INVALID


class TestEvaluation:
    """Integration tests for commands that read a checkpoint."""

    def test_eval_mae(self, run_cli, trained, tmp_path):
        """Test MAE against the generating Gaussians."""
        out, _ = trained
        means = tmp_path / "means.csv"
        with means.open("w", newline="") as fh:
            csv.writer(fh).writerows(MEANS)
        code, doc = run_cli(
            "eval-mae", "--checkpoint", out / "model.json", "--means", means, "--n-eval", "50",
            "--out", tmp_path / "mae",
        )
        assert code == EXIT_OK
        assert doc["n_eval"] == 150
        assert 0.0 <= doc["mae_clipped"] <= doc["mae"]

    def test_eval_mae_wrong_means(self, run_cli, trained, tmp_path):
        """Test a means file of the wrong shape exits 1."""
        out, _ = trained
        means = tmp_path / "means.csv"
        means.write_text("0,0\n1,1\n")
        code, doc = run_cli("eval-mae", "--checkpoint", out / "model.json", "--means", means)
        assert code == EXIT_INVALID
        assert doc["path"] == str(means)

    def test_divergence(self, run_cli, trained, group_files, tmp_path):
        """Test plug-in and variational estimates are finite."""
        out, _ = trained
        code, doc = run_cli(
            "divergence", "--checkpoint", out / "model.json", "--data", *group_files,
            "--objective", "multilr", "--out", tmp_path / "div",
        )
        assert code == EXIT_OK
        assert np.isfinite(doc["plugin"])
        assert np.isfinite(doc["variational"])
        assert np.isfinite(doc["js_divergence"])
        assert doc["n_pivot"] == 40

    def test_auroc_from_checkpoint(self, run_cli, trained, three_gaussians, tmp_path):
        """Test per-component AUROC from labelled component samples."""
        out, _ = trained
        path = tmp_path / "labelled.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            for label in (1, 2):
                for row in three_gaussians.groups[label - 1]:
                    writer.writerow([label, *row])
        code, doc = run_cli(
            "auroc", "--checkpoint", out / "model.json", "--data", path, "--out", tmp_path / "roc"
        )
        assert code == EXIT_OK
        assert len(doc["per_component"]) == 2
        assert doc["mean_auroc"] > 0.5

    def test_auroc_from_scores(self, run_cli, tmp_path):
        """Test the four-point example from a scores file."""
        path = tmp_path / "scores.csv"
        path.write_text("0.1,0\n0.4,0\n0.35,1\n0.8,1\n")
        code, doc = run_cli("auroc", "--scores", path, "--out", tmp_path / "roc")
        assert code == EXIT_OK
        assert doc["mean_auroc"] == pytest.approx(0.75)


class TestSampling:
    """Integration tests for mis and sir."""

    def test_mis(self, run_cli, trained, group_files, tmp_path):
        """Test an MIS estimate from two proposals."""
        out, _ = trained
        code, doc = run_cli(
            "mis", "--checkpoint", out / "model.json", "--target", "1", "--proposals", "2,3",
            "--data", group_files[1], group_files[2], "--out", tmp_path / "mis",
        )
        assert code == EXIT_OK
        assert np.isfinite(doc["estimate"])
        assert doc["weights"] == [0.5, 0.5]
        assert len(doc["ess"]) == 2

    def test_mis_file_count(self, run_cli, trained, group_files):
        """Test one sample file per proposal is required."""
        out, _ = trained
        code, _ = run_cli(
            "mis", "--checkpoint", out / "model.json", "--target", "1", "--proposals", "2,3",
            "--data", group_files[1],
        )
        assert code == EXIT_INVALID

    def test_sir(self, run_cli, trained, group_files, tmp_path):
        """Test resampled rows are written."""
        out, _ = trained
        dest = tmp_path / "sir"
        code, doc = run_cli(
            "sir", "--checkpoint", out / "model.json", "--target", "1", "--proposal", "3",
            "--data", group_files[2], "--m", "25", "--scheme", "residual", "--out", dest,
        )
        assert code == EXIT_OK
        assert len(doc["indices"]) == 25
        lines = (dest / "resampled.csv").read_text().splitlines()
        assert lines[0] == "x1,x2"
        assert len(lines) == 26


class TestVerification:
    """Integration tests for verify-theory and grad-check."""

    def test_verify_theory(self, run_cli, tmp_path):
        """Test a small identity suite passes."""
        code, doc = run_cli("verify-theory", "--trials", "20", "--out", tmp_path / "v")
        assert code == EXIT_OK
        assert doc["passed"]
        assert doc["trials"] == 20

    def test_grad_check(self, run_cli, tmp_path):
        """Test a small gradient suite passes."""
        code, doc = run_cli("grad-check", "--trials", "1", "--out", tmp_path / "g")
        assert code == EXIT_OK
        assert doc["passed"]
        assert len(doc["results"]) == 9


class TestBenchmarks:
    """Integration tests for the benchmark commands."""

    def test_bench_gaussian(self, run_cli, tmp_path):
        """Test a one-cell benchmark writes its table."""
        dest = tmp_path / "bench"
        code, doc = run_cli(
            "bench-gaussian", "--dims", "2", "--methods", "oracle,random_init", "--seeds", "1",
            "--n-train", "20", "--n-eval", "20", "--out", dest,
        )
        assert code == EXIT_OK
        assert len(doc["cells"]) == 2
        assert (dest / "gaussian_table.csv").read_text().startswith("method,d=2")
        assert doc["metric"] == "log_mae"
        record = read_json(dest / "run.json")
        assert record["config"]["full_batch"] is True
        assert record["config"]["patience"] == 50

    def test_bench_ood(self, run_cli, tmp_path):
        """Test the untrained baseline and the command defaults."""
        dest = tmp_path / "ood"
        code, doc = run_cli(
            "bench-ood", "--methods", "random_init", "--n-train", "50", "--n-eval", "50", "--out", dest
        )
        assert code == EXIT_OK
        assert doc["methods"]["random_init"]["mean_auroc"] == pytest.approx(0.5)
        record = read_json(dest / "run.json")
        assert record["config"]["features"] == "rbf"
        assert record["config"]["epochs"] == 100
