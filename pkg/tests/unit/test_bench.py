"""
Tests for Synthetic Benchmarks

Unit tests for the Gaussian log-MAE benchmark, the OOD AUROC benchmark and the
job runner.
"""

import math

import numpy as np
import pytest

from src.exceptions import InvalidInputError
from src.schemas.config import OptimizerConfig, OptimizerMethod
from src.services.bench import (
    GAUSSIAN_OPTIMIZER,
    ORACLE,
    RANDOM_INIT,
    GaussianRatioOracle,
    default_means,
    gaussian_table,
    grid_oracle_auroc,
    mean_auroc,
    ood_oracle_ratios,
    run_gaussian_benchmark,
    run_ood_benchmark,
    sample_gaussian_groups,
    sample_ood_groups,
    true_gaussian_ratio,
)
from src.workers.jobs import run_jobs


class TestGaussianFamily:
    """Tests for the five-Gaussian family."""

    def test_default_means(self):
        """Test mu_5 repeats mu_1 as published."""
        means = default_means(2)
        np.testing.assert_array_equal(means, [[1, 0], [-1, 0], [0, 1], [0, -1], [1, 0]])

    def test_fix_mean5(self):
        """Test fix_mean5 uses e_3."""
        np.testing.assert_array_equal(default_means(3, fix_mean5=True)[4], [0, 0, 1])

    def test_invalid_requests(self):
        """Test unsupported k and dimensions are rejected."""
        with pytest.raises(InvalidInputError):
            default_means(2, k=4)
        with pytest.raises(InvalidInputError):
            default_means(1)
        with pytest.raises(InvalidInputError):
            default_means(2, fix_mean5=True)

    def test_true_ratio(self):
        """Test N(e_1, I) / N(-e_1, I) at (1, 0) is e^2."""
        value = true_gaussian_ratio(np.array([1.0, 0.0]), np.array([-1.0, 0.0]), np.array([1.0, 0.0]))
        assert value == pytest.approx(math.exp(2.0))

    def test_oracle_shapes(self, rng):
        """Test oracle ratios against the pivot mean."""
        oracle = GaussianRatioOracle(default_means(2))
        X = rng.standard_normal((7, 2))
        r = oracle.evaluate(X)
        assert r.shape == (7, 4)
        np.testing.assert_allclose(r[:, 0], 1.0)
        assert oracle(np.zeros(2)).shape == (4,)
        np.testing.assert_allclose(oracle.truth(2, 1, X), r[:, 1] / r[:, 0])

    def test_sampling(self, rng):
        """Test one group per mean with the requested size."""
        data = sample_gaussian_groups(default_means(5), 30, rng)
        assert data.k == 5
        assert data.dim == 5
        assert data.sizes == [30] * 5


class TestGaussianBenchmark:
    """Tests for the log-scale MAE benchmark."""

    def test_oracle_and_training(self):
        """Test the oracle scores zero and training beats the untrained model."""
        report = run_gaussian_benchmark(
            dims=(2,),
            methods=(ORACLE, RANDOM_INIT, "multilr"),
            seeds=(0,),
            n_per_group=200,
            n_eval=100,
            optimizer=OptimizerConfig(step_size=0.05, epochs=100, full_batch=True),
        )
        cells = {cell.method: cell for cell in report.cells}
        assert cells[ORACLE].mean == pytest.approx(0.0, abs=1e-10)
        assert cells[ORACLE].ratio_mean == pytest.approx(0.0, abs=1e-10)
        assert cells["multilr"].mean < cells[RANDOM_INIT].mean
        assert cells["multilr"].ratio_mean < cells[RANDOM_INIT].ratio_mean
        assert all(cell.errors == [] for cell in report.cells)
        assert report.means_family == "verbatim"
        assert report.metric == "log_mae"

    def test_default_optimizer_stops_early(self):
        """Test the default optimizer is full batch with validation early stopping."""
        report = run_gaussian_benchmark(dims=(2,), methods=(ORACLE,), seeds=(0,), n_per_group=10, n_eval=10)
        assert report.config["optimizer"]["full_batch"] is True
        assert report.config["optimizer"]["patience"] == GAUSSIAN_OPTIMIZER.patience

    def test_abort_reported_in_cell(self):
        """Test a diverging method fills its cell with the error and the other rows still come out."""
        report = run_gaussian_benchmark(
            dims=(2,),
            methods=(RANDOM_INIT, "lsif"),
            seeds=(0, 1),
            n_per_group=50,
            n_eval=50,
            optimizer=OptimizerConfig(method=OptimizerMethod.SGD, step_size=1e6, epochs=5, full_batch=True),
        )
        cells = {cell.method: cell for cell in report.cells}
        assert len(cells["lsif"].errors) == 2
        assert "training aborted" in cells["lsif"].errors[0]
        assert cells["lsif"].values == []
        assert math.isnan(cells["lsif"].mean)
        assert cells["lsif"].formatted() == "aborted"
        assert len(cells[RANDOM_INIT].values) == 2
        _, rows = gaussian_table(report)
        assert rows[1] == ["lsif", "aborted"]

    def test_table(self):
        """Test the method x dimension table layout."""
        report = run_gaussian_benchmark(
            dims=(2, 3), methods=(ORACLE, RANDOM_INIT), seeds=(0, 1), n_per_group=20, n_eval=20
        )
        header, rows = gaussian_table(report)
        assert header == ["method", "d=2", "d=3"]
        assert [row[0] for row in rows] == [ORACLE, RANDOM_INIT]
        assert all("±" in cell for row in rows for cell in row[1:])
        assert len(report.cells) == 4
        assert all(len(cell.values) == 2 for cell in report.cells)

    def test_explicit_means(self):
        """Test explicit means replace the default family."""
        report = run_gaussian_benchmark(
            methods=(ORACLE,), seeds=(0,), n_per_group=10, n_eval=10, means=np.array([[0.0], [1.0], [2.0]])
        )
        assert report.means_family == "explicit"
        assert report.config["dims"] == [1]

    def test_deterministic(self):
        """Test the same seeds give the same values."""
        kwargs = dict(dims=(2,), methods=(RANDOM_INIT,), seeds=(3,), n_per_group=20, n_eval=20)
        assert run_gaussian_benchmark(**kwargs).cells[0].values == run_gaussian_benchmark(**kwargs).cells[0].values

    @pytest.mark.slow
    def test_random_init_level(self):
        """Test the untrained model's log-MAE sits at its expected value of about 1.44."""
        report = run_gaussian_benchmark(dims=(2, 5), methods=(RANDOM_INIT,), seeds=(0, 1, 2))
        for cell in report.cells:
            assert 1.4 <= cell.mean <= 2.1

    @pytest.mark.slow
    def test_trained_accuracy_and_ordering(self):
        """Test trained methods reach their limits at d=2 and MultiLR and Brier rank with the best."""
        methods = (RANDOM_INIT, "multilr", "kliep", "lsif", "quadratic", "logsumexp", "brier")
        report = run_gaussian_benchmark(dims=(2,), methods=methods, seeds=(0, 1, 2))
        mae = {cell.method: cell.mean for cell in report.cells}
        assert all(cell.errors == [] for cell in report.cells)

        assert 1.4 <= mae[RANDOM_INIT] <= 2.1
        limits = {"multilr": 0.15, "kliep": 0.20, "lsif": 0.25}
        for method, limit in limits.items():
            assert mae[method] <= limit
            assert 5 * mae[method] <= mae[RANDOM_INIT]

        for method in ("multilr", "brier"):
            assert mae[method] <= 1.2 * mae["logsumexp"]
            assert mae[method] <= 1.2 * mae["quadratic"]


class TestOodBenchmark:
    """Tests for the out-of-distribution AUROC benchmark."""

    def test_sampling(self, rng):
        """Test the mixture is the last group and labels are 1-based."""
        data, labels = sample_ood_groups([-3.0, 0.0, 3.0], [0.2, 0.3, 0.5], 50, rng)
        assert data.k == 4
        assert data.sizes == [50] * 4
        assert set(np.unique(labels)) <= {1, 2, 3}

    def test_oracle_ratios_average_to_one(self, rng):
        """Test sum_i w_i p_i / mixture = 1 at every point."""
        weights = np.array([0.2, 0.3, 0.5])
        r = ood_oracle_ratios([-3.0, 0.0, 3.0], weights)(rng.standard_normal((20, 1)) * 3)
        np.testing.assert_allclose(r @ weights, 1.0)

    def test_grid_oracle(self):
        """Test the population AUROC of the true ratios is high."""
        report = grid_oracle_auroc([-3.0, 0.0, 3.0], [1 / 3] * 3)
        assert report.mean_auroc >= 0.95
        assert all(0.5 < a <= 1.0 for a in report.per_component)

    def test_constant_scores(self):
        """Test tied scores give AUROC 0.5."""
        labels = np.array([1, 2, 3, 1, 2, 3])
        report = mean_auroc(np.ones((6, 3)), labels)
        assert report.mean_auroc == pytest.approx(0.5)

    def test_untrained_model(self):
        """Test the untrained model scores 0.5 and the sample oracle is high."""
        report = run_ood_benchmark(n=100, n_eval=300, methods=(RANDOM_INIT,))
        assert report.methods[RANDOM_INIT].mean_auroc == pytest.approx(0.5)
        assert report.oracle_sample_auroc.mean_auroc >= 0.9
        assert report.component_means == [-3.0, 0.0, 3.0]

    def test_invalid_weights(self):
        """Test mixture weights must be positive and sum to one."""
        with pytest.raises(InvalidInputError):
            run_ood_benchmark(weights=[0.5, 0.5], methods=(RANDOM_INIT,))
        with pytest.raises(InvalidInputError):
            run_ood_benchmark(weights=[0.5, 0.6, -0.1], methods=(RANDOM_INIT,))

    @pytest.mark.slow
    def test_trained_multilr(self):
        """Test a trained MultiLR model recognises components and the untrained one guesses."""
        report = run_ood_benchmark(methods=(RANDOM_INIT, "multilr"))
        assert report.methods["multilr"].mean_auroc >= 0.9
        assert 0.45 <= report.methods[RANDOM_INIT].mean_auroc <= 0.55


class TestJobRunner:
    """Tests for the parallel job runner."""

    def test_inline(self):
        """Test one worker runs jobs in order."""
        assert run_jobs(len, [{"a": 1}, {"a": 1, "b": 2}], n_jobs=1) == [1, 2]

    def test_processes_keep_order(self):
        """Test worker processes return results in submission order."""
        jobs = [{str(i): i for i in range(n)} for n in (3, 1, 2, 5)]
        assert run_jobs(len, jobs, n_jobs=2) == [3, 1, 2, 5]
