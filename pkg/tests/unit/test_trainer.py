"""
Tests for the Training Service

Unit tests for optimizers, minibatch sampling, training and gradient checks.
"""

import numpy as np
import pytest

from src.exceptions import InvalidInputError, NumericalAbortError
from src.models import LogLinearModel
from src.schemas.config import OptimizerConfig, OptimizerMethod
from src.schemas.core import GroupedDataset, Prior
from src.services.bench import default_means, sample_gaussian_groups
from src.services.objectives import ConvexObjective, make_objective
from src.services.optimizers import SGD, Adam, make_optimizer
from src.services.scoring import ScoringRule
from src.services.trainer import (
    MinibatchSampler,
    gradient_check,
    loss_and_gradient,
    make_loss,
    relative_error,
    run_gradient_suite,
    train,
)
from src.utils.numerics import guards, safe_log

ALL_LOSSES = ["multilr", "lsif", "kliep", "power", "quadratic", "logsumexp", "log", "brier", "pseudospherical"]


class TestMakeLoss:
    """Tests for loss construction by name."""

    def test_objectives_and_rules(self):
        """Test names resolve to the right loss family."""
        assert isinstance(make_loss("kliep", 3), ConvexObjective)
        assert isinstance(make_loss("brier", 3), ScoringRule)

    def test_alpha_routed(self):
        """Test alpha reaches Power and the pseudo-spherical rule."""
        assert make_loss("power", 3, alpha=2.5).alpha == 2.5
        assert make_loss("pseudospherical", 3, alpha=2.5).alpha == 2.5

    def test_cap_routed(self):
        """Test the loss cap reaches scoring rules."""
        assert make_loss("log", 3, cap=10.0).cap == 10.0

    def test_unknown(self):
        """Test unknown names are rejected."""
        with pytest.raises(InvalidInputError):
            make_loss("hinge", 3)


class TestOptimizers:
    """Tests for SGD and Adam."""

    def test_sgd_step(self):
        """Test theta - lr * grad."""
        theta = SGD(0.5).step(np.array([1.0, 2.0]), np.array([2.0, -2.0]))
        np.testing.assert_allclose(theta, [0.0, 3.0])

    def test_adam_first_step(self):
        """Test the first Adam step moves each coordinate by about lr."""
        theta = Adam(lr=0.1).step(np.zeros(2), np.array([2.0, -3.0]))
        np.testing.assert_allclose(theta, [-0.1, 0.1], rtol=1e-6)

    def test_adam_keeps_state(self):
        """Test moments accumulate across steps."""
        opt = Adam(lr=0.1)
        theta = np.zeros(1)
        for _ in range(3):
            theta = opt.step(theta, np.array([1.0]))
        assert opt.t == 3
        np.testing.assert_allclose(theta, [-0.3], rtol=1e-6)

    def test_factory(self):
        """Test the configured method is built."""
        assert isinstance(make_optimizer(OptimizerConfig(method=OptimizerMethod.SGD)), SGD)
        assert isinstance(make_optimizer(OptimizerConfig()), Adam)


class TestMinibatchSampler:
    """Tests for per-group minibatch draws."""

    def test_steps_per_epoch(self, rng):
        """Test ceil(max size / batch)."""
        assert MinibatchSampler([5, 12], 4, rng).steps_per_epoch == 3
        assert MinibatchSampler([5, 3], 10, rng).steps_per_epoch == 1

    def test_epoch_covers_group(self, rng):
        """Test one pass draws every index of the largest group once."""
        sampler = MinibatchSampler([5, 12], 4, rng)
        big = np.concatenate([batch[1] for batch in sampler.epoch()])
        assert sorted(big.tolist()) == list(range(12))

    def test_fresh_permutation_every_epoch(self, rng):
        """Test no repeats within an epoch and a new order in the next one."""
        sampler = MinibatchSampler([2000, 500], 128, rng)
        orders = []
        for _ in range(3):
            batches = list(sampler.epoch())
            assert len(batches) == 16
            big = np.concatenate([b[0] for b in batches])
            assert sorted(big.tolist()) == list(range(2000))
            small = np.concatenate([b[1] for b in batches])
            assert small.size == 16 * 128
            for start in range(0, 1500 + 1, 500):
                assert sorted(small[start:start + 500].tolist()) == list(range(500))
            orders.append(big)
        assert not np.array_equal(orders[0], orders[1])
        assert not np.array_equal(orders[1], orders[2])

    def test_small_group_wraps(self, rng):
        """Test small groups reshuffle and keep the batch size."""
        sampler = MinibatchSampler([5, 12], 4, rng)
        for batch in sampler.epoch():
            small = batch[0]
            assert small.size == 4
            assert np.all((small >= 0) & (small < 5))

    def test_batch_larger_than_group(self, rng):
        """Test a batch never exceeds the group size."""
        sampler = MinibatchSampler([3, 8], 5, rng)
        assert [idx.size for idx in next(sampler.epoch())] == [3, 5]


class TestTrain:
    """Tests for the training loop."""

    def test_reduces_loss(self, three_gaussians):
        """Test training lowers the full-dataset loss."""
        cfg = OptimizerConfig(step_size=0.05, epochs=30, full_batch=True)
        model, report = train(make_objective("kliep", 3), LogLinearModel(2, 3), three_gaussians, cfg)
        assert report.final_loss < report.initial_loss
        assert report.steps == 30
        assert len(report.loss_history) == 30
        assert "kliep_normalization" in report.diagnostics

    def test_rule_route(self, three_gaussians):
        """Test training under a scoring rule."""
        cfg = OptimizerConfig(step_size=0.05, epochs=20, minibatch_size=16)
        _, report = train(make_loss("brier", 3), LogLinearModel(2, 3), three_gaussians, cfg)
        assert report.final_loss < report.initial_loss
        assert report.steps == 20 * 3

    def test_input_model_unchanged(self, three_gaussians):
        """Test the initial model is copied."""
        model = LogLinearModel(2, 3)
        cfg = OptimizerConfig(step_size=0.05, epochs=3, full_batch=True)
        trained, _ = train(make_objective("lsif", 3), model, three_gaussians, cfg)
        assert np.all(model.get_params() == 0.0)
        assert np.any(trained.get_params() != 0.0)

    def test_deterministic(self, three_gaussians):
        """Test the same configuration gives the same parameters."""
        cfg = OptimizerConfig(step_size=0.01, epochs=4, minibatch_size=8, seed=3)
        a, _ = train(make_objective("power", 3), LogLinearModel(2, 3), three_gaussians, cfg)
        b, _ = train(make_objective("power", 3), LogLinearModel(2, 3), three_gaussians, cfg)
        np.testing.assert_array_equal(a.get_params(), b.get_params())

    def test_on_epoch_callback(self, three_gaussians):
        """Test the callback sees every epoch."""
        seen = []
        cfg = OptimizerConfig(epochs=4, full_batch=True)
        train(make_objective("lsif", 3), LogLinearModel(2, 3), three_gaussians, cfg, lambda e, l: seen.append(e))
        assert seen == [1, 2, 3, 4]

    def test_zero_epochs(self, three_gaussians):
        """Test zero epochs returns the initial model."""
        model, report = train(make_objective("lsif", 3), LogLinearModel(2, 3), three_gaussians, OptimizerConfig(epochs=0))
        assert report.steps == 0
        assert report.final_loss == report.initial_loss

    def test_divergence_aborts(self, three_gaussians):
        """Test a huge step size aborts with the step number."""
        cfg = OptimizerConfig(method=OptimizerMethod.SGD, step_size=1e6, epochs=5, full_batch=True)
        with pytest.raises(NumericalAbortError) as excinfo:
            train(make_objective("lsif", 3), LogLinearModel(2, 3), three_gaussians, cfg)
        assert excinfo.value.step >= 1

    def test_shape_mismatch(self, three_gaussians):
        """Test the model must fit the dataset."""
        with pytest.raises(InvalidInputError):
            train(make_objective("lsif", 3), LogLinearModel(3, 3), three_gaussians, OptimizerConfig(epochs=1))

    def test_log_rule_follows_multilr(self, three_gaussians):
        """Test the log-score and MultiLR routes take the same steps."""
        for cfg in (
            OptimizerConfig(method=OptimizerMethod.SGD, step_size=0.1, epochs=40, full_batch=True),
            OptimizerConfig(step_size=0.05, epochs=10, minibatch_size=16, seed=4),
        ):
            a, rep_a = train(make_loss("log", 3), LogLinearModel(2, 3), three_gaussians, cfg)
            b, rep_b = train(make_loss("multilr", 3), LogLinearModel(2, 3), three_gaussians, cfg)
            np.testing.assert_allclose(rep_a.loss_history, rep_b.loss_history, rtol=0, atol=1e-8)
            np.testing.assert_allclose(a.get_params(), b.get_params(), rtol=0, atol=1e-8)

    @pytest.mark.parametrize("name", ALL_LOSSES)
    def test_full_batch_descent(self, name):
        """Test small full-batch gradient steps never raise the loss on the d=2 Gaussian task."""
        data = sample_gaussian_groups(default_means(2), 300, np.random.default_rng(0))
        cfg = OptimizerConfig(method=OptimizerMethod.SGD, step_size=1e-3, epochs=40, full_batch=True)
        _, report = train(make_loss(name, 5), LogLinearModel(2, 5), data, cfg)
        losses = [report.initial_loss] + report.loss_history
        assert all(after <= before + 1e-9 for before, after in zip(losses, losses[1:]))

    def test_lsif_identical_groups(self, rng):
        """Test LSIF on two samples of one distribution learns r close to 1."""
        data = GroupedDataset.from_arrays([rng.standard_normal((2000, 2)) for _ in range(2)])
        cfg = OptimizerConfig(method=OptimizerMethod.SGD, step_size=0.1, epochs=200, full_batch=True)
        model, _ = train(make_objective("lsif", 2), LogLinearModel(2, 2), data, cfg)
        held_out = rng.standard_normal((2000, 2))
        assert np.median(np.abs(model.evaluate(held_out)[:, 0] - 1.0)) <= 0.1

    def test_guards_counted_per_run(self, three_gaussians):
        """Test guard counts from earlier work do not leak into a report."""
        safe_log(np.zeros(4))
        cfg = OptimizerConfig(step_size=0.05, epochs=2, full_batch=True)
        _, report = train(make_objective("kliep", 3), LogLinearModel(2, 3), three_gaussians, cfg)
        assert report.diagnostics["guards"] == {}
        assert guards.get("log_clamp") == 4


class TestValidation:
    """Tests for validation tracking and early stopping."""

    def test_best_epoch_restored(self, rng):
        """Test the returned model is the one with the lowest validation loss."""
        data = GroupedDataset.from_arrays([rng.standard_normal((50, 1)) for _ in range(2)])
        validation = GroupedDataset.from_arrays([rng.standard_normal((500, 1)) for _ in range(2)])
        cfg = OptimizerConfig(step_size=0.05, epochs=60, full_batch=True)
        model, report = train(make_objective("lsif", 2), LogLinearModel(1, 2), data, cfg, validation=validation)
        assert len(report.validation_history) == 60
        curve = [_unit_loss(validation)] + report.validation_history
        assert report.best_epoch == int(np.argmin(curve))
        val_loss, _ = loss_and_gradient(make_objective("lsif", 2), model, validation)
        assert val_loss == pytest.approx(min(curve), rel=1e-12)
        assert not report.stopped_early

    def test_patience_stops(self, rng):
        """Test training stops once validation stalls for `patience` epochs."""
        data = GroupedDataset.from_arrays([rng.standard_normal((50, 1)) for _ in range(2)])
        validation = GroupedDataset.from_arrays([rng.standard_normal((500, 1)) for _ in range(2)])
        cfg = OptimizerConfig(step_size=0.05, epochs=500, full_batch=True, patience=5)
        _, report = train(make_objective("lsif", 2), LogLinearModel(1, 2), data, cfg, validation=validation)
        assert report.stopped_early
        assert report.epochs == len(report.loss_history) < 500
        assert report.epochs - report.best_epoch == 5

    def test_patience_needs_validation(self, three_gaussians):
        """Test patience without a validation sample is rejected."""
        with pytest.raises(InvalidInputError):
            train(make_objective("lsif", 3), LogLinearModel(2, 3), three_gaussians, OptimizerConfig(patience=3))

    def test_validation_shape(self, three_gaussians, two_gaussians):
        """Test the validation sample must have the training groups."""
        with pytest.raises(InvalidInputError):
            train(make_objective("lsif", 3), LogLinearModel(2, 3), three_gaussians, OptimizerConfig(epochs=1),
                  validation=two_gaussians)

    def test_no_validation_fields(self, three_gaussians):
        """Test reports without validation leave the fields empty."""
        _, report = train(make_objective("lsif", 3), LogLinearModel(2, 3), three_gaussians,
                          OptimizerConfig(epochs=2, full_batch=True))
        assert report.validation_history == []
        assert report.best_epoch is None


def _unit_loss(dataset: GroupedDataset) -> float:
    loss, _ = loss_and_gradient(make_objective("lsif", 2), LogLinearModel(dataset.dim, 2), dataset)
    return loss


class TestGradientCheck:
    """Tests for finite-difference gradient checks."""

    def test_relative_error(self):
        """Test the relative error with and without the floor."""
        err = relative_error(np.array([1.0, 0.0, 100.0]), np.array([1.0001, 1e-3, 100.0]))
        np.testing.assert_allclose(err, [1e-4 / 1.0001, 0.1, 0.0], rtol=1e-6)

    @pytest.mark.parametrize("name", ALL_LOSSES)
    def test_loglinear_gradients(self, name, three_gaussians, perturbed_loglinear):
        """Test analytic gradients for every loss with a log-linear model."""
        loss = make_loss(name, 3)
        assert gradient_check(loss, perturbed_loglinear(2, 3), three_gaussians) <= 1e-4

    @pytest.mark.parametrize("name", ALL_LOSSES)
    def test_mlp_gradients(self, name, three_gaussians, perturbed_mlp):
        """Test analytic gradients for every loss with an MLP."""
        loss = make_loss(name, 3)
        assert gradient_check(loss, perturbed_mlp(2, 3), three_gaussians) <= 1e-4

    def test_two_groups(self, two_gaussians, perturbed_loglinear):
        """Test gradients with k = 2 and a nonuniform MultiLR prior."""
        loss = make_objective("multilr", 2, prior=Prior(weights=[0.3, 0.7]))
        assert gradient_check(loss, perturbed_loglinear(1, 2), two_gaussians) <= 1e-4

    def test_detects_wrong_gradient(self, three_gaussians, perturbed_loglinear):
        """Test a wrong analytic gradient is reported."""
        model = perturbed_loglinear(2, 3)
        err = gradient_check(
            make_objective("lsif", 3),
            model,
            three_gaussians,
            gradient_fn=lambda m, batch: np.ones(m.n_params),
        )
        assert err > 1e-2

    def test_epsilon_range(self, three_gaussians, perturbed_loglinear):
        """Test epsilon must lie in (0, 1e-2]."""
        model = perturbed_loglinear(2, 3)
        for eps in (0.0, 0.1):
            with pytest.raises(InvalidInputError):
                gradient_check(make_objective("lsif", 3), model, three_gaussians, epsilon=eps)

    def test_model_not_modified(self, three_gaussians, perturbed_loglinear):
        """Test the checked model keeps its parameters."""
        model = perturbed_loglinear(2, 3)
        theta = model.get_params()
        gradient_check(make_objective("kliep", 3), model, three_gaussians)
        np.testing.assert_array_equal(model.get_params(), theta)

    def test_suite(self):
        """Test the random-configuration suite passes."""
        report = run_gradient_suite(trials=2, seed=0)
        assert report.passed
        assert len(report.results) == 9 * 2
