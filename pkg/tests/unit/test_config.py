"""
Tests for Settings

Unit tests for settings sources, precedence and validation.
"""

import pytest
from pydantic import ValidationError

from src.cli.common import apply_command_defaults
from src.config import Settings, load_settings
from src.exceptions import DataFileError
from src.schemas.config import ModelKind, OptimizerMethod
from src.utils.data_io import write_json


class TestDefaults:
    """Tests for values with no source set."""

    def test_defaults(self):
        """Test the documented defaults."""
        settings = load_settings()
        assert settings.lr == pytest.approx(1e-3)
        assert settings.model == ModelKind.LOGLINEAR
        assert settings.optimizer == OptimizerMethod.ADAM
        assert settings.loss_name == "multilr"
        assert settings.dims == [2, 5, 10]
        assert settings.seed_list == [0, 1, 2]

    def test_optimizer_config(self):
        """Test flags map onto the optimizer configuration."""
        cfg = Settings(lr=0.05, batch=16, epochs=7, seed=4, full_batch=True).optimizer_config()
        assert cfg.step_size == pytest.approx(0.05)
        assert cfg.minibatch_size == 16
        assert cfg.epochs == 7
        assert cfg.seed == 4
        assert cfg.full_batch

    def test_model_spec(self):
        """Test the model spec carries the data shape."""
        spec = Settings(model="mlp", hidden="8,4").model_spec(dim=3, k=4)
        assert spec.kind == ModelKind.MLP
        assert (spec.dim, spec.k) == (3, 4)
        assert spec.hidden == [8, 4]


class TestSources:
    """Tests for environment, file and override sources."""

    def test_environment(self, monkeypatch):
        """Test MULTIDRE_ variables are read."""
        monkeypatch.setenv("MULTIDRE_LR", "0.01")
        monkeypatch.setenv("MULTIDRE_DIMS", "[3, 4]")
        settings = load_settings()
        assert settings.lr == pytest.approx(0.01)
        assert settings.dims == [3, 4]

    def test_toml_file(self, tmp_path):
        """Test values from a TOML file."""
        path = tmp_path / "run.toml"
        path.write_text('lr = 0.05\nobjective = "KLIEP"\nhidden = [8]\n')
        settings = load_settings(path)
        assert settings.lr == pytest.approx(0.05)
        assert settings.objective == "kliep"
        assert settings.hidden == [8]

    def test_precedence(self, tmp_path, monkeypatch):
        """Test overrides beat the environment, which beats the file."""
        path = tmp_path / "run.toml"
        path.write_text("lr = 0.05\nepochs = 3\nbatch = 9\n")
        monkeypatch.setenv("MULTIDRE_LR", "0.02")
        monkeypatch.setenv("MULTIDRE_EPOCHS", "4")
        settings = load_settings(path, {"lr": 0.5, "epochs": None})
        assert settings.lr == pytest.approx(0.5)
        assert settings.epochs == 4
        assert settings.batch == 9

    def test_run_json_block(self, tmp_path):
        """Test a previous run.json replays its config block."""
        path = write_json(tmp_path / "run.json", {"config": {"lr": 0.3, "objective": "lsif"}, "command": "train"})
        settings = load_settings(path)
        assert settings.lr == pytest.approx(0.3)
        assert settings.loss_name == "lsif"

    def test_missing_file(self, tmp_path):
        """Test a missing config file names its path."""
        with pytest.raises(DataFileError) as excinfo:
            load_settings(tmp_path / "absent.toml")
        assert "absent.toml" in str(excinfo.value)

    def test_csv_lists(self):
        """Test comma-separated overrides become lists."""
        settings = load_settings(overrides={"dims": "2,3", "data": "a.csv, b.csv"})
        assert settings.dims == [2, 3]
        assert settings.data == ["a.csv", "b.csv"]


class TestValidation:
    """Tests for rejected values."""

    @pytest.mark.parametrize(
        "overrides",
        [
            {"log_level": "verbose"},
            {"objective": "hinge"},
            {"rule": "zero-one"},
            {"objective": "lsif", "rule": "log"},
            {"objective": "power", "alpha": 0.5},
            {"objective": "logsumexp", "alpha": 0.0},
            {"rule": "pseudospherical", "alpha": 1.0},
            {"dims": "2,0"},
            {"lr": 0.0},
        ],
    )
    def test_rejected(self, overrides):
        """Test invalid combinations raise ValidationError."""
        with pytest.raises(ValidationError):
            load_settings(overrides=overrides)

    def test_names_normalised(self):
        """Test case-insensitive names and log levels."""
        settings = Settings(log_level="debug", rule="Brier")
        assert settings.log_level == "DEBUG"
        assert settings.loss_name == "brier"


class TestLossParameters:
    """Tests for the derived loss name and parameter."""

    def test_pseudospherical_default_alpha(self):
        """Test the pseudo-spherical rule falls back to ps_alpha."""
        assert Settings(rule="pseudospherical").loss_alpha == pytest.approx(1.8)
        assert Settings(rule="pseudospherical", alpha=2.5).loss_alpha == pytest.approx(2.5)

    def test_objective_alpha(self):
        """Test objectives use alpha as given."""
        assert Settings(objective="power").loss_alpha is None
        assert Settings(objective="power", alpha=2.0).loss_alpha == pytest.approx(2.0)


class TestCommandDefaults:
    """Tests for per-command defaults."""

    def test_only_unset_fields(self):
        """Test defaults fill fields no source has set."""
        settings = load_settings(overrides={"lr": 0.2})
        updated = apply_command_defaults(settings, {"lr": 0.01, "epochs": 100})
        assert updated.lr == pytest.approx(0.2)
        assert updated.epochs == 100

    def test_environment_counts_as_set(self, monkeypatch):
        """Test an environment value is not replaced."""
        monkeypatch.setenv("MULTIDRE_EPOCHS", "5")
        updated = apply_command_defaults(load_settings(), {"epochs": 100})
        assert updated.epochs == 5

    def test_no_defaults(self):
        """Test an empty mapping returns the same object."""
        settings = load_settings()
        assert apply_command_defaults(settings, None) is settings
