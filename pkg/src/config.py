"""
Configuration management using Pydantic Settings.

Values resolve in this order: explicit overrides (CLI flags), environment
variables with the MULTIDRE_ prefix, a TOML file (or the config block of a
previous run.json) and finally the defaults below.
"""

from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Optional, Type, Union

from pydantic import Field, field_validator, model_validator
from pydantic_settings import (
    BaseSettings,
    InitSettingsSource,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
    TomlConfigSettingsSource,
)

from src.exceptions import DataFileError
from src.schemas.config import FeatureKind, ModelKind, ModelSpec, OptimizerConfig, OptimizerMethod
from src.services.objectives import ObjectiveKind
from src.services.scoring import RuleKind
from src.utils.data_io import read_json

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]


def _split_csv(v: Any) -> Any:
    if isinstance(v, str):
        return [item.strip() for item in v.split(",") if item.strip()]
    return v


class Settings(BaseSettings):
    """
    Run settings.

    Every field can be set through MULTIDRE_<FIELD> (case-insensitive). List
    fields accept JSON in the environment and comma-separated strings
    elsewhere.
    """

    model_config = SettingsConfigDict(
        env_prefix="MULTIDRE_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # -------------------------------------------------------------------------
    # Application Settings
    # -------------------------------------------------------------------------
    log_level: str = Field(default="INFO", description="Logging level")
    out_dir: str = Field(default="runs", description="Output directory")
    jobs: int = Field(default=1, ge=1, description="Parallel benchmark workers")

    # -------------------------------------------------------------------------
    # Objective Settings
    # -------------------------------------------------------------------------
    objective: Optional[str] = Field(default=None, description="Convex objective name")
    alpha: Optional[float] = Field(default=None, description="Objective parameter")
    rule: Optional[str] = Field(default=None, description="Scoring rule name")
    ps_alpha: float = Field(default=1.8, gt=1, description="Pseudo-spherical alpha")
    quadratic_h: Optional[str] = Field(default=None, description="CSV file with the Quadratic H")
    quadratic_q: Optional[str] = Field(default=None, description="CSV file with the Quadratic q")
    allow_zero_ratio: bool = Field(default=False, description="Let link_forward return zero ratios")
    log_cap: float = Field(default=1e6, gt=0, description="Cap on scoring-rule losses")

    # -------------------------------------------------------------------------
    # Model Settings
    # -------------------------------------------------------------------------
    model: ModelKind = Field(default=ModelKind.LOGLINEAR, description="Model family")
    features: FeatureKind = Field(default=FeatureKind.IDENTITY, description="Log-linear feature map")
    degree: int = Field(default=2, ge=1, description="Polynomial degree")
    hidden: List[int] = Field(default_factory=lambda: [32, 32], description="Mlp hidden widths")
    clamp: float = Field(default=30.0, gt=0, description="Log-ratio bound")
    n_centers: int = Field(default=100, ge=1, description="RBF centers")
    bandwidth: Optional[float] = Field(default=None, gt=0, description="RBF bandwidth")

    # -------------------------------------------------------------------------
    # Optimizer Settings
    # -------------------------------------------------------------------------
    optimizer: OptimizerMethod = Field(default=OptimizerMethod.ADAM, description="sgd or adam")
    lr: float = Field(default=1e-3, gt=0, description="Step size")
    batch: int = Field(default=128, ge=1, description="Minibatch size per group")
    epochs: int = Field(default=200, ge=0, description="Training epochs")
    beta1: float = Field(default=0.9, gt=0, lt=1)
    beta2: float = Field(default=0.999, gt=0, lt=1)
    eps: float = Field(default=1e-8, gt=0)
    full_batch: bool = Field(default=False, description="Full-batch gradient steps")
    patience: Optional[int] = Field(default=None, ge=1, description="Early-stopping patience in epochs")
    seed: int = Field(default=0, ge=0, description="Run seed")

    # -------------------------------------------------------------------------
    # Benchmark Settings
    # -------------------------------------------------------------------------
    dims: List[int] = Field(default_factory=lambda: [2, 5, 10], description="Gaussian benchmark dims")
    seeds: int = Field(default=3, ge=1, description="Number of benchmark seeds")
    n_train: int = Field(default=2000, ge=1, description="Training samples per group")
    n_eval: int = Field(default=1000, ge=1, description="Held-out samples per group")
    fix_mean5: bool = Field(default=False, description="Replace the duplicated fifth mean by e_3")
    methods: Optional[List[str]] = Field(default=None, description="Benchmark methods")
    ood_means: List[float] = Field(
        default_factory=lambda: [-3.0, 0.0, 3.0], description="OOD component means"
    )
    ood_weights: Optional[List[float]] = Field(default=None, description="OOD mixture weights")

    # -------------------------------------------------------------------------
    # Data Settings
    # -------------------------------------------------------------------------
    data: List[str] = Field(default_factory=list, description="Sample CSV files")
    validation: List[str] = Field(default_factory=list, description="Held-out sample CSV files")
    pivot: Optional[int] = Field(default=None, ge=1, description="1-based pivot group")
    checkpoint: Optional[str] = Field(default=None, description="Model checkpoint JSON")
    trials: int = Field(default=1000, ge=1, description="Verifier trials")

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate logging level."""
        v = v.upper()
        if v not in LOG_LEVELS:
            raise ValueError(f"Log level must be one of: {LOG_LEVELS}")
        return v

    @field_validator("objective")
    @classmethod
    def validate_objective(cls, v: Optional[str]) -> Optional[str]:
        if v is None:
            return v
        names = [kind.value for kind in ObjectiveKind]
        if v.lower() not in names:
            raise ValueError(f"Objective must be one of: {names}")
        return v.lower()

    @field_validator("rule")
    @classmethod
    def validate_rule(cls, v: Optional[str]) -> Optional[str]:
        if v is None:
            return v
        names = [kind.value for kind in RuleKind]
        if v.lower() not in names:
            raise ValueError(f"Rule must be one of: {names}")
        return v.lower()

    @field_validator("dims", "hidden", "data", "validation", "methods", "ood_means", "ood_weights", mode="before")
    @classmethod
    def split_lists(cls, v: Any) -> Any:
        return _split_csv(v)

    @field_validator("dims", "hidden")
    @classmethod
    def validate_positive_ints(cls, v: List[int]) -> List[int]:
        if any(item < 1 for item in v):
            raise ValueError("entries must be positive")
        return v

    @model_validator(mode="after")
    def validate_loss(self) -> "Settings":
        if self.objective and self.rule:
            raise ValueError("specify exactly one of objective or rule")
        if self.alpha is not None:
            if self.objective == ObjectiveKind.POWER.value and self.alpha <= 1:
                raise ValueError(f"power alpha must be > 1, got {self.alpha}")
            if self.objective == ObjectiveKind.LOGSUMEXP.value and self.alpha <= 0:
                raise ValueError(f"logsumexp alpha must be > 0, got {self.alpha}")
            if self.rule == RuleKind.PSEUDOSPHERICAL.value and self.alpha <= 1:
                raise ValueError(f"pseudo-spherical alpha must be > 1, got {self.alpha}")
        return self

    @property
    def loss_name(self) -> str:
        """Selected rule or objective; Multi-LR when neither is set."""
        return self.rule or self.objective or ObjectiveKind.MULTILR.value

    @property
    def loss_alpha(self) -> Optional[float]:
        if self.rule == RuleKind.PSEUDOSPHERICAL.value:
            return self.ps_alpha if self.alpha is None else self.alpha
        return self.alpha

    @property
    def seed_list(self) -> List[int]:
        """Consecutive benchmark seeds starting at seed."""
        return list(range(self.seed, self.seed + self.seeds))

    def model_spec(self, dim: int, k: int) -> ModelSpec:
        return ModelSpec(
            kind=self.model,
            dim=dim,
            k=k,
            features=self.features,
            degree=self.degree,
            n_centers=self.n_centers,
            bandwidth=self.bandwidth,
            hidden=self.hidden,
            clamp=self.clamp,
        )

    def model_fields_for_bench(self) -> Dict[str, Any]:
        """ModelSpec fields other than dim and k."""
        return {
            "kind": self.model.value,
            "features": self.features.value,
            "degree": self.degree,
            "n_centers": self.n_centers,
            "bandwidth": self.bandwidth,
            "hidden": list(self.hidden),
            "clamp": self.clamp,
        }

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(
            method=self.optimizer,
            step_size=self.lr,
            beta1=self.beta1,
            beta2=self.beta2,
            epsilon=self.eps,
            minibatch_size=self.batch,
            epochs=self.epochs,
            seed=self.seed,
            full_batch=self.full_batch,
            patience=self.patience,
        )


def _settings_class(path: Optional[Path]) -> Type[Settings]:
    """Settings subclass whose file source reads path."""
    if path is None:
        return Settings
    if not path.is_file():
        raise DataFileError(path, "config file not found")

    if path.suffix.lower() == ".json":
        block = read_json(path).get("config", {})
        if not isinstance(block, dict):
            raise DataFileError(path, "run.json has no config block")

        class RunFileSettings(Settings):
            @classmethod
            def settings_customise_sources(
                cls,
                settings_cls: Type[BaseSettings],
                init_settings: PydanticBaseSettingsSource,
                env_settings: PydanticBaseSettingsSource,
                dotenv_settings: PydanticBaseSettingsSource,
                file_secret_settings: PydanticBaseSettingsSource,
            ):
                return (
                    init_settings,
                    env_settings,
                    dotenv_settings,
                    InitSettingsSource(settings_cls, block),
                    file_secret_settings,
                )

        return RunFileSettings

    class TomlFileSettings(Settings):
        model_config = SettingsConfigDict(toml_file=path)

        @classmethod
        def settings_customise_sources(
            cls,
            settings_cls: Type[BaseSettings],
            init_settings: PydanticBaseSettingsSource,
            env_settings: PydanticBaseSettingsSource,
            dotenv_settings: PydanticBaseSettingsSource,
            file_secret_settings: PydanticBaseSettingsSource,
        ):
            return (
                init_settings,
                env_settings,
                dotenv_settings,
                TomlConfigSettingsSource(settings_cls),
                file_secret_settings,
            )

    return TomlFileSettings


def load_settings(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> Settings:
    """
    Build settings for one invocation.

    Args:
        path: TOML file or run.json; None for environment and defaults only
        overrides: Explicit values, e.g. parsed CLI flags (None entries ignored)

    Returns:
        Settings
    """
    cls = _settings_class(Path(path) if path is not None else None)
    values = {key: val for key, val in (overrides or {}).items() if val is not None}
    return cls(**values)


@lru_cache()
def get_settings() -> Settings:
    """
    Get cached settings instance.

    Uses lru_cache to ensure settings are only loaded once.

    Returns:
        Settings: Settings from the environment and defaults
    """
    return Settings()
