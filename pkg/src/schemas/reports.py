"""
Report Schemas

Pydantic models for every JSON document the toolkit writes. Reports never
carry wall-clock times; those live only in run.json.
"""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field


class TrainReport(BaseModel):
    """Outcome of one training run."""

    loss_history: List[float] = Field(description="Full-dataset loss after each epoch")
    final_loss: float = Field(description="Full-dataset loss of the returned model")
    initial_loss: float = Field(description="Full-dataset loss before training")
    steps: int = Field(ge=0, description="Optimizer steps taken")
    epochs: int = Field(ge=0, description="Epochs completed")
    loss: Dict[str, Any] = Field(default_factory=dict, description="Objective or rule echo")
    optimizer: Dict[str, Any] = Field(default_factory=dict, description="Optimizer echo")
    diagnostics: Dict[str, Any] = Field(default_factory=dict)
    validation_history: List[float] = Field(
        default_factory=list, description="Validation loss after each epoch, when a validation sample is given"
    )
    best_epoch: Optional[int] = Field(default=None, description="Epoch of the returned parameters (0 = initial)")
    stopped_early: bool = False
    wall_time: Optional[float] = Field(default=None, exclude=True, description="Seconds; run.json only")


class GradCheckResult(BaseModel):
    """Maximum relative gradient error for one loss and model."""

    loss: str
    model: str
    max_rel_error: float
    passed: bool


class GradCheckReport(BaseModel):
    trials: int
    tolerance: float
    results: List[GradCheckResult] = Field(default_factory=list)
    passed: bool = True


class MaeReport(BaseModel):
    """Pairwise-averaged MAE on held-out pooled samples."""

    mae: float
    mae_clipped: float = Field(description="MAE with both ratios clipped at clip_at")
    log_mae: float = Field(description="The same pairwise average of absolute log-ratio errors")
    clip_at: float = 50.0
    n_eval: int
    evaluation: str = Field(default="pooled held-out samples (empirical mixture)")


class DivergenceReport(BaseModel):
    objective: Dict[str, Any]
    plugin: Optional[float] = None
    plugin_se: Optional[float] = None
    variational: Optional[float] = None
    js_divergence: Optional[float] = None
    n_pivot: int


class MisReport(BaseModel):
    estimate: float
    standard_error: float
    per_proposal: List[float]
    weights: List[float]
    ess: List[float] = Field(description="(sum w)^2 / sum w^2 per proposal")


class SirReport(BaseModel):
    indices: List[int]
    scheme: str
    ess_max: float = Field(description="sum w / max w")
    ess_kish: float = Field(description="(sum w)^2 / sum w^2")


class AurocReport(BaseModel):
    per_component: List[float]
    mean_auroc: float


class TheoryCheck(BaseModel):
    """One verifier: maximal residual over trials."""

    name: str
    max_residual: float
    threshold: float
    trials: int
    passed: bool


class TheoryReport(BaseModel):
    seed: int
    trials: int
    checks: List[TheoryCheck] = Field(default_factory=list)
    passed: bool = True


class BenchmarkCell(BaseModel):
    """One method at one dimension, aggregated over the seeds that finished."""

    model_config = ConfigDict(protected_namespaces=())

    method: str
    dim: int
    values: List[float] = Field(description="Log-scale MAE per finished seed")
    mean: float
    std: float
    ratio_mean: Optional[float] = Field(default=None, description="Ratio-scale MAE, mean over finished seeds")
    clipped_mean: Optional[float] = None
    errors: List[str] = Field(default_factory=list, description="Abort messages of seeds that did not finish")

    def formatted(self) -> str:
        if not self.values:
            return "aborted"
        text = f"{self.mean:.3f} ± {self.std:.3f}"
        if self.errors:
            text += f" ({len(self.errors)} aborted)"
        return text


class GaussianBenchmarkReport(BaseModel):
    means_family: str = Field(description="verbatim, fix_mean5 or explicit")
    metric: str = Field(default="log_mae", description="Metric behind each cell's values")
    seeds: List[int]
    n_per_group: int
    n_eval: int
    config: Dict[str, Any] = Field(default_factory=dict)
    cells: List[BenchmarkCell] = Field(default_factory=list)


class OodReport(BaseModel):
    component_means: List[float]
    mixture_weights: List[float]
    n_per_group: int
    seed: int
    methods: Dict[str, AurocReport] = Field(default_factory=dict)
    oracle_auroc: AurocReport = Field(description="Population AUROC of the true ratios")
    oracle_sample_auroc: Optional[AurocReport] = Field(default=None, description="True ratios on the held-out sample")


class ErrorReport(BaseModel):
    """Error document printed by the CLI on failure."""

    error: str = Field(description="Error message")
    type: str = Field(description="Exception class name")
    exit_code: int
    path: Optional[str] = Field(default=None, description="Offending file, if any")
    step: Optional[int] = Field(default=None, description="Training step of a numerical abort")
