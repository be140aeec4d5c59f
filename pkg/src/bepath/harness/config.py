"""Trial configuration, grid expansion, and prediction containers."""

from __future__ import annotations

from dataclasses import dataclass, field

#: Allowed maximum-input-token sizes per model family; None means any.
MODEL_TOKEN_OPTIONS: dict[str, tuple[int, ...] | None] = {
    "clinical_bert": (512,),
    "clinical_bigbird": (512, 1024, 2048),
    "baseline_linear": None,
}

#: Batch size shrinks as the token window grows (memory-bound choice).
DEFAULT_BATCH_BY_TOKENS = {512: 16, 1024: 8, 2048: 4}

DEFAULT_TRANSFORMER_LEARNING_RATES = (2e-5, 5e-5)
DEFAULT_BASELINE_LEARNING_RATES = (0.1, 0.5)
DEFAULT_SEEDS = (0, 1, 2)
DEFAULT_TRANSFORMER_EPOCHS = 3
DEFAULT_BASELINE_EPOCHS = 200

TASKS = ("binary", "multiclass")
REPORT_FIELDS = ("full", "subsection")
OPTIMIZATION_METRICS = ("auroc", "f2_beta")


@dataclass(frozen=True)
class TrialConfig:
    model_type: str
    max_tokens: int
    learning_rate: float
    seed: int
    batch_size: int
    epochs: int
    task: str
    report_field: str
    optimization_metric: str

    def __post_init__(self):
        options = MODEL_TOKEN_OPTIONS.get(self.model_type, "missing")
        if options == "missing":
            raise ValueError(f"unknown model_type {self.model_type!r}")
        if options is not None and self.max_tokens not in options:
            raise ValueError(
                f"{self.model_type} allows max_tokens in {options}, got {self.max_tokens}"
            )
        if self.max_tokens < 1 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError("max_tokens, batch_size, and epochs must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}")
        if self.report_field not in REPORT_FIELDS:
            raise ValueError(f"report_field must be one of {REPORT_FIELDS}")
        if self.optimization_metric not in OPTIMIZATION_METRICS:
            raise ValueError(f"optimization_metric must be one of {OPTIMIZATION_METRICS}")

    @property
    def trial_id(self) -> str:
        return (
            f"{self.model_type}-{self.report_field}-t{self.max_tokens}"
            f"-lr{self.learning_rate:g}-s{self.seed}"
        )

    @property
    def n_classes(self) -> int:
        return 2 if self.task == "binary" else 6

    def to_dict(self) -> dict:
        return {
            "model_type": self.model_type,
            "max_tokens": self.max_tokens,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "task": self.task,
            "report_field": self.report_field,
            "optimization_metric": self.optimization_metric,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrialConfig":
        return cls(**data)


def expand_grid(
    model_types,
    task: str,
    report_field: str,
    optimization_metric: str,
    seeds=DEFAULT_SEEDS,
    transformer_learning_rates=DEFAULT_TRANSFORMER_LEARNING_RATES,
    baseline_learning_rates=DEFAULT_BASELINE_LEARNING_RATES,
    batch_by_tokens=None,
    transformer_epochs: int = DEFAULT_TRANSFORMER_EPOCHS,
    baseline_epochs: int = DEFAULT_BASELINE_EPOCHS,
    baseline_max_tokens: int = 2048,
) -> list[TrialConfig]:
    """Cross-product expansion in deterministic order.

    Per model family: every allowed token size x learning rate x seed.
    Order matters downstream (best-model ties break to the earlier trial).
    """
    batch_by_tokens = dict(DEFAULT_BATCH_BY_TOKENS if batch_by_tokens is None else batch_by_tokens)
    grid: list[TrialConfig] = []
    for model_type in model_types:
        options = MODEL_TOKEN_OPTIONS.get(model_type, "missing")
        if options == "missing":
            raise ValueError(f"unknown model_type {model_type!r}")
        token_sizes = options if options is not None else (baseline_max_tokens,)
        if model_type == "baseline_linear":
            rates = baseline_learning_rates
            epochs = baseline_epochs
        else:
            rates = transformer_learning_rates
            epochs = transformer_epochs
        for max_tokens in token_sizes:
            for lr in rates:
                for seed in seeds:
                    grid.append(
                        TrialConfig(
                            model_type=model_type,
                            max_tokens=max_tokens,
                            learning_rate=lr,
                            seed=seed,
                            batch_size=batch_by_tokens.get(max_tokens, 16),
                            epochs=epochs,
                            task=task,
                            report_field=report_field,
                            optimization_metric=optimization_metric,
                        )
                    )
    return grid


class MalformedPredictions(ValueError):
    pass


@dataclass(frozen=True)
class PredictionSet:
    """Per-report probability vectors over the task classes."""

    probs: dict[str, tuple[float, ...]]

    def __post_init__(self):
        lengths = {len(v) for v in self.probs.values()}
        if len(lengths) > 1:
            raise MalformedPredictions("probability vectors differ in length")
        for rid, row in self.probs.items():
            if abs(sum(row) - 1.0) > 1e-6:
                raise MalformedPredictions(f"probabilities for {rid!r} sum to {sum(row)}")
    def __contains__(self, report_id: str) -> bool:
        return report_id in self.probs

    def __getitem__(self, report_id: str) -> tuple[float, ...]:
        return self.probs[report_id]

    def argmax(self, report_id: str) -> int:
        row = self.probs[report_id]
        best = max(row)
        return row.index(best)  # first occurrence: lowest class index wins ties

    def covers(self, report_ids) -> bool:
        return set(self.probs) == set(report_ids)


@dataclass
class TrialResult:
    config: TrialConfig
    eval_metrics: "object"  # MetricsReport
    dev_metrics: "object | None"
    checkpoint_ref: str
    wall_time: float  # kept out of serialized results so reruns are byte-identical

    @property
    def trial_id(self) -> str:
        return self.config.trial_id
