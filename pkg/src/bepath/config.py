"""Pipeline configuration: one TOML file drives every CLI command.

Defaults are complete, so an empty file (or no file) is a valid config;
anything set in the file overrides the default with strict key checking.
Referenced input files must exist when the config is loaded. Paths are
resolved relative to the config file's directory, not the process cwd,
so a config stays valid no matter where the pipeline is invoked from.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import tomli

from .corpus import DEFAULT_CLASS_MIX, DEFAULT_REPORTS_PER_PATIENT, GeneratorSpec
from .harness.config import (
    DEFAULT_BASELINE_EPOCHS,
    DEFAULT_BASELINE_LEARNING_RATES,
    DEFAULT_BATCH_BY_TOKENS,
    DEFAULT_SEEDS,
    DEFAULT_TRANSFORMER_EPOCHS,
    DEFAULT_TRANSFORMER_LEARNING_RATES,
    OPTIMIZATION_METRICS,
    REPORT_FIELDS,
    TASKS,
    expand_grid,
)
from .preprocess import DEFAULT_DIAGNOSIS_HEADINGS, DEFAULT_TERMINATOR_HEADINGS, HeadingLexicon
from .tokenization import TokenizerSpec


class ConfigError(ValueError):
    pass


class MissingInputFile(ConfigError):
    def __init__(self, key: str, path: Path):
        super().__init__(f"{key} = {str(path)!r} does not exist")
        self.key = key
        self.path = path


DEFAULTS: dict[str, dict] = {
    "data": {
        "corpus_path": "",
        "split_path": "",
        "output_dir": "runs",
    },
    "generate": {
        "n_patients": 150,
        "class_mix": list(DEFAULT_CLASS_MIX),
        "reports_per_patient": list(DEFAULT_REPORTS_PER_PATIENT),
        "negation_distractor_rate": 0.3,
    },
    "preprocess": {
        "diagnosis_headings": list(DEFAULT_DIAGNOSIS_HEADINGS),
        "terminator_headings": list(DEFAULT_TERMINATOR_HEADINGS),
    },
    "tokenizer": {
        "kind": "whitespace",
        "vocab_path": "",
        "lowercase": True,
    },
    "split": {
        "val_fraction": 0.5,
        "eval_fraction": 61 / 301,
        "stratify": False,
    },
    "task": {
        "task": "multiclass",
        "report_field": "subsection",
        "optimization_metric": "auroc",
    },
    "grid": {
        "model_types": ["baseline_linear"],
        "transformer_learning_rates": list(DEFAULT_TRANSFORMER_LEARNING_RATES),
        "baseline_learning_rates": list(DEFAULT_BASELINE_LEARNING_RATES),
        "seeds": list(DEFAULT_SEEDS),
        "batch_by_tokens": {str(k): v for k, v in DEFAULT_BATCH_BY_TOKENS.items()},
        "transformer_epochs": DEFAULT_TRANSFORMER_EPOCHS,
        "baseline_epochs": DEFAULT_BASELINE_EPOCHS,
        "parallelism": 1,
    },
    "worker": {
        "command": [],
    },
    "seed": 0,
}


@dataclass(frozen=True)
class PipelineConfig:
    corpus_path: Path | None
    split_path: Path | None
    output_dir: Path
    n_patients: int
    class_mix: tuple[float, ...]
    reports_per_patient: tuple[float, ...]
    negation_distractor_rate: float
    diagnosis_headings: tuple[str, ...]
    terminator_headings: tuple[str, ...]
    tokenizer_kind: str
    vocab_path: Path | None
    lowercase: bool
    val_fraction: float
    eval_fraction: float
    stratify: bool
    task: str
    report_field: str
    optimization_metric: str
    model_types: tuple[str, ...]
    transformer_learning_rates: tuple[float, ...]
    baseline_learning_rates: tuple[float, ...]
    seeds: tuple[int, ...]
    batch_by_tokens: dict[int, int]
    transformer_epochs: int
    baseline_epochs: int
    parallelism: int
    worker_command: tuple[str, ...]
    seed: int

    def heading_lexicon(self) -> HeadingLexicon:
        return HeadingLexicon(
            diagnosis_headings=self.diagnosis_headings,
            terminator_headings=self.terminator_headings,
        )

    def tokenizer_spec(self) -> TokenizerSpec:
        return TokenizerSpec(
            kind=self.tokenizer_kind,
            vocab_path=str(self.vocab_path) if self.vocab_path else None,
            lowercase=self.lowercase,
        )

    def generator_spec(self, seed: int | None = None) -> GeneratorSpec:
        return GeneratorSpec(
            n_patients=self.n_patients,
            class_mix=self.class_mix,
            reports_per_patient=self.reports_per_patient,
            negation_distractor_rate=self.negation_distractor_rate,
            seed=self.seed if seed is None else seed,
        )

    def grid(self):
        return expand_grid(
            list(self.model_types),
            task=self.task,
            report_field=self.report_field,
            optimization_metric=self.optimization_metric,
            seeds=self.seeds,
            transformer_learning_rates=self.transformer_learning_rates,
            baseline_learning_rates=self.baseline_learning_rates,
            batch_by_tokens=self.batch_by_tokens,
            transformer_epochs=self.transformer_epochs,
            baseline_epochs=self.baseline_epochs,
        )


def _merge(overrides: dict) -> dict:
    merged = {section: dict(values) for section, values in DEFAULTS.items() if section != "seed"}
    merged_seed = DEFAULTS["seed"]
    for section, values in overrides.items():
        if section == "seed":
            merged_seed = values
            continue
        if section not in merged:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(values, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key, value in values.items():
            if key not in merged[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            merged[section][key] = value
    merged["seed"] = merged_seed
    return merged


def _optional_path(base: Path, raw: str, key: str, must_exist: bool) -> Path | None:
    if not raw:
        return None
    path = Path(raw)
    if not path.is_absolute():
        path = base / path
    if must_exist and not path.exists():
        raise MissingInputFile(key, path)
    return path


def _fraction(value, key: str) -> float:
    value = float(value)
    if not 0.0 < value < 1.0:
        raise ConfigError(f"{key} must be in (0, 1), got {value}")
    return value


def _choice(value, key: str, options) -> str:
    if value not in options:
        raise ConfigError(f"{key} must be one of {options}, got {value!r}")
    return value


def load_config(path: Path | str | None, check_inputs: bool = True) -> PipelineConfig:
    """Load and validate a config file; None means pure defaults."""
    if path is None:
        raw: dict = {}
        base = Path.cwd()
    else:
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                raw = tomli.load(fh)
        except FileNotFoundError:
            raise MissingInputFile("config", path) from None
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        base = path.parent
    merged = _merge(raw)

    data, gen, prep = merged["data"], merged["generate"], merged["preprocess"]
    tok, split, task = merged["tokenizer"], merged["split"], merged["task"]
    grid, worker = merged["grid"], merged["worker"]

    if gen["n_patients"] < 1:
        raise ConfigError("generate.n_patients must be positive")
    if grid["parallelism"] < 1:
        raise ConfigError("grid.parallelism must be positive")
    for key in ("transformer_epochs", "baseline_epochs"):
        if grid[key] < 1:
            raise ConfigError(f"grid.{key} must be positive")
    try:
        batch_by_tokens = {int(k): int(v) for k, v in grid["batch_by_tokens"].items()}
    except (TypeError, ValueError, AttributeError):
        raise ConfigError("grid.batch_by_tokens must map token sizes to batch sizes") from None
    if any(v < 1 for v in batch_by_tokens.values()):
        raise ConfigError("grid.batch_by_tokens values must be positive")

    return PipelineConfig(
        corpus_path=_optional_path(base, data["corpus_path"], "data.corpus_path", check_inputs),
        split_path=_optional_path(base, data["split_path"], "data.split_path", check_inputs),
        output_dir=_optional_path(base, data["output_dir"], "data.output_dir", False) or base,
        n_patients=int(gen["n_patients"]),
        class_mix=tuple(float(p) for p in gen["class_mix"]),
        reports_per_patient=tuple(float(p) for p in gen["reports_per_patient"]),
        negation_distractor_rate=float(gen["negation_distractor_rate"]),
        diagnosis_headings=tuple(prep["diagnosis_headings"]),
        terminator_headings=tuple(prep["terminator_headings"]),
        tokenizer_kind=_choice(tok["kind"], "tokenizer.kind", ("whitespace", "wordpiece")),
        vocab_path=_optional_path(base, tok["vocab_path"], "tokenizer.vocab_path", check_inputs),
        lowercase=bool(tok["lowercase"]),
        val_fraction=_fraction(split["val_fraction"], "split.val_fraction"),
        eval_fraction=_fraction(split["eval_fraction"], "split.eval_fraction"),
        stratify=bool(split["stratify"]),
        task=_choice(task["task"], "task.task", TASKS),
        report_field=_choice(task["report_field"], "task.report_field", REPORT_FIELDS),
        optimization_metric=_choice(
            task["optimization_metric"], "task.optimization_metric", OPTIMIZATION_METRICS
        ),
        model_types=tuple(grid["model_types"]),
        transformer_learning_rates=tuple(float(v) for v in grid["transformer_learning_rates"]),
        baseline_learning_rates=tuple(float(v) for v in grid["baseline_learning_rates"]),
        seeds=tuple(int(s) for s in grid["seeds"]),
        batch_by_tokens=batch_by_tokens,
        transformer_epochs=int(grid["transformer_epochs"]),
        baseline_epochs=int(grid["baseline_epochs"]),
        parallelism=int(grid["parallelism"]),
        worker_command=tuple(worker["command"]),
        seed=int(merged["seed"]),
    )


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, list):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise TypeError(f"cannot render {type(value).__name__} as TOML")


def default_config_toml() -> str:
    """Render the full default config as TOML, suitable for --print-defaults."""
    lines = [f"seed = {_toml_value(DEFAULTS['seed'])}", ""]
    for section, values in DEFAULTS.items():
        if section == "seed":
            continue
        lines.append(f"[{section}]")
        for key, value in values.items():
            if isinstance(value, dict):
                pairs = ", ".join(f'"{k}" = {_toml_value(v)}' for k, v in value.items())
                lines.append(f"{key} = {{ {pairs} }}")
            else:
                lines.append(f"{key} = {_toml_value(value)}")
        lines.append("")
    return "\n".join(lines)
