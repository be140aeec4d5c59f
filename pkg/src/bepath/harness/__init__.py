"""Training harness: backend contract, baseline classifier, grid search."""

from .config import (  # noqa: F401
    DEFAULT_BATCH_BY_TOKENS,
    MODEL_TOKEN_OPTIONS,
    PredictionSet,
    TrialConfig,
    TrialResult,
    expand_grid,
)
from .backends import (  # noqa: F401
    BackendUnavailable,
    BaselineLinearBackend,
    ClassifierBackend,
    LabeledExample,
    StubBackend,
    TrainingFailure,
    WorkerBackend,
)
from .grid import (  # noqa: F401
    AllTrialsFailed,
    GridRunResult,
    evaluate_predictions,
    evaluate_validation,
    prepare_examples,
    results_json,
    run_grid,
)
from .results import (  # noqa: F401
    RULE_BASED_REFERENCE,
    ReferenceRow,
    ResultRow,
    emit_results,
)
