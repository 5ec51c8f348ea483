"""Gradient-descent-free nonlinear feature selection via second-order Stein moments."""

from .covariance import (
    CovarianceModel,
    known_covariance,
    ledoit_wolf_covariance,
    ledoit_wolf_shrinkage,
    load_covariance_csv,
    sample_covariance,
    save_covariance_csv,
    second_order_score,
    subset_known,
)
from .data import (
    Dataset,
    GroundTruth,
    SimSpec,
    ar1_sigma,
    center_columns,
    derive_seed,
    load_csv,
    response_surface,
    save_csv,
    simulate,
    simulate_from_truth,
)
from .errors import (
    ConfigError,
    DegenerateDataError,
    IterationLimitError,
    NumericalError,
    ParseError,
    RankError,
    SchemaError,
    SteinSelectError,
    TrainingDivergenceError,
    ValidationError,
)
from .metrics import (
    PipelineConfig,
    ReplicationSummary,
    SelectionMetrics,
    run_pipeline,
    run_replications,
    selection_metrics,
)
from .moments import (
    SelectionResult,
    SteinMoment,
    ThresholdRule,
    TopSRule,
    lift_selection,
    select,
    selection_to_json,
    stein_diagonal,
    stein_moment,
    top_k_rows,
)
from .pipeline import PipelineArtifacts, SelectionPlan, run_selection
from .refit import (
    RefitConfig,
    RefitModel,
    evaluate_mse,
    model_from_json,
    model_to_json,
    mse_loss_and_grads,
    predict,
    train,
)
from .screening import (
    ScreeningConfig,
    ScreeningTrace,
    round_sizes,
    screen,
    screen_and_select,
    screen_once,
    trace_to_json,
)
from .tuning import (
    BicReport,
    EigengapReport,
    bic_value,
    estimate_k1,
    estimate_k1_threshold,
    estimate_s_bic,
    rank_features,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
