"""Study-level aggregation, ensembling and macro-mAP evaluation for
multi-view, multi-label prediction tables."""

from .aggregate import EnsembleConfig, aggregate_all, aggregate_study, combine_views, ensemble, view_mean
from .asl import AslParams, asl_forward, asl_gradient
from .ingest import (
    group_by_study,
    read_labels,
    read_predictions,
    read_study_predictions,
    write_predictions,
    write_study_predictions,
)
from .metrics import average_precision, evaluate, macro_map
from .sweep import PpRatio, sweep
from .synth import SynthConfig, generate, generate_models
from .types import (
    AggregationConfig,
    ClassResult,
    EvalReport,
    LabelTable,
    MissingViewPolicy,
    PredictionRecord,
    StudyGroup,
    StudyPrediction,
    ViewKind,
    validate_prediction_set,
)

__version__ = "0.1.0"
