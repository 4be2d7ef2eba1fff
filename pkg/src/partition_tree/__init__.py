"""Conditional density estimation with joint-space partition trees and forests."""

from .data import (
    ColumnSpec,
    Dataset,
    Schema,
    infer_schema,
    load_csv,
    perturb_dataset,
    save_csv,
)
from .errors import (
    ModelFormatError,
    ParseError,
    PartitionTreeError,
    ResourceLimitError,
    SchemaError,
    UnsupportedModeError,
)
from .evaluation import (
    ImportanceVector,
    accuracy,
    feature_importance,
    l1_error,
    log_loss,
    log_loss_report,
    rmse,
)
from .forest import ForestConfig, PartitionForest, fit_forest
from .geometry import Cell, CellStats, Interval, OutcomeBox, build_outcome_box, diameter, mu_y
from .kernels import active_backend
from .splitting import FeasibilityConfig, GainRecord, SplitSpec, empirical_gain
from .tree import FitConfig, PartitionTree, PredictiveDensity, fit, load_model, save_model

__version__ = "0.1.0"

__all__ = [
    "ColumnSpec",
    "Dataset",
    "Schema",
    "infer_schema",
    "load_csv",
    "perturb_dataset",
    "save_csv",
    "PartitionTreeError",
    "SchemaError",
    "ParseError",
    "UnsupportedModeError",
    "ModelFormatError",
    "ResourceLimitError",
    "ImportanceVector",
    "accuracy",
    "feature_importance",
    "l1_error",
    "log_loss",
    "log_loss_report",
    "rmse",
    "ForestConfig",
    "PartitionForest",
    "fit_forest",
    "Cell",
    "CellStats",
    "Interval",
    "OutcomeBox",
    "build_outcome_box",
    "diameter",
    "mu_y",
    "active_backend",
    "FeasibilityConfig",
    "GainRecord",
    "SplitSpec",
    "empirical_gain",
    "FitConfig",
    "PartitionTree",
    "PredictiveDensity",
    "fit",
    "load_model",
    "save_model",
    "__version__",
]
