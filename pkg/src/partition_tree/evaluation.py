"""Scoring, gain-based feature importance, and the Monte Carlo L1 oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import UnsupportedModeError
from .forest import PartitionForest
from .geometry import Interval
from .tree import PartitionTree


@dataclass(frozen=True)
class LogLossReport:
    value: float
    n: int
    floored_rows: int


def log_loss_report(model, data: Dataset) -> LogLossReport:
    """Mean negative log predictive density, counting rows saved by the floor."""
    if data.n_rows == 0:
        raise ValueError("log-loss undefined on an empty dataset")
    floor = model_floor(model)
    total = 0.0
    floored = 0
    for i in range(data.n_rows):
        row = data.row(i)
        v = conditional_density(model, row, row)
        if v < floor:
            floored += 1
            v = floor
        total -= math.log(v)
    return LogLossReport(total / data.n_rows, data.n_rows, floored)


def log_loss(model, data: Dataset) -> float:
    return log_loss_report(model, data).value


def model_floor(model) -> float:
    cfg = model.config
    return cfg.base.density_floor if isinstance(model, PartitionForest) else cfg.density_floor


def conditional_density(model, x: tuple, y: tuple) -> float:
    """Normalized conditional density (uniform fallback applied, no floor)."""
    from .tree import _merge_rows

    z = _merge_rows(model.schema, x, y)
    if not model.box.contains_y(z):
        return 0.0
    norm = model.slice_normalizer(x)
    if norm <= 0.0:
        return 1.0 / model.box.volume()
    return model.density(z) / norm


def _require_regression(schema):
    if schema.categorical_outcome_indices or len(schema.continuous_outcome_indices) != 1:
        raise UnsupportedModeError("rmse needs exactly one continuous outcome")


def _require_classification(schema):
    if schema.continuous_outcome_indices or not schema.categorical_outcome_indices:
        raise UnsupportedModeError("accuracy needs an all-categorical outcome")


def rmse(model, data: Dataset) -> float:
    _require_regression(data.schema)
    j = data.schema.continuous_outcome_indices[0]
    se = 0.0
    for i in range(data.n_rows):
        row = data.row(i)
        se += (model.point_predict(row) - float(row[j])) ** 2
    return math.sqrt(se / data.n_rows)


def accuracy(model, data: Dataset) -> float:
    _require_classification(data.schema)
    cat = data.schema.categorical_outcome_indices
    hits = 0
    for i in range(data.n_rows):
        row = data.row(i)
        pred = model.point_predict(row)
        if tuple(pred) == tuple(int(row[j]) for j in cat):
            hits += 1
    return hits / data.n_rows


@dataclass(frozen=True)
class ImportanceVector:
    """Normalized per-covariate gain shares; all-zero (flagged) without X-splits."""

    covariate_names: tuple[str, ...]
    values: np.ndarray
    no_x_splits: bool

    def as_dict(self) -> dict:
        return {name: float(v) for name, v in zip(self.covariate_names, self.values)}


def _tree_importance(tree: PartitionTree, normalize_by: str) -> ImportanceVector:
    cov = tree.schema.covariate_indices
    pos = {col: i for i, col in enumerate(cov)}
    acc = np.zeros(len(cov))
    total_all = 0.0
    for node in tree.internal_nodes():
        total_all += node.gain
        if not node.split.is_outcome:
            acc[pos[node.split.column]] += node.gain
    total_x = float(acc.sum())
    names = tuple(tree.schema.columns[c].name for c in cov)
    if total_x <= 0.0:
        return ImportanceVector(names, np.zeros(len(cov)), True)
    denom = total_x if normalize_by == "x_splits" else total_all
    return ImportanceVector(names, acc / denom, False)


def feature_importance(model, *, normalize_by: str = "x_splits") -> ImportanceVector:
    """Gain-based covariate importance, restricted to X-splits.

    ``normalize_by="x_splits"`` (default) divides by the X-split gain total so
    the vector sums to one; ``"all_splits"`` divides by the gain total over
    every internal node, outcome splits included.
    """
    if normalize_by not in ("x_splits", "all_splits"):
        raise ValueError("normalize_by must be 'x_splits' or 'all_splits'")
    if isinstance(model, PartitionTree):
        return _tree_importance(model, normalize_by)
    per_tree = [_tree_importance(t, normalize_by) for t in model.trees]
    useful = [iv for iv in per_tree if not iv.no_x_splits]
    names = per_tree[0].covariate_names
    if not useful:
        return ImportanceVector(names, np.zeros(len(names)), True)
    stacked = np.stack([iv.values for iv in useful])
    return ImportanceVector(names, stacked.mean(axis=0), False)


def _x_row_for_model(schema, x_values) -> tuple:
    """Full-width row with covariate slots filled in order and outcome slots zeroed."""
    out = []
    k = 0
    for spec in schema.columns:
        if spec.is_outcome:
            out.append(0 if spec.is_categorical else 0.0)
        else:
            out.append(float(x_values[k]))
            k += 1
    return tuple(out)


def l1_error(
    model,
    truth,
    n_mc: int,
    seed: int,
    *,
    normalized: bool = True,
    quad_points: int = 64,
) -> float:
    """Monte Carlo estimate of the L1 distance between estimator and truth.

    Covariates are drawn from the truth; for each draw the absolute gap is
    integrated exactly over every predictive bin (the estimator is constant
    there; the truth is evaluated on a midpoint grid) and the truth's mass
    outside the truncation box, where the estimator is 0, is added on top.
    """
    schema = model.schema
    if schema.categorical_outcome_indices or len(schema.continuous_outcome_indices) != 1:
        raise UnsupportedModeError("the L1 oracle supports a single continuous outcome")
    j = schema.continuous_outcome_indices[0]
    rng = np.random.default_rng(seed)
    xs = truth.sample_x(rng, n_mc)
    box_side = model.box.sides[j]
    total = 0.0
    offsets = (np.arange(quad_points) + 0.5) / quad_points
    for row in xs:
        x_row = _x_row_for_model(schema, row)
        pd = model.predictive_density(x_row)
        values = pd.normalized_values() if normalized else [v for _, v in pd.bins]
        err = 0.0
        for i, (cell, _) in enumerate(pd.bins):
            side = cell.sides[j]
            mids = side.lo + offsets * side.length
            f_vals = np.asarray([truth.pdf(row, m) for m in mids])
            err += float(np.mean(np.abs(values[i] - f_vals))) * side.length
        err += 1.0 - truth.interval_mass(row, box_side.lo, box_side.hi)
        total += err
    return total / n_mc


def gaussian_residual_logloss(
    y_train: np.ndarray,
    yhat_train: np.ndarray,
    y_test: np.ndarray,
    yhat_test: np.ndarray,
) -> float:
    """Log-loss of a fixed-variance Gaussian-residual predictive baseline."""
    resid = np.asarray(y_train) - np.asarray(yhat_train)
    var = float(np.mean(resid**2))
    var = max(var, 1e-12)
    z = np.asarray(y_test) - np.asarray(yhat_test)
    return float(np.mean(0.5 * math.log(2.0 * math.pi * var) + z**2 / (2.0 * var)))


def kfold_indices(n: int, k: int, seed: int) -> list[np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    return [perm[f::k] for f in range(k)]


def cross_validate(data: Dataset, k: int, seed: int, fit_fn, eval_fn) -> list:
    """Fixed-seed k-fold driver: fit_fn(train) -> model, eval_fn(model, test) -> result."""
    folds = kfold_indices(data.n_rows, k, seed)
    results = []
    for f in range(k):
        test_idx = np.sort(folds[f])
        train_idx = np.sort(np.concatenate([folds[g] for g in range(k) if g != f]))
        model = fit_fn(data.take(train_idx))
        results.append(eval_fn(model, data.take(test_idx)))
    return results
