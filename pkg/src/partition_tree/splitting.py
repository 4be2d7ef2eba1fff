"""Candidate split enumeration and empirical log-loss gain scoring.

A split acts on a single coordinate of the joint space. Continuous
coordinates use threshold tests (left = value < t, or value <= t for the
closed splits created when bounding infinite sides); categorical coordinates
use subset tests (left = code in S). The gain of a split is the reduction in
empirical conditional negative log-likelihood: with n_xy/n_x the weighted
joint/covariate counts and mu the outcome volume of a cell,

    gain = term(left) + term(right) - term(parent),
    term(cell) = (n_xy / N) * log(n_xy / (n_x * mu)),

where a term with n_xy = 0 contributes exactly 0. Natural logarithm
throughout; the gain of an admissible split is non-negative up to float
rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log

import numpy as np

from . import kernels
from .data import Dataset
from .geometry import Cell, CellStats, Interval, OutcomeBox

EMPTY_F64 = np.empty(0, dtype=np.float64)


@dataclass(frozen=True)
class SplitSpec:
    """One-coordinate binary test. Exactly one of threshold/subset is set."""

    column: int
    is_outcome: bool
    threshold: float | None = None
    subset: frozenset[int] | None = None
    closed: bool = False  # threshold split with the left child closed at t

    def __post_init__(self):
        if (self.threshold is None) == (self.subset is None):
            raise ValueError("split needs exactly one of threshold or subset")

    @property
    def is_categorical(self) -> bool:
        return self.subset is not None

    def goes_left(self, value) -> bool:
        if self.subset is not None:
            return int(value) in self.subset
        v = float(value)
        return v <= self.threshold if self.closed else v < self.threshold


@dataclass(frozen=True)
class GainRecord:
    split: SplitSpec
    gain: float
    left_stats: CellStats
    right_stats: CellStats


@dataclass(frozen=True)
class FeasibilityConfig:
    """Minimum child sizes for a split to be admissible.

    ``min_target_volume`` is a fraction of the truncation box's side length,
    enforced per continuous outcome coordinate on both children.
    """

    min_samples_leaf: float = 1.0
    min_samples_leaf_x: float = 1.0
    min_target_volume: float = 0.0

    def __post_init__(self):
        if self.min_samples_leaf < 0 or self.min_samples_leaf_x < 0:
            raise ValueError("leaf-size minima must be >= 0")
        if not 0.0 <= self.min_target_volume < 1.0:
            raise ValueError("min_target_volume must lie in [0, 1)")


def _term(n_xy: float, n_x: float, mu: float, n_total: float) -> float:
    if n_xy == 0.0:
        return 0.0
    return (n_xy / n_total) * log(n_xy / (n_x * mu))


def empirical_gain(
    parent: CellStats, left: CellStats, right: CellStats, n_total: float
) -> float:
    """Empirical log-loss gain of splitting ``parent`` into ``left``/``right``."""
    if abs((left.n_xy + right.n_xy) - parent.n_xy) > 1e-6:
        raise ValueError(
            f"child joint counts {left.n_xy}+{right.n_xy} != parent {parent.n_xy}"
        )
    return (
        _term(left.n_xy, left.n_x, left.mu_y, n_total)
        + _term(right.n_xy, right.n_x, right.mu_y, n_total)
        - _term(parent.n_xy, parent.n_x, parent.mu_y, n_total)
    )


def _sorted_with_cum(values: np.ndarray, weights: np.ndarray):
    order = np.argsort(values, kind="stable")
    sv = np.ascontiguousarray(values[order])
    cum = np.ascontiguousarray(np.cumsum(weights[order]))
    return sv, cum


def best_continuous_split(
    column: int,
    values: np.ndarray,
    weights: np.ndarray,
    idx_x: np.ndarray,
    idx_xy: np.ndarray,
    *,
    is_outcome: bool,
    parent: CellStats,
    feas: FeasibilityConfig,
    n_total: float,
    y_interval: Interval | None = None,
    box_side_length: float | None = None,
) -> GainRecord | None:
    """Best feasible threshold split on one continuous coordinate, if any."""
    parent_term = _term(parent.n_xy, parent.n_x, parent.mu_y, n_total)
    sxy, wxy_cum = _sorted_with_cum(values[idx_xy], weights[idx_xy])
    if is_outcome:
        # the kernel only needs the total covariate weight for a Y-split;
        # pass it as a one-element prefix array
        sx = np.zeros(1)
        wx_cum = np.asarray([parent.n_x], dtype=np.float64)
        mu_rest = parent.mu_y / y_interval.length
        min_len = feas.min_target_volume * box_side_length
        found, gain, t, nx_l, nxy_l = kernels.scan_threshold(
            sx,
            wx_cum,
            sxy,
            wxy_cum,
            False,
            parent.mu_y,
            mu_rest,
            y_interval.lo,
            y_interval.hi,
            feas.min_samples_leaf,
            feas.min_samples_leaf_x,
            min_len,
            n_total,
            parent_term,
        )
        if not found:
            return None
        mu_l = mu_rest * (t - y_interval.lo)
        mu_r = mu_rest * (y_interval.hi - t)
        left = CellStats(nxy_l, parent.n_x, mu_l)
        right = CellStats(parent.n_xy - nxy_l, parent.n_x, mu_r)
    else:
        sx, wx_cum = _sorted_with_cum(values[idx_x], weights[idx_x])
        found, gain, t, nx_l, nxy_l = kernels.scan_threshold(
            sx,
            wx_cum,
            sxy,
            wxy_cum,
            True,
            parent.mu_y,
            0.0,
            0.0,
            0.0,
            feas.min_samples_leaf,
            feas.min_samples_leaf_x,
            0.0,
            n_total,
            parent_term,
        )
        if not found:
            return None
        left = CellStats(nxy_l, nx_l, parent.mu_y)
        right = CellStats(parent.n_xy - nxy_l, parent.n_x - nx_l, parent.mu_y)
    spec = SplitSpec(column=column, is_outcome=is_outcome, threshold=float(t))
    return GainRecord(spec, float(gain), left, right)


def best_categorical_split(
    column: int,
    a_counts: np.ndarray,
    b_weights: np.ndarray,
    side_codes,
    *,
    is_outcome: bool,
    parent: CellStats,
    feas: FeasibilityConfig,
    n_total: float,
) -> GainRecord | None:
    """Best subset split via the sorted-prefix scan.

    For covariate coordinates a_c/b_c are the per-category joint/covariate
    counts and only categories with b_c > 0 are scored (sample-free ones ride
    along in the left child). For outcome coordinates b_c is the per-category
    outcome volume, identical for every category of the side, so every
    category in the side is scored.
    """
    parent_term = _term(parent.n_xy, parent.n_x, parent.mu_y, n_total)
    side_sorted = sorted(side_codes)
    if is_outcome:
        m_side = len(side_sorted)
        if m_side < 2:
            return None
        mu_other = parent.mu_y / m_side
        cats = side_sorted
        a = np.asarray([a_counts[c] for c in cats], dtype=np.float64)
        b = np.full(len(cats), mu_other)
        zero_b: list[int] = []
    else:
        cats = [c for c in side_sorted if b_weights[c] > 0.0]
        zero_b = [c for c in side_sorted if b_weights[c] == 0.0]
        if len(cats) < 2:
            return None
        a = np.asarray([a_counts[c] for c in cats], dtype=np.float64)
        b = np.asarray([b_weights[c] for c in cats], dtype=np.float64)

    ratios = a / b
    order = sorted(range(len(cats)), key=lambda i: (ratios[i], cats[i]))
    a_sorted = a[order]
    b_sorted = b[order]
    a_total = float(a_sorted.sum())
    m = len(cats)

    best = None
    best_gain = 0.0
    a_l = 0.0
    b_l = 0.0
    for k in range(m - 1):
        a_l += a_sorted[k]
        b_l += b_sorted[k]
        a_r = a_total - a_l
        if a_l < feas.min_samples_leaf or a_r < feas.min_samples_leaf:
            continue
        if is_outcome:
            nx = parent.n_x
            if nx <= 0.0 or nx < feas.min_samples_leaf_x:
                continue
            mu_l = b_l
            mu_r = parent.mu_y - b_l
            left = CellStats(a_l, nx, mu_l)
            right = CellStats(a_r, nx, mu_r)
        else:
            b_r = parent.n_x - b_l
            if b_l <= 0.0 or b_r <= 0.0:
                continue
            if b_l < feas.min_samples_leaf_x or b_r < feas.min_samples_leaf_x:
                continue
            left = CellStats(a_l, b_l, parent.mu_y)
            right = CellStats(a_r, b_r, parent.mu_y)
        gain = (
            _term(left.n_xy, left.n_x, left.mu_y, n_total)
            + _term(right.n_xy, right.n_x, right.mu_y, n_total)
            - parent_term
        )
        if best is None or gain > best_gain:
            subset = frozenset(cats[i] for i in order[: k + 1]) | frozenset(zero_b)
            spec = SplitSpec(column=column, is_outcome=is_outcome, subset=subset)
            best = GainRecord(spec, float(gain), left, right)
            best_gain = gain
    return best


def best_split(
    cell: Cell,
    stats: CellStats,
    idx_x: np.ndarray,
    idx_xy: np.ndarray,
    data: Dataset,
    weights: np.ndarray,
    feas: FeasibilityConfig,
    box: OutcomeBox,
    n_total: float,
    feature_mask=None,
) -> GainRecord | None:
    """Best feasible split over all coordinates of a leaf.

    ``feature_mask`` (a set of column indices) restricts covariate
    coordinates only; outcome coordinates are always searched. Gain ties are
    broken toward the lower column index because only strictly larger gains
    replace the incumbent while scanning columns in schema order.
    """
    schema = data.schema
    best: GainRecord | None = None
    for col, spec in enumerate(schema.columns):
        if not spec.is_outcome and feature_mask is not None and col not in feature_mask:
            continue
        side = cell.sides[col]
        if spec.is_categorical:
            k_alpha = len(spec.alphabet)
            codes = data.column(col)
            a_counts = np.bincount(
                codes[idx_xy], weights=weights[idx_xy], minlength=k_alpha
            )
            if spec.is_outcome:
                b_weights = EMPTY_F64
            else:
                b_weights = np.bincount(
                    codes[idx_x], weights=weights[idx_x], minlength=k_alpha
                )
            rec = best_categorical_split(
                col,
                a_counts,
                b_weights,
                side,
                is_outcome=spec.is_outcome,
                parent=stats,
                feas=feas,
                n_total=n_total,
            )
        else:
            if spec.is_outcome and side.length <= 0.0:
                continue
            rec = best_continuous_split(
                col,
                data.column(col),
                weights,
                idx_x,
                idx_xy,
                is_outcome=spec.is_outcome,
                parent=stats,
                feas=feas,
                n_total=n_total,
                y_interval=side if spec.is_outcome else None,
                box_side_length=box.sides[col].length if spec.is_outcome else None,
            )
        if rec is not None and (best is None or rec.gain > best.gain):
            best = rec
    return best
