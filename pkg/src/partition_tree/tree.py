"""Joint-space partition trees: growth, density evaluation, serialization.

A fitted tree is a binary tree of one-coordinate tests over the joint
covariate-outcome space. Leaves carry weighted counts and the outcome volume
of their cell, which is all the density estimator needs: the unnormalized
density on a leaf is n_xy / (n_x * mu_y), zero outside the truncation box.
For a fixed covariate point the leaves whose X-projection contains it induce
a histogram over the outcome box; normalizing that histogram's integral
yields the predictive conditional density.

Growth runs in two phases under a global split budget: first an optional
block of diameter-driven exploration splits of the largest populated leaf,
then gain-driven splits chosen through a priority queue of leaves keyed by
their best achievable gain (only the split leaf's entry is recomputed after
each split). Exploitation stops early once no leaf admits a feasible split
with strictly positive gain.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, Schema
from .errors import ModelFormatError, UnsupportedModeError
from .geometry import (
    INF,
    Cell,
    CellStats,
    Interval,
    OutcomeBox,
    build_outcome_box,
    diameter,
    mu_y,
    phi,
)
from .splitting import FeasibilityConfig, GainRecord, SplitSpec, best_split, empirical_gain

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class FitConfig:
    """Tree-growth parameters.

    ``max_splits`` is the global budget k; when None it defaults to
    floor(N**0.4). ``exploration_fraction`` alpha turns floor(alpha * k) of
    the budget into diameter-driven exploration splits, performed first.
    """

    max_splits: int | None = None
    exploration_fraction: float = 0.0
    feasibility: FeasibilityConfig = field(default_factory=FeasibilityConfig)
    expansion_factor: float = 0.01
    max_features: float = 1.0
    seed: int = 0
    density_floor: float = 1e-12

    def __post_init__(self):
        if self.max_splits is not None and self.max_splits < 0:
            raise ValueError("max_splits must be >= 0")
        if not 0.0 <= self.exploration_fraction <= 1.0:
            raise ValueError("exploration_fraction must lie in [0, 1]")
        if not 0.0 < self.max_features <= 1.0:
            raise ValueError("max_features must lie in (0, 1]")
        if self.expansion_factor < 0.0:
            raise ValueError("expansion_factor must be >= 0")
        if not self.density_floor > 0.0:
            raise ValueError("density_floor must be > 0")

    def to_json(self) -> dict:
        return {
            "max_splits": self.max_splits,
            "exploration_fraction": self.exploration_fraction,
            "min_samples_leaf": self.feasibility.min_samples_leaf,
            "min_samples_leaf_x": self.feasibility.min_samples_leaf_x,
            "min_target_volume": self.feasibility.min_target_volume,
            "expansion_factor": self.expansion_factor,
            "max_features": self.max_features,
            "seed": self.seed,
            "density_floor": self.density_floor,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "FitConfig":
        return cls(
            max_splits=doc["max_splits"],
            exploration_fraction=doc["exploration_fraction"],
            feasibility=FeasibilityConfig(
                min_samples_leaf=doc["min_samples_leaf"],
                min_samples_leaf_x=doc["min_samples_leaf_x"],
                min_target_volume=doc["min_target_volume"],
            ),
            expansion_factor=doc["expansion_factor"],
            max_features=doc["max_features"],
            seed=doc["seed"],
            density_floor=doc["density_floor"],
        )


class LeafNode:
    __slots__ = ("cell", "stats")

    def __init__(self, cell: Cell, stats: CellStats):
        self.cell = cell
        self.stats = stats

    @property
    def value(self) -> float:
        if self.stats.n_xy == 0.0:
            return 0.0
        return self.stats.n_xy / (self.stats.n_x * self.stats.mu_y)


class SplitNode:
    __slots__ = ("split", "left", "right", "gain")

    def __init__(self, split: SplitSpec, left, right, gain: float):
        self.split = split
        self.left = left
        self.right = right
        self.gain = gain


@dataclass
class PredictiveDensity:
    """Piecewise-constant conditional density over the outcome box for one query.

    ``bins`` holds (cell, unnormalized value); the cells' Y-projections tile
    the truncation box. When every slice leaf is empty of joint samples the
    normalizer is zero and the density falls back to uniform over the box,
    with ``uniform_fallback`` set.
    """

    x: tuple
    bins: list
    normalizer: float
    box_volume: float
    uniform_fallback: bool

    def bin_volume(self, i: int) -> float:
        cell = self.bins[i][0]
        out = 1.0
        for _, side in cell.y_sides():
            out *= side.length if isinstance(side, Interval) else float(len(side))
        return out

    def normalized_values(self) -> list[float]:
        if self.uniform_fallback:
            return [1.0 / self.box_volume for _ in self.bins]
        return [v / self.normalizer for _, v in self.bins]

    def masses(self) -> list[float]:
        vals = self.normalized_values()
        return [v * self.bin_volume(i) for i, v in enumerate(vals)]

    def _bin_index(self, y_row: tuple) -> int:
        for i, (cell, _) in enumerate(self.bins):
            ok = True
            for j, side in cell.y_sides():
                v = y_row[j]
                if isinstance(side, Interval):
                    if not side.contains(float(v)):
                        ok = False
                        break
                elif int(v) not in side:
                    ok = False
                    break
            if ok:
                return i
        return -1

    def pdf(self, y_row: tuple) -> float:
        """Normalized density at one outcome point (0 outside the box)."""
        i = self._bin_index(y_row)
        if i < 0:
            return 0.0
        if self.uniform_fallback:
            return 1.0 / self.box_volume
        return self.bins[i][1] / self.normalizer

    def pdf_unnormalized(self, y_row: tuple) -> float:
        """Raw (pre-normalization) bin value at one outcome point."""
        i = self._bin_index(y_row)
        return 0.0 if i < 0 else self.bins[i][1]


class _BuildLeaf:
    """Mutable leaf record used during growth; becomes a LeafNode afterwards."""

    __slots__ = ("cell", "stats", "idx_x", "idx_xy", "seq", "replacement")

    def __init__(self, cell, stats, idx_x, idx_xy, seq):
        self.cell = cell
        self.stats = stats
        self.idx_x = idx_x
        self.idx_xy = idx_xy
        self.seq = seq
        self.replacement = None  # (spec, gain, left _BuildLeaf, right _BuildLeaf)


def _route_mask(spec: SplitSpec, values: np.ndarray) -> np.ndarray:
    if spec.subset is not None:
        lut = np.zeros(int(values.max(initial=0)) + 1, dtype=bool) if values.size else None
        if lut is None:
            return np.zeros(0, dtype=bool)
        for c in spec.subset:
            if c < len(lut):
                lut[c] = True
        return lut[values]
    if spec.closed:
        return values <= spec.threshold
    return values < spec.threshold


def _child_cells(cell: Cell, spec: SplitSpec) -> tuple[Cell, Cell]:
    side = cell.sides[spec.column]
    if spec.subset is not None:
        left_side = frozenset(spec.subset)
        right_side = side - left_side
        return cell.replace_side(spec.column, left_side), cell.replace_side(
            spec.column, right_side
        )
    left_itv, right_itv = side.split_at(spec.threshold, closed=spec.closed)
    return cell.replace_side(spec.column, left_itv), cell.replace_side(
        spec.column, right_itv
    )


class _Builder:
    def __init__(self, data, weights, box, config, n_total, rng):
        self.data = data
        self.weights = weights
        self.box = box
        self.config = config
        self.n_total = n_total
        self.rng = rng
        self.leaves: list[_BuildLeaf] = []
        self.next_seq = 0
        self.n_splits = 0
        self.n_exploration = 0

    def new_leaf(self, cell, stats, idx_x, idx_xy) -> _BuildLeaf:
        leaf = _BuildLeaf(cell, stats, idx_x, idx_xy, self.next_seq)
        self.next_seq += 1
        return leaf

    def child_stats(self, leaf: _BuildLeaf, spec: SplitSpec, idx_xy_l, idx_xy_r, idx_x_l):
        w = self.weights
        n_xy_l = float(w[idx_xy_l].sum())
        n_xy_r = leaf.stats.n_xy - n_xy_l
        if spec.is_outcome:
            n_x_l = n_x_r = leaf.stats.n_x
            side = leaf.cell.sides[spec.column]
            if spec.subset is not None:
                mu_other = leaf.stats.mu_y / len(side)
                mu_l = mu_other * len(spec.subset)
            else:
                mu_l = (leaf.stats.mu_y / side.length) * (spec.threshold - side.lo)
            mu_r = leaf.stats.mu_y - mu_l
        else:
            n_x_l = float(w[idx_x_l].sum())
            n_x_r = leaf.stats.n_x - n_x_l
            mu_l = mu_r = leaf.stats.mu_y
        return CellStats(n_xy_l, n_x_l, mu_l), CellStats(n_xy_r, n_x_r, mu_r)

    def apply_split(
        self, leaf: _BuildLeaf, spec: SplitSpec, stats_lr=None, gain=None
    ) -> tuple[_BuildLeaf, _BuildLeaf]:
        values = self.data.column(spec.column)
        mask_xy = _route_mask(spec, values[leaf.idx_xy])
        idx_xy_l = leaf.idx_xy[mask_xy]
        idx_xy_r = leaf.idx_xy[~mask_xy]
        if spec.is_outcome:
            idx_x_l = idx_x_r = leaf.idx_x
        else:
            mask_x = _route_mask(spec, values[leaf.idx_x])
            idx_x_l = leaf.idx_x[mask_x]
            idx_x_r = leaf.idx_x[~mask_x]
        if stats_lr is None:
            stats_lr = self.child_stats(leaf, spec, idx_xy_l, idx_xy_r, idx_x_l)
        if gain is None:
            gain = empirical_gain(leaf.stats, stats_lr[0], stats_lr[1], self.n_total)
        cell_l, cell_r = _child_cells(leaf.cell, spec)
        left = self.new_leaf(cell_l, stats_lr[0], idx_x_l, idx_xy_l)
        right = self.new_leaf(cell_r, stats_lr[1], idx_x_r, idx_xy_r)
        leaf.replacement = (spec, float(gain), left, right)
        self.leaves.remove(leaf)
        self.leaves.extend([left, right])
        self.n_splits += 1
        return left, right

    # -- exploration -------------------------------------------------------

    def exploration_options(self, leaf: _BuildLeaf):
        """(side measure, column, plan) per splittable coordinate of the leaf."""
        out = []
        for col, spec in enumerate(self.data.schema.columns):
            side = leaf.cell.sides[col]
            if spec.alphabet is not None:
                full = len(spec.alphabet)
                if len(side) >= 2:
                    out.append(((len(side) - 1) / (full - 1), col, "categorical"))
                continue
            if side.hi == INF:
                vals = self.data.column(col)[leaf.idx_x]
                t = float(vals.max())
                if side.lo < t < side.hi:
                    out.append((1.0, col, ("closed_max", t)))
                continue
            if side.lo == -INF:
                vals = self.data.column(col)[leaf.idx_x]
                t = float(vals.min())
                if side.lo < t < side.hi:
                    out.append((1.0, col, ("at_min", t)))
                continue
            t = side.lo + 0.5 * side.length
            if side.lo < t < side.hi:
                out.append((phi(side.length), col, ("midpoint", t)))
        return out

    def exploration_step(self) -> bool:
        """One diameter-driven split of the largest populated leaf; False if none."""
        target = None
        target_d = -1.0
        target_opts = None
        for leaf in sorted(self.leaves, key=lambda lf: lf.seq):
            if leaf.stats.n_xy <= 0.0:
                continue
            opts = self.exploration_options(leaf)
            if not opts:
                continue
            d = diameter(leaf.cell)
            if d > target_d:
                target, target_d, target_opts = leaf, d, opts
        if target is None:
            return False
        measure, col, plan = max(target_opts, key=lambda o: (o[0], -o[1]))
        spec_col = self.data.schema.columns[col]
        if plan == "categorical":
            side = sorted(target.cell.sides[col])
            pick = side[int(self.rng.integers(len(side)))]
            spec = SplitSpec(column=col, is_outcome=spec_col.is_outcome, subset=frozenset({pick}))
        elif plan[0] == "closed_max":
            spec = SplitSpec(
                column=col, is_outcome=spec_col.is_outcome, threshold=plan[1], closed=True
            )
        else:
            spec = SplitSpec(column=col, is_outcome=spec_col.is_outcome, threshold=plan[1])
        self.apply_split(target, spec)
        self.n_exploration += 1
        return True

    # -- exploitation ------------------------------------------------------

    def draw_mask(self):
        cov = self.data.schema.covariate_indices
        frac = self.config.max_features
        if frac >= 1.0 or not cov:
            return None
        m = max(1, math.ceil(frac * len(cov)))
        chosen = self.rng.choice(len(cov), size=m, replace=False)
        return {cov[i] for i in chosen}

    def leaf_entry(self, leaf: _BuildLeaf) -> GainRecord | None:
        if leaf.stats.n_x <= 0.0:
            return None
        rec = best_split(
            leaf.cell,
            leaf.stats,
            leaf.idx_x,
            leaf.idx_xy,
            self.data,
            self.weights,
            self.config.feasibility,
            self.box,
            self.n_total,
            feature_mask=self.draw_mask(),
        )
        if rec is None or rec.gain <= 0.0:
            return None
        return rec

    def exploit(self, budget: int) -> None:
        heap = []
        counter = 0
        for leaf in self.leaves:
            rec = self.leaf_entry(leaf)
            if rec is not None:
                heapq.heappush(heap, (-rec.gain, leaf.seq, counter, leaf, rec))
                counter += 1
        while budget > 0 and heap:
            _, _, _, leaf, rec = heapq.heappop(heap)
            left, right = self.apply_split(
                leaf, rec.split, (rec.left_stats, rec.right_stats), rec.gain
            )
            budget -= 1
            for child in (left, right):
                crec = self.leaf_entry(child)
                if crec is not None:
                    heapq.heappush(heap, (-crec.gain, child.seq, counter, child, crec))
                    counter += 1


def _materialize(leaf: _BuildLeaf):
    if leaf.replacement is None:
        return LeafNode(leaf.cell, leaf.stats)
    spec, gain, left, right = leaf.replacement
    return SplitNode(spec, _materialize(left), _materialize(right), gain)


def fit(
    data: Dataset,
    config: FitConfig | None = None,
    *,
    weights: np.ndarray | None = None,
    box: OutcomeBox | None = None,
    rng: np.random.Generator | None = None,
) -> "PartitionTree":
    """Grow a partition tree on ``data``.

    ``weights`` (e.g. bootstrap multiplicities) and a pre-built shared ``box``
    are hooks for ensembles; rows with zero weight are excluded entirely.
    """
    config = config or FitConfig()
    if data.n_rows == 0:
        raise ValueError("cannot fit on an empty dataset")
    if weights is None:
        weights = np.ones(data.n_rows)
    weights = np.asarray(weights, dtype=np.float64)
    if box is None:
        box = build_outcome_box(data, config.expansion_factor)
    idx = np.flatnonzero(weights > 0.0)
    n_total = float(weights[idx].sum())
    if n_total <= 0.0:
        raise ValueError("training weight is zero")
    if rng is None:
        rng = np.random.default_rng(config.seed)

    k_n = config.max_splits
    if k_n is None:
        k_n = int(n_total**0.4)
    k_ne = int(config.exploration_fraction * k_n)

    root_cell = box.root_cell()
    builder = _Builder(data, weights, box, config, n_total, rng)
    root = builder.new_leaf(
        root_cell, CellStats(n_total, n_total, mu_y(root_cell)), idx, idx
    )
    builder.leaves.append(root)

    for _ in range(k_ne):
        if not builder.exploration_step():
            break
    builder.exploit(k_n - builder.n_splits)

    return PartitionTree(
        schema=data.schema,
        root=_materialize(root),
        box=box,
        n_train=n_total,
        config=config,
        n_exploration_splits=builder.n_exploration,
    )


@dataclass
class PartitionTree:
    """A fitted tree; immutable and safe for concurrent queries."""

    schema: Schema
    root: object
    box: OutcomeBox
    n_train: float
    config: FitConfig
    n_exploration_splits: int = 0

    # -- structure ---------------------------------------------------------

    def leaves(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, LeafNode):
                yield node
            else:
                stack.append(node.right)
                stack.append(node.left)

    def internal_nodes(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, SplitNode):
                yield node
                stack.append(node.right)
                stack.append(node.left)

    @property
    def n_leaves(self) -> int:
        return sum(1 for _ in self.leaves())

    # -- evaluation --------------------------------------------------------

    def _leaf_for(self, z: tuple) -> LeafNode:
        node = self.root
        while isinstance(node, SplitNode):
            node = node.left if node.split.goes_left(z[node.split.column]) else node.right
        return node

    def density(self, z: tuple) -> float:
        """Unnormalized piecewise-constant density at a joint point."""
        if not self.box.contains_y(z):
            return 0.0
        return self._leaf_for(z).value

    def slice_leaves(self, x: tuple):
        """Leaves whose X-projection contains ``x``; their Y-cells tile the box."""
        out = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, LeafNode):
                out.append(node)
            elif node.split.is_outcome:
                stack.append(node.right)
                stack.append(node.left)
            elif node.split.goes_left(x[node.split.column]):
                stack.append(node.left)
            else:
                stack.append(node.right)
        return out

    def predictive_density(self, x: tuple) -> PredictiveDensity:
        bins = []
        normalizer = 0.0
        for leaf in self.slice_leaves(x):
            v = leaf.value
            bins.append((leaf.cell, v))
            normalizer += v * leaf.stats.mu_y
        return PredictiveDensity(
            x=x,
            bins=bins,
            normalizer=normalizer,
            box_volume=self.box.volume(),
            uniform_fallback=normalizer <= 0.0,
        )

    def slice_normalizer(self, x: tuple) -> float:
        return sum(l.value * l.stats.mu_y for l in self.slice_leaves(x))

    def log_density(self, x: tuple, y: tuple) -> float:
        """log of the normalized predictive density at y, floored for safety."""
        floor = self.config.density_floor
        z = _merge_rows(self.schema, x, y)
        if not self.box.contains_y(z):
            return math.log(floor)
        norm = self.slice_normalizer(x)
        if norm <= 0.0:
            val = 1.0 / self.box.volume()
        else:
            val = self.density(z) / norm
        return math.log(max(val, floor))

    def point_predict(self, x: tuple):
        return _point_predict(self.schema, self.predictive_density(x))

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        nodes = []

        def visit(node) -> int:
            my_id = len(nodes)
            nodes.append(None)
            if isinstance(node, LeafNode):
                nodes[my_id] = {
                    "leaf": {
                        "n_xy": node.stats.n_xy,
                        "n_x": node.stats.n_x,
                        "mu_y": node.stats.mu_y,
                    }
                }
            else:
                spec = node.split
                test: dict = {"col": self.schema.columns[spec.column].name}
                if spec.subset is not None:
                    test["subset"] = sorted(spec.subset)
                else:
                    test["threshold"] = spec.threshold
                    if spec.closed:
                        test["closed"] = True
                left_id = visit(node.left)
                right_id = visit(node.right)
                nodes[my_id] = {
                    "split": test,
                    "gain": node.gain,
                    "left": left_id,
                    "right": right_id,
                }
            return my_id

        visit(self.root)
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "tree",
            "schema": self.schema.to_json(),
            "outcome_box": self.box.to_json(),
            "config": self.config.to_json(),
            "n_train": self.n_train,
            "n_exploration_splits": self.n_exploration_splits,
            "nodes": nodes,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "PartitionTree":
        try:
            version = doc["format_version"]
        except (KeyError, TypeError):
            raise ModelFormatError("model document lacks format_version")
        if version != MODEL_FORMAT_VERSION:
            raise ModelFormatError(f"unsupported model format_version {version!r}")
        try:
            schema = Schema.from_json(doc["schema"])
            box = OutcomeBox.from_json(schema, doc["outcome_box"])
            config = FitConfig.from_json(doc["config"])
            nodes = doc["nodes"]

            def build(node_id: int, cell: Cell):
                entry = nodes[node_id]
                if "leaf" in entry:
                    leaf = entry["leaf"]
                    return LeafNode(
                        cell, CellStats(leaf["n_xy"], leaf["n_x"], leaf["mu_y"])
                    )
                test = entry["split"]
                col = schema.index_of(test["col"])
                if "subset" in test:
                    spec = SplitSpec(
                        column=col,
                        is_outcome=schema.columns[col].is_outcome,
                        subset=frozenset(int(c) for c in test["subset"]),
                    )
                else:
                    spec = SplitSpec(
                        column=col,
                        is_outcome=schema.columns[col].is_outcome,
                        threshold=float(test["threshold"]),
                        closed=bool(test.get("closed", False)),
                    )
                cell_l, cell_r = _child_cells(cell, spec)
                return SplitNode(
                    spec,
                    build(entry["left"], cell_l),
                    build(entry["right"], cell_r),
                    float(entry["gain"]),
                )

            root = build(0, box.root_cell())
            return cls(
                schema=schema,
                root=root,
                box=box,
                n_train=float(doc["n_train"]),
                config=config,
                n_exploration_splits=int(doc.get("n_exploration_splits", 0)),
            )
        except ModelFormatError:
            raise
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"malformed model document: {exc}")

    def save(self, path) -> None:
        save_model(self, path)

    @classmethod
    def load(cls, path) -> "PartitionTree":
        model = load_model(path)
        if not isinstance(model, cls):
            raise ModelFormatError("model file does not contain a single tree")
        return model


def _merge_rows(schema: Schema, x: tuple, y: tuple) -> tuple:
    """x carries covariate entries and y outcome entries at their column slots."""
    return tuple(
        y[i] if spec.is_outcome else x[i] for i, spec in enumerate(schema.columns)
    )


def _point_predict(schema: Schema, pd: PredictiveDensity):
    cont = schema.continuous_outcome_indices
    cat = schema.categorical_outcome_indices
    if len(cont) == 1 and not cat:
        j = cont[0]
        masses = pd.masses()
        total = 0.0
        for i, (cell, _) in enumerate(pd.bins):
            side = cell.sides[j]
            total += masses[i] * (side.lo + 0.5 * side.length)
        return total
    if cat and not cont:
        vals = pd.normalized_values()
        best = None
        for i, (cell, _) in enumerate(pd.bins):
            rep = tuple(min(cell.sides[j]) for j in cat)
            key = (-vals[i], rep)
            if best is None or key < best[0]:
                best = (key, rep)
        return best[1]
    raise UnsupportedModeError(
        "point prediction requires a single continuous outcome or an all-categorical outcome"
    )


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_json(), fh, sort_keys=True)
        fh.write("\n")


def load_model(path):
    from .forest import PartitionForest

    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})")
    if not isinstance(doc, dict):
        raise ModelFormatError(f"{path}: model document must be a JSON object")
    kind = doc.get("kind")
    if kind == "tree":
        return PartitionTree.from_json(doc)
    if kind == "forest":
        return PartitionForest.from_json(doc)
    raise ModelFormatError(f"{path}: unknown model kind {kind!r}")
