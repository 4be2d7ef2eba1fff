"""Bagging ensembles of partition trees with conditional-density averaging.

Every tree shares one truncation box built from the full dataset, so the B
per-query slice densities live on a common domain. The forest's unnormalized
density is the plain average of the per-tree densities; normalization happens
after averaging.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset, Schema
from .errors import ModelFormatError, ResourceLimitError
from .geometry import Cell, Interval, OutcomeBox, build_outcome_box
from .tree import (
    MODEL_FORMAT_VERSION,
    FitConfig,
    PartitionTree,
    PredictiveDensity,
    _merge_rows,
    _point_predict,
    fit,
)

REFINEMENT_BIN_CAP = 10**6


@dataclass(frozen=True)
class ForestConfig:
    """Ensemble parameters: tree count, bootstrap fraction, feature fraction."""

    n_trees: int = 25
    max_samples: float = 1.0
    max_features: float = 1.0
    base: FitConfig = field(default_factory=FitConfig)
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if not 0.0 < self.max_samples <= 1.0:
            raise ValueError("max_samples must lie in (0, 1]")
        if not 0.0 < self.max_features <= 1.0:
            raise ValueError("max_features must lie in (0, 1]")

    def to_json(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_samples": self.max_samples,
            "max_features": self.max_features,
            "base": self.base.to_json(),
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ForestConfig":
        return cls(
            n_trees=doc["n_trees"],
            max_samples=doc["max_samples"],
            max_features=doc["max_features"],
            base=FitConfig.from_json(doc["base"]),
            seed=doc["seed"],
        )


def _fit_one(data: Dataset, box, config: ForestConfig, b: int, identity: bool):
    """Fit tree b on its bootstrap draw; the stream depends only on (seed, b)."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=config.seed, spawn_key=(b,)))
    n = data.n_rows
    if identity:
        weights = np.ones(n)
    else:
        m = math.ceil(config.max_samples * n)
        draws = rng.integers(0, n, size=m)
        weights = np.bincount(draws, minlength=n).astype(np.float64)
    tree_config = replace(config.base, max_features=config.max_features)
    return fit(data, tree_config, weights=weights, box=box, rng=rng)


def fit_forest(
    data: Dataset,
    config: ForestConfig | None = None,
    *,
    threads: int | None = None,
    _identity_bootstrap: bool = False,
) -> "PartitionForest":
    """Fit B trees on seeded bootstrap draws sharing one outcome box.

    ``_identity_bootstrap`` is a test hook replacing each draw with the full
    sample at unit weight.
    """
    config = config or ForestConfig()
    if data.n_rows == 0:
        raise ValueError("cannot fit on an empty dataset")
    box = build_outcome_box(data, config.base.expansion_factor)
    ids = list(range(config.n_trees))
    if threads is not None and threads > 1 and config.n_trees > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(
                pool.map(lambda b: _fit_one(data, box, config, b, _identity_bootstrap), ids)
            )
    else:
        trees = [_fit_one(data, box, config, b, _identity_bootstrap) for b in ids]
    return PartitionForest(schema=data.schema, trees=trees, box=box, config=config)


@dataclass
class PartitionForest:
    """A fitted ensemble; predicts by averaging unnormalized densities."""

    schema: Schema
    trees: list[PartitionTree]
    box: OutcomeBox
    config: ForestConfig

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def density(self, z: tuple) -> float:
        return sum(t.density(z) for t in self.trees) / self.n_trees

    def slice_normalizer(self, x: tuple) -> float:
        return sum(t.slice_normalizer(x) for t in self.trees) / self.n_trees

    def log_density(self, x: tuple, y: tuple) -> float:
        floor = self.config.base.density_floor
        z = _merge_rows(self.schema, x, y)
        if not self.box.contains_y(z):
            return math.log(floor)
        norm = self.slice_normalizer(x)
        if norm <= 0.0:
            val = 1.0 / self.box.volume()
        else:
            val = self.density(z) / norm
        return math.log(max(val, floor))

    def predictive_density(self, x: tuple) -> PredictiveDensity:
        """Average the per-tree slice histograms on their common refinement.

        Merged breakpoints per continuous outcome coordinate and singleton
        categories form a grid that refines every tree's slice partition, so
        averaging is exact (no quadrature).
        """
        per_tree = [t.predictive_density(x) for t in self.trees]
        axes = []  # per outcome coordinate: list of (side, representative)
        n_bins = 1
        for j in self.schema.outcome_indices:
            spec = self.schema.columns[j]
            if spec.is_categorical:
                entries = [(frozenset({c}), c) for c in range(len(spec.alphabet))]
            else:
                edges = {self.box.sides[j].lo, self.box.sides[j].hi}
                for pd in per_tree:
                    for cell, _ in pd.bins:
                        side = cell.sides[j]
                        edges.add(side.lo)
                        edges.add(side.hi)
                sorted_edges = sorted(edges)
                entries = []
                for lo, hi in zip(sorted_edges, sorted_edges[1:]):
                    itv = Interval(lo, hi, closed_hi=hi == self.box.sides[j].hi)
                    entries.append((itv, lo + 0.5 * (hi - lo)))
            axes.append((j, entries))
            n_bins *= len(entries)
            if n_bins > REFINEMENT_BIN_CAP:
                raise ResourceLimitError(
                    f"refinement would need {n_bins} bins (cap {REFINEMENT_BIN_CAP})"
                )

        template = list(self.box.root_cell().sides)
        bins = []
        normalizer = 0.0
        reps = [None] * len(self.schema.columns)

        def rec(axis: int, sides: list):
            nonlocal normalizer
            if axis == len(axes):
                cell = Cell(self.schema, tuple(sides))
                z = tuple(reps)
                value = sum(pd.pdf_unnormalized(z) for pd in per_tree) / len(per_tree)
                bins.append((cell, value))
                vol = 1.0
                for j, _ in axes:
                    side = sides[j]
                    vol *= side.length if isinstance(side, Interval) else 1.0
                normalizer += value * vol
                return
            j, entries = axes[axis]
            for side, rep in entries:
                sides[j] = side
                reps[j] = rep
                rec(axis + 1, sides)

        rec(0, template)
        return PredictiveDensity(
            x=x,
            bins=bins,
            normalizer=normalizer,
            box_volume=self.box.volume(),
            uniform_fallback=normalizer <= 0.0,
        )

    def point_predict(self, x: tuple):
        return _point_predict(self.schema, self.predictive_density(x))

    def to_json(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "forest",
            "schema": self.schema.to_json(),
            "outcome_box": self.box.to_json(),
            "config": self.config.to_json(),
            "trees": [t.to_json() for t in self.trees],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "PartitionForest":
        try:
            version = doc["format_version"]
        except (KeyError, TypeError):
            raise ModelFormatError("model document lacks format_version")
        if version != MODEL_FORMAT_VERSION:
            raise ModelFormatError(f"unsupported model format_version {version!r}")
        try:
            schema = Schema.from_json(doc["schema"])
            box = OutcomeBox.from_json(schema, doc["outcome_box"])
            config = ForestConfig.from_json(doc["config"])
            trees = [PartitionTree.from_json(t) for t in doc["trees"]]
            return cls(schema=schema, trees=trees, box=box, config=config)
        except ModelFormatError:
            raise
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"malformed forest document: {exc}")

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "PartitionForest":
        from .tree import load_model

        model = load_model(path)
        if not isinstance(model, cls):
            raise ModelFormatError("model file does not contain a forest")
        return model
