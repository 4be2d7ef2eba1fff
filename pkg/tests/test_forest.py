import json

import numpy as np
import pytest

import partition_tree.forest as forest_mod
from partition_tree.data import ColumnSpec, Dataset, Schema
from partition_tree.errors import ResourceLimitError
from partition_tree.forest import ForestConfig, PartitionForest, fit_forest
from partition_tree.synthetic import StepUniform
from partition_tree.tree import FitConfig, fit

STEP = StepUniform()


def make_forest(n=400, b=5, seed=3, data_seed=1, **base):
    ds = STEP.sample(n, data_seed)
    cfg = ForestConfig(
        n_trees=b,
        max_samples=base.pop("max_samples", 0.9),
        base=FitConfig(max_splits=base.pop("max_splits", 8), **base),
        seed=seed,
    )
    return ds, fit_forest(ds, cfg)


class TestFitForest:
    def test_identity_bootstrap_singleton_equals_tree(self):
        ds = STEP.sample(300, 1)
        cfg = ForestConfig(n_trees=1, max_samples=1.0, base=FitConfig(max_splits=6), seed=0)
        forest = fit_forest(ds, cfg, _identity_bootstrap=True)
        tree = fit(ds, FitConfig(max_splits=6))
        rng = np.random.default_rng(0)
        for _ in range(300):
            z = (float(rng.uniform(-2, 2)), float(rng.uniform(-0.5, 2.5)))
            assert forest.density(z) == tree.density(z)

    def test_same_seed_identical_different_seed_not(self):
        _, f1 = make_forest(seed=7)
        _, f2 = make_forest(seed=7)
        _, f3 = make_forest(seed=8)
        assert json.dumps(f1.to_json(), sort_keys=True) == json.dumps(
            f2.to_json(), sort_keys=True
        )
        assert json.dumps(f1.to_json(), sort_keys=True) != json.dumps(
            f3.to_json(), sort_keys=True
        )

    def test_seed_isolation_under_b_change(self):
        ds = STEP.sample(300, 1)
        base = FitConfig(max_splits=5)
        small = fit_forest(ds, ForestConfig(n_trees=10, base=base, seed=5))
        big = fit_forest(ds, ForestConfig(n_trees=11, base=base, seed=5))
        for a, b in zip(small.trees, big.trees[:10]):
            assert json.dumps(a.to_json(), sort_keys=True) == json.dumps(
                b.to_json(), sort_keys=True
            )

    def test_threads_do_not_change_result(self):
        ds = STEP.sample(300, 1)
        cfg = ForestConfig(n_trees=6, base=FitConfig(max_splits=5), seed=2)
        sequential = fit_forest(ds, cfg, threads=1)
        threaded = fit_forest(ds, cfg, threads=4)
        assert json.dumps(sequential.to_json(), sort_keys=True) == json.dumps(
            threaded.to_json(), sort_keys=True
        )

    def test_trees_share_one_box(self):
        _, forest = make_forest(b=4)
        box = forest.box.to_json()
        for t in forest.trees:
            assert t.box.to_json() == box

    def test_empty_dataset_rejected(self):
        schema = Schema((ColumnSpec("x", "covariate"), ColumnSpec("y", "outcome")))
        ds = Dataset.from_arrays(schema, {"x": [], "y": []})
        with pytest.raises(ValueError):
            fit_forest(ds, ForestConfig(n_trees=2))


class TestForestDensity:
    def test_linearity(self):
        ds, forest = make_forest(b=7)
        rng = np.random.default_rng(9)
        for _ in range(200):
            z = (float(rng.uniform(-2, 2)), float(rng.uniform(-0.5, 2.5)))
            per_tree = [t.density(z) for t in forest.trees]
            assert abs(forest.density(z) - sum(per_tree) / len(per_tree)) <= 1e-15

    def test_outside_box_zero(self):
        _, forest = make_forest()
        assert forest.density((0.0, 1e6)) == 0.0

    def test_identical_trees_average_to_tree(self):
        ds = STEP.sample(200, 1)
        cfg = ForestConfig(n_trees=3, base=FitConfig(max_splits=4), seed=0)
        forest = fit_forest(ds, cfg, _identity_bootstrap=True)
        tree = forest.trees[0]
        z = ds.row(5)
        assert forest.density(z) == tree.density(z)


class TestForestPredictive:
    def test_refined_bins_tile_box(self):
        _, forest = make_forest(b=5, max_splits=10)
        pd = forest.predictive_density((0.3, 0.0))
        total = sum(pd.bin_volume(i) for i in range(len(pd.bins)))
        assert total == pytest.approx(forest.box.volume(), rel=1e-9)
        assert sum(pd.masses()) == pytest.approx(1.0, abs=1e-9)

    def test_pointwise_matches_density_ratio(self):
        ds, forest = make_forest(b=5, max_splits=10)
        rng = np.random.default_rng(4)
        x = 0.25
        pd = forest.predictive_density((x, 0.0))
        norm = forest.slice_normalizer((x, 0.0))
        side = forest.box.sides[1]
        for _ in range(100):
            y = float(rng.uniform(side.lo, side.hi))
            want = forest.density((x, y)) / norm
            got = pd.pdf((None, y))
            assert got == pytest.approx(want, abs=1e-12)

    def test_single_tree_forest_matches_tree_bins(self):
        ds = STEP.sample(300, 1)
        cfg = ForestConfig(n_trees=1, base=FitConfig(max_splits=6), seed=0)
        forest = fit_forest(ds, cfg, _identity_bootstrap=True)
        tree = forest.trees[0]
        x = (0.4, 0.0)
        f_pd = forest.predictive_density(x)
        t_pd = tree.predictive_density(x)
        rng = np.random.default_rng(1)
        side = forest.box.sides[1]
        for _ in range(100):
            y = (None, float(rng.uniform(side.lo, side.hi)))
            assert f_pd.pdf(y) == pytest.approx(t_pd.pdf(y), abs=1e-12)

    def test_refinement_cap_enforced(self, monkeypatch):
        _, forest = make_forest(b=4, max_splits=10)
        monkeypatch.setattr(forest_mod, "REFINEMENT_BIN_CAP", 3)
        with pytest.raises(ResourceLimitError):
            forest.predictive_density((0.1, 0.0))


class TestForestPointMetrics:
    def test_point_predict_within_box(self):
        ds, forest = make_forest(b=4, max_splits=8)
        side = forest.box.sides[1]
        for i in range(0, 50, 7):
            pred = forest.point_predict(ds.row(i))
            assert side.lo <= pred <= side.hi

    def test_rmse_runs_on_forest(self):
        from partition_tree.evaluation import rmse

        ds, forest = make_forest(n=200, b=3, max_splits=8)
        small = ds.take(np.arange(25))
        assert rmse(forest, small) < 1.0


class TestForestSerialization:
    def test_round_trip(self, tmp_path):
        _, forest = make_forest(b=4)
        path = tmp_path / "forest.json"
        forest.save(path)
        back = PartitionForest.load(path)
        rng = np.random.default_rng(2)
        for _ in range(300):
            z = (float(rng.uniform(-2, 2)), float(rng.uniform(-0.5, 2.5)))
            assert forest.density(z) == back.density(z)
