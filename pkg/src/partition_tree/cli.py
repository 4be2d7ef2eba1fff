"""Command-line interface: fit, predict, evaluate, synth, benchmark.

Exit codes: 0 success, 1 data/model errors, 2 usage errors. All randomness is
seeded; running a subcommand twice with the same flags yields byte-identical
output files (timings are printed, never written).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import shlex
import sys
import time

import numpy as np

from . import synthetic
from .data import Dataset, Schema, infer_schema, load_csv, perturb_dataset, save_csv
from .errors import PartitionTreeError
from .evaluation import (
    accuracy,
    cross_validate,
    feature_importance,
    log_loss_report,
    rmse,
)
from .forest import ForestConfig, fit_forest
from .geometry import Interval
from .splitting import FeasibilityConfig
from .tree import FitConfig, fit, load_model, save_model

METRICS = ("logloss", "rmse", "accuracy", "importance")
GENERATOR_NAMES = {
    "step-uniform": "step_uniform",
    "heteroscedastic": "heteroscedastic_sine",
    "grid": "grid",
}


def _default_threads() -> int:
    env = os.environ.get("PARTITION_TREE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _add_fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--forest", type=int, default=0, metavar="B",
                   help="fit a B-tree forest instead of a single tree")
    p.add_argument("--max-splits", type=int, default=None)
    p.add_argument("--exploration-frac", type=float, default=0.0)
    p.add_argument("--min-samples-leaf", type=float, default=1.0)
    p.add_argument("--min-samples-leaf-x", type=float, default=1.0)
    p.add_argument("--min-target-volume", type=float, default=0.0)
    p.add_argument("--expansion-factor", type=float, default=0.01)
    p.add_argument("--max-features", type=float, default=1.0)
    p.add_argument("--max-samples", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)


def _configs_from_args(args):
    fit_config = FitConfig(
        max_splits=args.max_splits,
        exploration_fraction=args.exploration_frac,
        feasibility=FeasibilityConfig(
            min_samples_leaf=args.min_samples_leaf,
            min_samples_leaf_x=args.min_samples_leaf_x,
            min_target_volume=args.min_target_volume,
        ),
        expansion_factor=args.expansion_factor,
        max_features=args.max_features,
        seed=args.seed,
    )
    if args.forest > 0:
        return ForestConfig(
            n_trees=args.forest,
            max_samples=args.max_samples,
            max_features=args.max_features,
            base=fit_config,
            seed=args.seed,
        )
    return fit_config


def _fit_model(data: Dataset, config, threads):
    if isinstance(config, ForestConfig):
        return fit_forest(data, config, threads=threads or _default_threads())
    return fit(data, config)


def _load_data_for_schema(args, parser) -> tuple[Dataset, Schema]:
    if args.schema:
        schema = Schema.load(args.schema)
    elif args.infer_schema:
        role_map = {name: "outcome" for name in args.infer_schema.split(",") if name}
        schema = infer_schema(args.data, role_map, args.categorical_threshold)
    else:
        parser.error("one of --schema or --infer-schema is required")
    return load_csv(args.data, schema), schema


def cmd_fit(args, parser) -> int:
    try:
        config = _configs_from_args(args)
    except ValueError as exc:
        parser.error(str(exc))
    data, _ = _load_data_for_schema(args, parser)
    start = time.perf_counter()
    model = _fit_model(data, config, args.threads)
    wall = time.perf_counter() - start
    save_model(model, args.out)
    rep = log_loss_report(model, data)
    if isinstance(config, ForestConfig):
        leaves = sum(t.n_leaves for t in model.trees)
    else:
        leaves = model.n_leaves
    print(f"fit leaves={leaves} train_logloss={rep.value:.6f} wall_s={wall:.3f}")
    return 0


def _load_predict_data(path, schema: Schema, need_outcomes: bool) -> tuple[Dataset, bool]:
    """Load data for prediction; outcome columns may be absent unless required."""
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh))
    missing = [c.name for c in schema.columns if c.name not in header]
    missing_outcomes = [n for n in missing if schema.columns[schema.index_of(n)].is_outcome]
    missing_covariates = [n for n in missing if n not in missing_outcomes]
    if missing_covariates:
        raise PartitionTreeError(f"covariate column {missing_covariates[0]!r} missing")
    if missing_outcomes:
        if need_outcomes:
            raise PartitionTreeError(f"outcome column {missing_outcomes[0]!r} missing")
        # parse present columns under the model schema kinds, dummy the rest
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        arrays = {}
        for spec in schema.columns:
            if spec.name in header:
                if spec.is_categorical:
                    codes = {label: k for k, label in enumerate(spec.alphabet)}
                    arrays[spec.name] = [codes[r[spec.name]] for r in rows]
                else:
                    arrays[spec.name] = [float(r[spec.name]) for r in rows]
            else:
                arrays[spec.name] = [0] * len(rows)
        return Dataset.from_arrays(schema, arrays), False
    return load_csv(path, schema), True


def _bin_record(schema: Schema, cell, value: float, mass: float) -> dict:
    y: dict = {}
    for j in schema.outcome_indices:
        spec = schema.columns[j]
        side = cell.sides[j]
        if isinstance(side, Interval):
            y[spec.name] = [side.lo, side.hi]
        else:
            y[spec.name] = sorted(spec.alphabet[c] for c in side)
    return {"y": y, "value": value, "mass": mass}


def cmd_predict(args, parser) -> int:
    model = load_model(args.model)
    schema = model.schema
    data, _ = _load_predict_data(args.data, schema, need_outcomes=args.mode == "density")
    if args.mode == "density":
        from .evaluation import conditional_density

        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["density"])
            for i in range(data.n_rows):
                row = data.row(i)
                writer.writerow([repr(conditional_density(model, row, row))])
    elif args.mode == "point":
        names = [schema.columns[j].name for j in schema.outcome_indices]
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"pred_{n}" for n in names])
            cat = schema.categorical_outcome_indices
            for i in range(data.n_rows):
                pred = model.point_predict(data.row(i))
                if cat:
                    labels = [
                        schema.columns[j].alphabet[c] for j, c in zip(cat, pred)
                    ]
                    writer.writerow(labels)
                else:
                    writer.writerow([repr(float(pred))])
    else:  # bins
        with open(args.out, "w", encoding="utf-8") as fh:
            for i in range(data.n_rows):
                pd = model.predictive_density(data.row(i))
                vals = pd.normalized_values()
                masses = pd.masses()
                record = {
                    "bins": [
                        _bin_record(schema, cell, vals[k], masses[k])
                        for k, (cell, _) in enumerate(pd.bins)
                    ],
                    "normalizer": pd.normalizer,
                    "uniform_fallback": pd.uniform_fallback,
                }
                fh.write(json.dumps(record, sort_keys=True) + "\n")
    print(f"predict mode={args.mode} rows={data.n_rows} out={args.out}")
    return 0


def _config_digest(model) -> str:
    doc = json.dumps(model.config.to_json(), sort_keys=True).encode()
    return hashlib.sha256(doc).hexdigest()[:16]


def _metric_value(name: str, model, data: Dataset):
    if name == "logloss":
        rep = log_loss_report(model, data)
        return rep.value, rep.floored_rows
    if name == "rmse":
        return rmse(model, data), 0
    if name == "accuracy":
        return accuracy(model, data), 0
    iv = feature_importance(model)
    return iv.as_dict(), 0


def cmd_evaluate(args, parser) -> int:
    names = [m for m in args.metrics.split(",") if m]
    for m in names:
        if m not in METRICS:
            parser.error(f"unknown metric {m!r} (choose from {', '.join(METRICS)})")
    if args.schema:
        schema = Schema.load(args.schema)
    elif args.model:
        schema = load_model(args.model).schema
    else:
        parser.error("--schema or --model is required")
    data = load_csv(args.data, schema)
    out = []
    if args.folds:
        fit_parser = argparse.ArgumentParser(prog="--fit-args", add_help=False)
        _add_fit_flags(fit_parser)
        fit_args = fit_parser.parse_args(shlex.split(args.fit_args or ""))
        try:
            config = _configs_from_args(fit_args)
        except ValueError as exc:
            parser.error(str(exc))

        def fit_fn(train):
            return _fit_model(train, config, fit_args.threads)

        def eval_fn(model, test):
            return {m: _metric_value(m, model, test) for m in names}

        folds = cross_validate(data, args.folds, args.seed, fit_fn, eval_fn)
        digest = hashlib.sha256(
            json.dumps(
                config.to_json() if hasattr(config, "to_json") else {}, sort_keys=True
            ).encode()
        ).hexdigest()[:16]
        for m in names:
            values = [f[m][0] for f in folds]
            floored = sum(f[m][1] for f in folds)
            agg = (
                float(np.mean(values))
                if not isinstance(values[0], dict)
                else {k: float(np.mean([v[k] for v in values])) for k in values[0]}
            )
            out.append(
                {
                    "metric": m,
                    "value": agg,
                    "folds": values,
                    "n": data.n_rows,
                    "floored_rows": floored,
                    "seed": args.seed,
                    "config_digest": digest,
                }
            )
    else:
        if not args.model:
            parser.error("--model is required without --folds")
        model = load_model(args.model)
        for m in names:
            value, floored = _metric_value(m, model, data)
            out.append(
                {
                    "metric": m,
                    "value": value,
                    "n": data.n_rows,
                    "floored_rows": floored,
                    "seed": args.seed,
                    "config_digest": _config_digest(model),
                }
            )
    text = json.dumps(out, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def cmd_synth(args, parser) -> int:
    name = GENERATOR_NAMES[args.generator]
    params = {}
    if name == "step_uniform" and args.noise_features:
        params["n_noise"] = args.noise_features
    if name == "heteroscedastic_sine" and args.sigma_lambda is not None:
        params["lam"] = args.sigma_lambda
    gen = synthetic.GENERATORS[name](**params)
    data = gen.sample(args.n, args.seed)
    descriptor = {"truth": gen.descriptor(), "n": args.n, "seed": args.seed}
    if args.redundant_k:
        data = perturb_dataset(data, "redundant_features", args.seed + 1, k=args.redundant_k)
        descriptor["perturbation"] = {"mode": "redundant_features", "k": args.redundant_k}
        descriptor["truth_valid_for_l1"] = False
    if args.noise_mode:
        data = perturb_dataset(data, args.noise_mode, args.seed + 2, lam=args.noise_lambda)
        descriptor["perturbation"] = {"mode": args.noise_mode, "lambda": args.noise_lambda}
        descriptor["truth_valid_for_l1"] = False
    save_csv(data, f"{args.out}.csv")
    data.schema.save(f"{args.out}.schema.json")
    with open(f"{args.out}.truth.json", "w", encoding="utf-8") as fh:
        json.dump(descriptor, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"synth generator={args.generator} n={data.n_rows} out={args.out}.csv")
    return 0


def cmd_benchmark(args, parser) -> int:
    sizes = [int(s) for s in args.sizes.split(",") if s]
    if not sizes:
        parser.error("--sizes needs at least one integer")
    gen = synthetic.StepUniform(n_noise=1)
    rows = []
    for n in sizes:
        data = gen.sample(n, seed=args.seed)
        times = []
        for r in range(args.repeats):
            start = time.perf_counter()
            fit(data, FitConfig(seed=args.seed + r))
            times.append(time.perf_counter() - start)
        rows.append((n, float(np.mean(times)), min(times), max(times)))
    lines = ["size,mean_s,min_s,max_s"]
    lines += [f"{n},{m:.6f},{lo:.6f},{hi:.6f}" for n, m, lo, hi in rows]
    table = "\n".join(lines)
    print(table)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(table + "\n")
    if len(rows) >= 2:
        logn = np.log([r[0] for r in rows])
        logt = np.log([r[1] for r in rows])
        slope = float(np.polyfit(logn, logt, 1)[0])
        print(f"benchmark slope={slope:.3f}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="partition-tree",
        description="Nonparametric conditional density estimation with partition trees",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a tree or forest and write a model file")
    p_fit.add_argument("--data", required=True)
    p_fit.add_argument("--schema")
    p_fit.add_argument("--infer-schema", metavar="OUTCOME_COLS",
                       help="comma-separated outcome column names; kinds are inferred")
    p_fit.add_argument("--categorical-threshold", type=int, default=20)
    p_fit.add_argument("--out", required=True)
    _add_fit_flags(p_fit)

    p_pred = sub.add_parser("predict", help="predict with a fitted model")
    p_pred.add_argument("--model", required=True)
    p_pred.add_argument("--data", required=True)
    p_pred.add_argument("--mode", choices=("density", "point", "bins"), default="point")
    p_pred.add_argument("--out", required=True)

    p_eval = sub.add_parser("evaluate", help="score a model or run cross-validation")
    p_eval.add_argument("--model")
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--schema")
    p_eval.add_argument("--metrics", default="logloss")
    p_eval.add_argument("--folds", type=int, default=0)
    p_eval.add_argument("--fit-args", default="")
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--out")

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset with known truth")
    p_synth.add_argument("--generator", choices=sorted(GENERATOR_NAMES), required=True)
    p_synth.add_argument("--n", type=int, required=True)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", required=True, metavar="PREFIX")
    p_synth.add_argument("--noise-features", type=int, default=0)
    p_synth.add_argument("--sigma-lambda", type=float, default=None,
                         help="noise scale of the heteroscedastic generator")
    p_synth.add_argument("--noise-mode", choices=("homoscedastic", "heteroscedastic"))
    p_synth.add_argument("--lambda", dest="noise_lambda", type=float, default=0.5)
    p_synth.add_argument("--redundant-k", type=int, default=0)

    p_bench = sub.add_parser("benchmark", help="measure fit time scaling")
    p_bench.add_argument("--sizes", default="10000,20000,40000,80000")
    p_bench.add_argument("--repeats", type=int, default=5)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "fit": cmd_fit,
        "predict": cmd_predict,
        "evaluate": cmd_evaluate,
        "synth": cmd_synth,
        "benchmark": cmd_benchmark,
    }
    try:
        return handlers[args.command](args, parser)
    except (PartitionTreeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
