"""Typed column-store datasets with covariate/outcome roles and CSV ingestion."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, SchemaError, UnsupportedModeError

ROLE_COVARIATE = "covariate"
ROLE_OUTCOME = "outcome"


@dataclass(frozen=True)
class ColumnSpec:
    """One column: continuous (alphabet is None) or categorical with a fixed alphabet."""

    name: str
    role: str
    alphabet: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.role not in (ROLE_COVARIATE, ROLE_OUTCOME):
            raise SchemaError(f"column {self.name!r}: unknown role {self.role!r}")
        if self.alphabet is not None:
            if len(self.alphabet) == 0:
                raise SchemaError(f"column {self.name!r}: empty alphabet")
            if len(set(self.alphabet)) != len(self.alphabet):
                raise SchemaError(f"column {self.name!r}: duplicate alphabet labels")

    @property
    def is_categorical(self) -> bool:
        return self.alphabet is not None

    @property
    def is_outcome(self) -> bool:
        return self.role == ROLE_OUTCOME


@dataclass(frozen=True)
class Schema:
    """Ordered collection of columns; at least one outcome column is required."""

    columns: tuple[ColumnSpec, ...]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names in schema")
        if not any(c.is_outcome for c in self.columns):
            raise SchemaError("schema has no outcome column")

    def __len__(self) -> int:
        return len(self.columns)

    def index_of(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise SchemaError(f"no column named {name!r}")

    @property
    def covariate_indices(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.columns) if not c.is_outcome)

    @property
    def outcome_indices(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.columns) if c.is_outcome)

    @property
    def continuous_outcome_indices(self) -> tuple[int, ...]:
        return tuple(
            i for i, c in enumerate(self.columns) if c.is_outcome and not c.is_categorical
        )

    @property
    def categorical_outcome_indices(self) -> tuple[int, ...]:
        return tuple(
            i for i, c in enumerate(self.columns) if c.is_outcome and c.is_categorical
        )

    def to_json(self) -> dict:
        cols = []
        for c in self.columns:
            kind = "continuous" if c.alphabet is None else {"categorical": list(c.alphabet)}
            cols.append({"name": c.name, "kind": kind, "role": c.role})
        return {"columns": cols}

    @classmethod
    def from_json(cls, doc: dict) -> "Schema":
        try:
            raw = doc["columns"]
        except (KeyError, TypeError):
            raise SchemaError("schema document must contain a 'columns' list")
        cols = []
        for entry in raw:
            kind = entry["kind"]
            if kind == "continuous":
                alphabet = None
            elif isinstance(kind, dict) and "categorical" in kind:
                alphabet = tuple(str(v) for v in kind["categorical"])
            else:
                raise SchemaError(f"column {entry.get('name')!r}: bad kind {kind!r}")
            cols.append(ColumnSpec(name=entry["name"], role=entry["role"], alphabet=alphabet))
        return cls(columns=tuple(cols))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Schema":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


@dataclass(frozen=True)
class Dataset:
    """Validated column store: float64 arrays for continuous columns, int64 codes otherwise."""

    schema: Schema
    columns: tuple[np.ndarray, ...] = field(repr=False)

    def __post_init__(self):
        n = self.n_rows
        for spec, arr in zip(self.schema.columns, self.columns):
            if arr.shape != (n,):
                raise SchemaError(f"column {spec.name!r}: ragged length {arr.shape}")
            if spec.is_categorical:
                if arr.size and (arr.min() < 0 or arr.max() >= len(spec.alphabet)):
                    raise SchemaError(f"column {spec.name!r}: code out of alphabet range")
            else:
                if arr.size and not np.all(np.isfinite(arr)):
                    raise ParseError(f"column {spec.name!r}: non-finite value")
            arr.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return 0 if not self.columns else len(self.columns[0])

    def column(self, i: int) -> np.ndarray:
        return self.columns[i]

    def row(self, i: int) -> tuple:
        return tuple(col[i] for col in self.columns)

    def take(self, indices: np.ndarray) -> "Dataset":
        return Dataset(self.schema, tuple(c[indices] for c in self.columns))

    @classmethod
    def from_arrays(cls, schema: Schema, arrays: dict[str, np.ndarray]) -> "Dataset":
        cols = []
        for spec in schema.columns:
            if spec.name not in arrays:
                raise SchemaError(f"missing array for column {spec.name!r}")
            dtype = np.int64 if spec.is_categorical else np.float64
            cols.append(np.array(arrays[spec.name], dtype=dtype, copy=True))
        return cls(schema, tuple(cols))


def _parse_real(text: str, row: int, name: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"row {row}, column {name!r}: cannot parse {text!r} as a real")
    if not math.isfinite(v):
        raise ParseError(f"row {row}, column {name!r}: non-finite value {text!r}")
    return v


def load_csv(path, schema: Schema) -> Dataset:
    """Load a CSV file under a fixed schema, mapping categorical labels to codes."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file, header row required")
        positions = {}
        for spec in schema.columns:
            if spec.name not in header:
                raise SchemaError(f"{path}: column {spec.name!r} missing from header")
            positions[spec.name] = header.index(spec.name)
        code_maps = {
            c.name: {label: k for k, label in enumerate(c.alphabet)}
            for c in schema.columns
            if c.is_categorical
        }
        raw: list[list] = [[] for _ in schema.columns]
        for r, record in enumerate(reader, start=1):
            for j, spec in enumerate(schema.columns):
                pos = positions[spec.name]
                if pos >= len(record):
                    raise ParseError(f"row {r}: missing field for column {spec.name!r}")
                text = record[pos]
                if spec.is_categorical:
                    try:
                        raw[j].append(code_maps[spec.name][text])
                    except KeyError:
                        raise SchemaError(
                            f"row {r}, column {spec.name!r}: label {text!r} not in alphabet"
                        )
                else:
                    raw[j].append(_parse_real(text, r, spec.name))
    cols = tuple(
        np.asarray(raw[j], dtype=np.int64 if spec.is_categorical else np.float64)
        for j, spec in enumerate(schema.columns)
    )
    return Dataset(schema, cols)


def save_csv(data: Dataset, path) -> None:
    """Write a Dataset back to CSV (labels decoded through the alphabet)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([c.name for c in data.schema.columns])
        for i in range(data.n_rows):
            record = []
            for spec, col in zip(data.schema.columns, data.columns):
                if spec.is_categorical:
                    record.append(spec.alphabet[int(col[i])])
                else:
                    record.append(repr(float(col[i])))
            writer.writerow(record)


def infer_schema(path, role_map: dict[str, str], categorical_threshold: int = 20) -> Schema:
    """Infer column kinds from a CSV file.

    A column becomes continuous when every value parses as a real and the
    number of distinct values exceeds ``categorical_threshold``; otherwise it
    is categorical with alphabet = sorted distinct labels. Columns absent from
    ``role_map`` default to covariates.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file, header row required")
        values: list[list[str]] = [[] for _ in header]
        for r, record in enumerate(reader, start=1):
            if len(record) < len(header):
                raise ParseError(f"row {r}: missing field")
            for j in range(len(header)):
                values[j].append(record[j])
    for name in role_map:
        if name not in header:
            raise SchemaError(f"role given for column {name!r} absent from {path}")
    cols = []
    for j, name in enumerate(header):
        distinct = sorted(set(values[j]))
        numeric = True
        parsed = []
        for text in distinct:
            try:
                v = float(text)
            except ValueError:
                numeric = False
                break
            if not math.isfinite(v):
                numeric = False
                break
            parsed.append(v)
        role = role_map.get(name, ROLE_COVARIATE)
        if numeric and len(distinct) > categorical_threshold:
            cols.append(ColumnSpec(name=name, role=role))
        else:
            if numeric:
                # sort numeric-looking labels by value so e.g. "10" follows "2"
                distinct = [t for _, t in sorted(zip(parsed, distinct))]
            cols.append(ColumnSpec(name=name, role=role, alphabet=tuple(distinct)))
    return Schema(columns=tuple(cols))


def perturb_dataset(
    data: Dataset,
    mode: str,
    seed: int,
    *,
    k: int | None = None,
    lam: float | None = None,
) -> Dataset:
    """Return a perturbed copy of ``data``; the input is never mutated.

    Modes:
      - ``redundant_features``: append ``k`` continuous covariates, each a copy of a
        uniformly drawn original continuous covariate plus Gaussian noise whose
        scale is that column's mean absolute value.
      - ``homoscedastic``: add Gaussian noise to the single continuous outcome with
        sigma = lam * mean(|y|).
      - ``heteroscedastic``: add per-row Gaussian noise with sigma_i = lam * |y_i|.
    """
    rng = np.random.default_rng(seed)
    schema = data.schema
    if mode == "redundant_features":
        if k is None or k < 0:
            raise ValueError("redundant_features mode requires k >= 0")
        sources = [
            i
            for i, c in enumerate(schema.columns)
            if not c.is_outcome and not c.is_categorical
        ]
        if not sources:
            raise UnsupportedModeError("redundant_features needs a continuous covariate")
        n = data.n_rows
        new_cols = list(data.columns)
        new_specs = list(schema.columns)
        existing = {c.name for c in schema.columns}
        for i in range(k):
            src = sources[rng.integers(len(sources))]
            base = data.columns[src]
            sigma = float(np.mean(np.abs(base))) if n else 0.0
            noisy = base + rng.normal(0.0, sigma, size=n) if n else base.copy()
            name = f"{schema.columns[src].name}_redundant_{i}"
            while name in existing:
                name += "_"
            existing.add(name)
            new_specs.append(ColumnSpec(name=name, role=ROLE_COVARIATE))
            new_cols.append(np.asarray(noisy, dtype=np.float64))
        return Dataset(Schema(tuple(new_specs)), tuple(np.array(c) for c in new_cols))

    if mode in ("homoscedastic", "heteroscedastic"):
        if lam is None or lam < 0:
            raise ValueError(f"{mode} mode requires lam >= 0")
        if schema.categorical_outcome_indices or len(schema.continuous_outcome_indices) != 1:
            raise UnsupportedModeError(
                f"{mode} noise requires exactly one continuous outcome column"
            )
        yi = schema.continuous_outcome_indices[0]
        y = data.columns[yi]
        n = data.n_rows
        if lam == 0.0 or n == 0:
            noisy_y = y.copy()
        elif mode == "homoscedastic":
            sigma = lam * float(np.mean(np.abs(y)))
            noisy_y = y + rng.normal(0.0, sigma, size=n)
        else:
            noisy_y = y + rng.normal(0.0, 1.0, size=n) * (lam * np.abs(y))
        cols = tuple(
            np.asarray(noisy_y, dtype=np.float64) if j == yi else np.array(c)
            for j, c in enumerate(data.columns)
        )
        return Dataset(schema, cols)

    raise ValueError(f"unknown perturbation mode {mode!r}")
