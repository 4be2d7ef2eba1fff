"""Synthetic data generators with exact conditional densities.

Each generator can sample a dataset, sample covariates alone, evaluate the
true conditional density f(x, y), and integrate it over an interval, which is
what the Monte Carlo L1 oracle needs. Descriptor round-tripping lets the CLI
persist a truth alongside a generated dataset and replay it later.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .data import ColumnSpec, Dataset, Schema
from .errors import SchemaError


@dataclass(frozen=True)
class StepUniform:
    """y ~ U[0,1) left of x = 0 and U[1,2) right of it; x ~ U[-1,1).

    ``n_noise`` extra covariates are independent U[-1,1) distractors.
    """

    n_noise: int = 0

    def schema(self) -> Schema:
        cols = [ColumnSpec("x", "covariate")]
        cols += [ColumnSpec(f"noise_{i}", "covariate") for i in range(self.n_noise)]
        cols.append(ColumnSpec("y", "outcome"))
        return Schema(tuple(cols))

    def sample_x(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(-1.0, 1.0, size=(n, 1 + self.n_noise))

    def sample(self, n: int, seed: int) -> Dataset:
        rng = np.random.default_rng(seed)
        xs = self.sample_x(rng, n)
        u = rng.uniform(0.0, 1.0, size=n)
        y = np.where(xs[:, 0] < 0.0, u, 1.0 + u)
        arrays = {"x": xs[:, 0], "y": y}
        for i in range(self.n_noise):
            arrays[f"noise_{i}"] = xs[:, 1 + i]
        return Dataset.from_arrays(self.schema(), arrays)

    def _segment(self, x_row) -> tuple[float, float]:
        return (0.0, 1.0) if x_row[0] < 0.0 else (1.0, 2.0)

    def pdf(self, x_row, y: float) -> float:
        lo, hi = self._segment(x_row)
        return 1.0 if lo <= y < hi else 0.0

    def interval_mass(self, x_row, lo: float, hi: float) -> float:
        a, b = self._segment(x_row)
        return max(0.0, min(hi, b) - max(lo, a))

    def descriptor(self) -> dict:
        return {"generator": "step_uniform", "params": {"n_noise": self.n_noise}}


@dataclass(frozen=True)
class HeteroscedasticSine:
    """y = sin(2x) + truncated Gaussian noise whose scale tracks |sin(2x)|.

    x ~ U[-pi/2, pi/2); the noise sigma at x is max(lam * |sin(2x)|,
    sigma_floor) and the Gaussian is truncated at +/- trunc sigmas, so the
    conditional density is an exact truncated normal. ``n_noise`` appends
    independent U[-pi/2, pi/2) distractor covariates.
    """

    lam: float = 0.5
    sigma_floor: float = 0.05
    trunc: float = 4.0
    n_noise: int = 0

    def schema(self) -> Schema:
        cols = [ColumnSpec("x", "covariate")]
        cols += [ColumnSpec(f"noise_{i}", "covariate") for i in range(self.n_noise)]
        cols.append(ColumnSpec("y", "outcome"))
        return Schema(tuple(cols))

    def _sigma(self, m: np.ndarray) -> np.ndarray:
        return np.maximum(self.lam * np.abs(m), self.sigma_floor)

    @property
    def _z(self) -> float:
        return 2.0 * ndtr(self.trunc) - 1.0

    def sample_x(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(-math.pi / 2.0, math.pi / 2.0, size=(n, 1 + self.n_noise))

    def sample(self, n: int, seed: int) -> Dataset:
        rng = np.random.default_rng(seed)
        xs = self.sample_x(rng, n)
        m = np.sin(2.0 * xs[:, 0])
        sigma = self._sigma(m)
        eps = rng.normal(0.0, 1.0, size=n)
        bad = np.abs(eps) > self.trunc
        while bad.any():
            eps[bad] = rng.normal(0.0, 1.0, size=int(bad.sum()))
            bad = np.abs(eps) > self.trunc
        y = m + sigma * eps
        arrays = {"x": xs[:, 0], "y": y}
        for i in range(self.n_noise):
            arrays[f"noise_{i}"] = xs[:, 1 + i]
        return Dataset.from_arrays(self.schema(), arrays)

    def pdf(self, x_row, y: float) -> float:
        m = math.sin(2.0 * float(x_row[0]))
        s = max(self.lam * abs(m), self.sigma_floor)
        u = (y - m) / s
        if abs(u) > self.trunc:
            return 0.0
        return math.exp(-0.5 * u * u) / (s * math.sqrt(2.0 * math.pi) * self._z)

    def interval_mass(self, x_row, lo: float, hi: float) -> float:
        m = math.sin(2.0 * float(x_row[0]))
        s = max(self.lam * abs(m), self.sigma_floor)
        a = max((lo - m) / s, -self.trunc)
        b = min((hi - m) / s, self.trunc)
        if b <= a:
            return 0.0
        return float(ndtr(b) - ndtr(a)) / self._z

    def descriptor(self) -> dict:
        return {
            "generator": "heteroscedastic_sine",
            "params": {
                "lam": self.lam,
                "sigma_floor": self.sigma_floor,
                "trunc": self.trunc,
                "n_noise": self.n_noise,
            },
        }


@dataclass(frozen=True)
class PiecewiseConstantGrid:
    """Piecewise-constant truth on a k_x-by-k_y grid over [0,1) x [0,1).

    Per x-column bin probabilities come from a generator seeded with
    ``value_seed``, so the truth itself is reproducible.
    """

    k_x: int = 4
    k_y: int = 4
    value_seed: int = 0

    def schema(self) -> Schema:
        return Schema((ColumnSpec("x", "covariate"), ColumnSpec("y", "outcome")))

    def _probs(self) -> np.ndarray:
        rng = np.random.default_rng(self.value_seed)
        raw = rng.uniform(0.1, 1.0, size=(self.k_x, self.k_y))
        return raw / raw.sum(axis=1, keepdims=True)

    def _x_cell(self, x: float) -> int:
        return min(int(x * self.k_x), self.k_x - 1)

    def sample_x(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(0.0, 1.0, size=(n, 1))

    def sample(self, n: int, seed: int) -> Dataset:
        rng = np.random.default_rng(seed)
        xs = self.sample_x(rng, n)[:, 0]
        probs = self._probs()
        y = np.empty(n)
        for i, x in enumerate(xs):
            p = probs[self._x_cell(x)]
            b = rng.choice(self.k_y, p=p)
            y[i] = (b + rng.uniform()) / self.k_y
        return Dataset.from_arrays(self.schema(), {"x": xs, "y": y})

    def pdf(self, x_row, y: float) -> float:
        if not 0.0 <= y < 1.0:
            return 0.0
        p = self._probs()[self._x_cell(float(x_row[0]))]
        b = min(int(y * self.k_y), self.k_y - 1)
        return float(p[b] * self.k_y)

    def interval_mass(self, x_row, lo: float, hi: float) -> float:
        p = self._probs()[self._x_cell(float(x_row[0]))]
        lo = max(lo, 0.0)
        hi = min(hi, 1.0)
        total = 0.0
        for b in range(self.k_y):
            b_lo, b_hi = b / self.k_y, (b + 1) / self.k_y
            overlap = max(0.0, min(hi, b_hi) - max(lo, b_lo))
            total += overlap * p[b] * self.k_y
        return total

    def descriptor(self) -> dict:
        return {
            "generator": "grid",
            "params": {"k_x": self.k_x, "k_y": self.k_y, "value_seed": self.value_seed},
        }


GENERATORS = {
    "step_uniform": StepUniform,
    "heteroscedastic_sine": HeteroscedasticSine,
    "grid": PiecewiseConstantGrid,
}


def from_descriptor(doc: dict):
    try:
        cls = GENERATORS[doc["generator"]]
        return cls(**doc.get("params", {}))
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"bad truth descriptor: {exc}")
