"""Cells of the joint covariate-outcome space and the reference outcome measure.

A cell is a product of one side per schema column: a half-open interval
``[lo, hi)`` for continuous coordinates and a non-empty category subset for
categorical ones. Two deliberate departures from plain half-open intervals:

  - the truncation box's upper face is closed, so the max-valued training
    outcome lies inside the box;
  - a split at an empirical maximum (used to bound infinite covariate sides)
    closes the populated child's upper face and opens the empty sibling's
    lower face, keeping the two children disjoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .data import Dataset, Schema

INF = float("inf")


def phi(u: float) -> float:
    """Bounded transform u/(1+u) mapping [0, inf] onto [0, 1]."""
    if u == INF:
        return 1.0
    return u / (1.0 + u)


@dataclass(frozen=True)
class Interval:
    """One continuous side. Convention [lo, hi); flags adjust either face."""

    lo: float
    hi: float
    closed_hi: bool = False
    open_lo: bool = False

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi})")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def contains(self, v: float) -> bool:
        above = v > self.lo if self.open_lo else v >= self.lo
        below = v <= self.hi if self.closed_hi else v < self.hi
        return above and below

    def split_at(self, t: float, *, closed: bool = False) -> tuple["Interval", "Interval"]:
        """Split into (left, right) at t; ``closed`` puts t itself in the left child."""
        if not (self.lo < t < self.hi):
            raise ValueError(f"threshold {t} not inside ({self.lo}, {self.hi})")
        if closed:
            left = Interval(self.lo, t, closed_hi=True, open_lo=self.open_lo)
            right = Interval(t, self.hi, closed_hi=self.closed_hi, open_lo=True)
        else:
            left = Interval(self.lo, t, closed_hi=False, open_lo=self.open_lo)
            right = Interval(t, self.hi, closed_hi=self.closed_hi, open_lo=False)
        return left, right


@dataclass(frozen=True)
class Cell:
    """Product cell over all schema columns: Interval or frozenset of codes per column."""

    schema: Schema = field(repr=False)
    sides: tuple

    def __post_init__(self):
        for spec, side in zip(self.schema.columns, self.sides):
            if spec.is_categorical:
                if not isinstance(side, frozenset) or not side:
                    raise ValueError(f"column {spec.name!r}: empty or bad category side")
            elif not isinstance(side, Interval):
                raise ValueError(f"column {spec.name!r}: expected an Interval side")

    def replace_side(self, col: int, side) -> "Cell":
        sides = list(self.sides)
        sides[col] = side
        return Cell(self.schema, tuple(sides))

    def contains(self, z: tuple) -> bool:
        for spec, side, v in zip(self.schema.columns, self.sides, z):
            if spec.is_categorical:
                if int(v) not in side:
                    return False
            elif not side.contains(float(v)):
                return False
        return True

    def y_sides(self):
        for i in self.schema.outcome_indices:
            yield i, self.sides[i]


def mu_y(cell: Cell) -> float:
    """Reference outcome measure of the cell's Y-projection.

    Lebesgue length on continuous outcome sides times counting measure on
    categorical ones; an empty continuous part contributes a factor of 1.
    """
    out = 1.0
    for i in cell.schema.outcome_indices:
        side = cell.sides[i]
        if isinstance(side, Interval):
            out *= side.length
        else:
            out *= float(len(side))
    return out


def diameter(cell: Cell) -> float:
    """Mixed-metric diameter of the joint cell.

    phi of the Euclidean norm of all continuous side lengths (covariate and
    outcome alike), plus (|S_k|-1)/(|Sigma_k|-1) per categorical coordinate;
    singleton alphabets contribute 0. An unbounded side saturates the
    continuous term at 1.
    """
    sq = 0.0
    unbounded = False
    cat = 0.0
    for spec, side in zip(cell.schema.columns, cell.sides):
        if spec.is_categorical:
            full = len(spec.alphabet)
            if full >= 2:
                cat += (len(side) - 1) / (full - 1)
        else:
            length = side.length
            if length == INF:
                unbounded = True
            else:
                sq += length * length
    cont = 1.0 if unbounded else phi(math.sqrt(sq))
    return cont + cat


@dataclass(frozen=True)
class CellStats:
    """Leaf statistics: weighted joint count, covariate count, and outcome volume."""

    n_xy: float
    n_x: float
    mu_y: float

    def __post_init__(self):
        if not (0.0 <= self.n_xy <= self.n_x):
            raise ValueError(f"bad counts n_xy={self.n_xy}, n_x={self.n_x}")
        if not self.mu_y > 0.0:
            raise ValueError(f"mu_y must be positive, got {self.mu_y}")


@dataclass(frozen=True)
class OutcomeBox:
    """Data-dependent truncation box over the outcome coordinates."""

    schema: Schema = field(repr=False)
    sides: dict[int, Interval]  # continuous outcome column index -> padded interval

    def contains_y(self, z: tuple) -> bool:
        return all(itv.contains(float(z[i])) for i, itv in self.sides.items())

    def volume(self) -> float:
        out = 1.0
        for itv in self.sides.values():
            out *= itv.length
        for i in self.schema.categorical_outcome_indices:
            out *= float(len(self.schema.columns[i].alphabet))
        return out

    def root_cell(self) -> Cell:
        """The root of every tree: unbounded covariates times the truncation box."""
        sides = []
        for i, spec in enumerate(self.schema.columns):
            if spec.is_categorical:
                sides.append(frozenset(range(len(spec.alphabet))))
            elif spec.is_outcome:
                sides.append(self.sides[i])
            else:
                sides.append(Interval(-INF, INF))
        return Cell(self.schema, tuple(sides))

    def to_json(self) -> dict:
        return {
            "continuous": {
                self.schema.columns[i].name: [itv.lo, itv.hi] for i, itv in self.sides.items()
            }
        }

    @classmethod
    def from_json(cls, schema: Schema, doc: dict) -> "OutcomeBox":
        sides = {}
        for name, (lo, hi) in doc["continuous"].items():
            sides[schema.index_of(name)] = Interval(float(lo), float(hi), closed_hi=True)
        return cls(schema, sides)


def build_outcome_box(data: Dataset, expansion_factor: float) -> OutcomeBox:
    """Padded min/max box over continuous outcomes; full alphabets elsewhere.

    Each continuous outcome side is [min - d, max + d] with
    d = expansion_factor * (max - min); a degenerate coordinate (min == max)
    is widened to [m - 0.5, m + 0.5] so the box keeps positive volume. The
    upper face is closed so every training outcome lies inside.
    """
    if data.n_rows == 0:
        raise ValueError("outcome box undefined for an empty dataset")
    if expansion_factor < 0:
        raise ValueError("expansion_factor must be >= 0")
    sides = {}
    for i in data.schema.continuous_outcome_indices:
        col = data.column(i)
        m, big = float(col.min()), float(col.max())
        if m == big:
            sides[i] = Interval(m - 0.5, m + 0.5, closed_hi=True)
        else:
            delta = expansion_factor * (big - m)
            sides[i] = Interval(m - delta, big + delta, closed_hi=True)
    return OutcomeBox(data.schema, sides)


def contains(cell: Cell, z: tuple) -> bool:
    return cell.contains(z)
