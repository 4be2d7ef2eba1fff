"""Shared fixtures: random leaf contexts and independent brute-force oracles.

The oracles below recount child statistics per candidate from scratch (boolean
masks, no prefix sums) and evaluate the gain with their own copy of the
formula, so they are independent of the scanned implementation they check.
"""

import math

import numpy as np
import pytest

from partition_tree.data import ColumnSpec, Dataset, Schema


def oracle_term(n_xy, n_x, mu, n_total):
    if n_xy == 0:
        return 0.0
    return (n_xy / n_total) * math.log(n_xy / (n_x * mu))


def oracle_gain(parent, children, n_total):
    """parent/children as (n_xy, n_x, mu) triples."""
    return sum(oracle_term(*c, n_total) for c in children) - oracle_term(
        *parent, n_total
    )


def oracle_best_threshold(
    vals_x,
    w_x,
    vals_xy,
    w_xy,
    *,
    is_x,
    mu_parent,
    y_lo=0.0,
    y_hi=0.0,
    min_nxy=1.0,
    min_nx=1.0,
    min_len=0.0,
    n_total=None,
):
    """Exhaustive per-threshold recount; returns (gain, threshold) or None."""
    n_x_tot = float(np.sum(w_x))
    n_xy_tot = float(np.sum(w_xy))
    parent = (n_xy_tot, n_x_tot, mu_parent)
    base = np.unique(vals_x) if is_x else np.unique(vals_xy)
    best = None
    for a, b in zip(base, base[1:]):
        t = (a + b) / 2.0
        if not (a < t < b):
            continue
        nxy_l = float(np.sum(w_xy[vals_xy < t]))
        nxy_r = n_xy_tot - nxy_l
        if is_x:
            nx_l = float(np.sum(w_x[vals_x < t]))
            nx_r = n_x_tot - nx_l
            if nx_l <= 0 or nx_r <= 0 or nx_l < min_nx or nx_r < min_nx:
                continue
            mu_l = mu_r = mu_parent
        else:
            nx_l = nx_r = n_x_tot
            if n_x_tot <= 0 or n_x_tot < min_nx:
                continue
            d_l, d_r = t - y_lo, y_hi - t
            if d_l <= 0 or d_r <= 0 or d_l < min_len or d_r < min_len:
                continue
            mu_l = (mu_parent / (y_hi - y_lo)) * d_l
            mu_r = (mu_parent / (y_hi - y_lo)) * d_r
        if nxy_l < min_nxy or nxy_r < min_nxy:
            continue
        g = oracle_gain(parent, [(nxy_l, nx_l, mu_l), (nxy_r, nx_r, mu_r)], n_total)
        if best is None or g > best[0]:
            best = (g, t)
    return best


def oracle_best_subset_x(a, b, cats, mu_parent, n_total, min_nxy=1.0, min_nx=1.0):
    """Exhaustive bipartition max gain for a covariate subset split."""
    m = len(cats)
    n_x_tot = float(np.sum(b))
    n_xy_tot = float(np.sum(a))
    parent = (n_xy_tot, n_x_tot, mu_parent)
    best = None
    for mask in range(1, 2 ** (m - 1)):
        left = [i for i in range(m) if (mask >> i) & 1]
        right = [i for i in range(m) if not (mask >> i) & 1]
        a_l, b_l = float(np.sum(a[left])), float(np.sum(b[left]))
        a_r, b_r = n_xy_tot - a_l, n_x_tot - b_l
        if b_l <= 0 or b_r <= 0 or b_l < min_nx or b_r < min_nx:
            continue
        if a_l < min_nxy or a_r < min_nxy:
            continue
        g = oracle_gain(
            parent, [(a_l, b_l, mu_parent), (a_r, b_r, mu_parent)], n_total
        )
        if best is None or g > best:
            best = g
        _ = right
    return best


def oracle_best_subset_y(a, cats, mu_parent, n_x, n_total, min_nxy=1.0):
    """Exhaustive bipartition max gain for an outcome subset split."""
    m = len(cats)
    mu_other = mu_parent / m
    n_xy_tot = float(np.sum(a))
    parent = (n_xy_tot, n_x, mu_parent)
    best = None
    for mask in range(1, 2 ** (m - 1)):
        left = [i for i in range(m) if (mask >> i) & 1]
        a_l = float(np.sum(a[left]))
        a_r = n_xy_tot - a_l
        if a_l < min_nxy or a_r < min_nxy:
            continue
        mu_l = mu_other * len(left)
        mu_r = mu_parent - mu_l
        g = oracle_gain(parent, [(a_l, n_x, mu_l), (a_r, n_x, mu_r)], n_total)
        if best is None or g > best:
            best = g
    return best


@pytest.fixture
def tiny_mixed_dataset():
    schema = Schema(
        (
            ColumnSpec("x1", "covariate"),
            ColumnSpec("c1", "covariate", alphabet=("a", "b", "c")),
            ColumnSpec("y", "outcome"),
            ColumnSpec("k", "outcome", alphabet=("u", "v")),
        )
    )
    rng = np.random.default_rng(7)
    n = 40
    return Dataset.from_arrays(
        schema,
        {
            "x1": rng.normal(size=n),
            "c1": rng.integers(0, 3, size=n),
            "y": rng.uniform(0, 2, size=n),
            "k": rng.integers(0, 2, size=n),
        },
    )


def random_leaf_context(rng, max_n=200):
    """A random consistent leaf: values, weights, joint membership, parent stats."""
    n = int(rng.integers(5, max_n + 1))
    vals = rng.choice(
        [lambda s: rng.normal(size=s), lambda s: rng.integers(0, 8, size=s).astype(float)]
    )(n)
    weights = rng.choice([np.ones(n), rng.integers(1, 4, size=n).astype(float)])
    joint = rng.random(n) < rng.uniform(0.3, 1.0)
    if not joint.any():
        joint[int(rng.integers(n))] = True
    return vals, weights, joint
