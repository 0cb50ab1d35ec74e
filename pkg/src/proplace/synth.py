"""Deterministic synthetic datasets for demos and tests.

Both generators emit features already inside [0,1] and shuffle rows with
the seed, so splitting a dataset in half yields balanced classes.
"""

from __future__ import annotations

import numpy as np

from .errors import InputShapeError
from .nn_core import Dataset


def _finish(rows, labels, seed, names):
    perm = np.random.default_rng(seed + 1).permutation(rows.shape[0])
    return Dataset(rows[perm], labels[perm], names)


def two_blobs(n=200, seed=0, centers=((0.25, 0.25), (0.75, 0.75)), spread=0.08):
    """Two well-separated gaussian clusters, class 0 then class 1."""
    if n < 2:
        raise InputShapeError(f"need at least 2 points, got {n}")
    rng = np.random.default_rng(seed)
    n0 = n // 2
    n1 = n - n0
    c0 = np.asarray(centers[0], dtype=np.float64)
    c1 = np.asarray(centers[1], dtype=np.float64)
    rows = np.vstack(
        [
            rng.normal(c0, spread, size=(n0, c0.shape[0])),
            rng.normal(c1, spread, size=(n1, c1.shape[0])),
        ]
    )
    rows = np.clip(rows, 0.0, 1.0)
    labels = np.concatenate([np.zeros(n0, dtype=int), np.ones(n1, dtype=int)])
    return _finish(rows, labels, seed, ("x1", "x2"))


def two_moons(n=200, seed=0, noise=0.05):
    """Two interleaved half-circles, min-max scaled into [0,1]."""
    if n < 2:
        raise InputShapeError(f"need at least 2 points, got {n}")
    rng = np.random.default_rng(seed)
    n0 = n // 2
    n1 = n - n0
    t0 = np.linspace(0.0, np.pi, n0)
    t1 = np.linspace(0.0, np.pi, n1)
    upper = np.column_stack([np.cos(t0), np.sin(t0)])
    lower = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    rows = np.vstack([upper, lower]) + rng.normal(0.0, noise, size=(n, 2))
    lo, hi = rows.min(axis=0), rows.max(axis=0)
    rows = (rows - lo) / np.where(hi > lo, hi - lo, 1.0)
    rows = np.clip(rows, 0.0, 1.0)
    labels = np.concatenate([np.zeros(n0, dtype=int), np.ones(n1, dtype=int)])
    return _finish(rows, labels, seed, ("x1", "x2"))
