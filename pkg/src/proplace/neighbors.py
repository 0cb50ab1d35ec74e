"""Robust nearest neighbours and the convex plausible region.

Counterfactual search is restricted to the convex hull of the input and its
k nearest robust neighbours: candidate points come from the desired class,
ordered by euclidean distance through a kd-tree, and each is kept only if
its own prediction provably survives the parameter shift set.  The hull of
the surviving points anchors explanations to reachable, on-manifold data.
"""

from __future__ import annotations

import heapq

import numpy as np

from .errors import (
    InputShapeError,
    InsufficientRobustNeighboursError,
    NoCandidatesError,
)
from .interval_cert import (
    ModelShiftSet,
    abstract,
    certify_delta_robust,
    propagate_bounds,
)
from .milp import solve_lp
from .nn_core import Dataset

_LEAF_SIZE = 8


class _KdNode:
    __slots__ = ("lo", "hi", "axis", "split", "left", "right", "members")

    def __init__(self, lo, hi):
        self.lo = lo
        self.hi = hi
        self.axis = -1
        self.split = 0.0
        self.left = None
        self.right = None
        self.members = None  # leaf: positions into the point array


class KdTree:
    """Static kd-tree over points, with best-first incremental search."""

    def __init__(self, points, indices=None):
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[0] == 0:
            raise NoCandidatesError("kd-tree needs a non-empty 2-d point array")
        if not np.all(np.isfinite(points)):
            raise InputShapeError("kd-tree points must be finite")
        self._points = points
        if indices is None:
            self._indices = np.arange(points.shape[0])
        else:
            self._indices = np.asarray(indices, dtype=np.int64)
            if self._indices.shape != (points.shape[0],):
                raise InputShapeError("one dataset index per point required")
        self._root = self._build(np.arange(points.shape[0]))

    @property
    def n(self):
        return self._points.shape[0]

    @property
    def dim(self):
        return self._points.shape[1]

    def _build(self, members):
        pts = self._points[members]
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        node = _KdNode(lo, hi)
        spread = hi - lo
        if members.shape[0] <= _LEAF_SIZE or float(spread.max()) <= 0.0:
            node.members = members
            return node
        axis = int(np.argmax(spread))
        vals = pts[:, axis]
        split = float(np.median(vals))
        mask = vals <= split
        # median can swallow a whole side when values repeat; fall back to a leaf
        if mask.all() or not mask.any():
            node.members = members
            return node
        node.axis = axis
        node.split = split
        node.left = self._build(members[mask])
        node.right = self._build(members[~mask])
        return node

    def iter_nearest(self, x):
        """Yield (dataset_index, point, distance) in nondecreasing distance.

        Distance ties are broken by dataset index.  Traversal is best-first:
        subtree boxes and concrete points share one heap, so each point is
        surfaced as soon as no unexplored box could beat it.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise InputShapeError(f"query shape {x.shape}, tree dim {self.dim}")
        counter = 0
        heap = [(0.0, 0, counter, self._root)]
        while heap:
            dist, kind, tie, payload = heapq.heappop(heap)
            if kind == 1:
                yield tie, self._points[payload], dist
                continue
            node = payload
            if node.members is not None:
                for pos in node.members:
                    p = self._points[pos]
                    d = float(np.sqrt(((p - x) ** 2).sum()))
                    heapq.heappush(heap, (d, 1, int(self._indices[pos]), pos))
                continue
            for child in (node.left, node.right):
                gap = np.maximum(child.lo - x, 0.0) + np.maximum(x - child.hi, 0.0)
                d = float(np.sqrt((gap**2).sum()))
                counter += 1
                heapq.heappush(heap, (d, 0, counter, child))

    def nearest(self, x, k):
        """First k hits of iter_nearest as (indices, points, distances)."""
        idx, pts, dists = [], [], []
        for i, p, d in self.iter_nearest(x):
            idx.append(i)
            pts.append(p)
            dists.append(d)
            if len(idx) == k:
                break
        return np.array(idx, dtype=np.int64), np.array(pts), np.array(dists)


def build_tree(data, class_filter=None, labels=None):
    """kd-tree over dataset rows, optionally restricted to one label.

    `data` is a Dataset or a row array (then `labels` supplies the classes
    when class_filter is used).  Yielded indices refer to the original rows.
    """
    if isinstance(data, Dataset):
        rows = data.rows
        row_labels = data.labels if labels is None else labels
    else:
        rows = np.asarray(data, dtype=np.float64)
        row_labels = labels
    if class_filter is None:
        keep = np.arange(rows.shape[0])
    else:
        if row_labels is None:
            raise InputShapeError("class_filter requires labels")
        keep = np.flatnonzero(np.asarray(row_labels) == class_filter)
    if keep.shape[0] == 0:
        raise NoCandidatesError(
            f"no candidate points with label {class_filter!r}"
        )
    return KdTree(rows[keep], indices=keep)


class CachingCertifier:
    """Memoised robustness oracle for dataset points.

    Tries the interval fast path first and falls back to the exact MILP,
    recording for every queried point a sound lower bound on its worst-case
    logit over the shift set.  Repeat queries are byte-cached, so one
    instance can serve neighbour search, region construction and metrics.
    """

    def __init__(self, net, shifts, *, time_limit=None):
        if not isinstance(shifts, ModelShiftSet):
            shifts = ModelShiftSet(base=net, delta=shifts)
        self.net = net
        self.shifts = shifts
        self.time_limit = time_limit
        self._inet = abstract(net, shifts)
        self._cache = {}
        self.n_exact = 0
        self.n_fast = 0

    def __call__(self, point):
        return self.query(point)[0]

    def query(self, point):
        """(robust, worst_logit_lower_bound) for one point."""
        point = np.asarray(point, dtype=np.float64)
        key = point.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        bound = propagate_bounds(self._inet, point)
        if bound.l >= 0.0:
            self.n_fast += 1
            result = (True, float(bound.l))
        else:
            self.n_exact += 1
            res = certify_delta_robust(
                self.net, self.shifts, point, time_limit=self.time_limit
            )
            result = (res.robust, float(res.worst_logit))
        self._cache[key] = result
        return result


def robust_knn(x, k, tree, certifier):
    """k nearest tree points whose own robustness certifies.

    Walks candidates in nearness order, keeping those the certifier accepts.
    Returns (indices, points); raises InsufficientRobustNeighboursError when
    the tree is exhausted first.
    """
    if not isinstance(k, int) or isinstance(k, bool) or k < 1:
        raise InputShapeError(f"k must be a positive integer, got {k!r}")
    idx, pts = [], []
    for i, p, _ in tree.iter_nearest(x):
        if certifier(p):
            idx.append(i)
            pts.append(p)
            if len(idx) == k:
                return np.array(idx, dtype=np.int64), np.array(pts)
    raise InsufficientRobustNeighboursError(len(idx), k)


class PlausibleRegion:
    """Convex hull of finitely many vertices, queried through LPs."""

    def __init__(self, vertices):
        vertices = np.asarray(vertices, dtype=np.float64)
        if vertices.ndim != 2 or vertices.shape[0] == 0:
            raise InputShapeError("region needs a non-empty (m, d) vertex array")
        if not np.all(np.isfinite(vertices)):
            raise InputShapeError("region vertices must be finite")
        self.vertices = vertices
        self.vertices.setflags(write=False)

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def dim(self):
        return self.vertices.shape[1]

    def bounding_box(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def contains(self, point, tol=1e-7):
        """Feasibility LP: does some convex combination reproduce `point`?"""
        point = np.asarray(point, dtype=np.float64)
        if point.shape != (self.dim,):
            raise InputShapeError(f"point shape {point.shape}, region dim {self.dim}")
        m, d = self.n_vertices, self.dim
        vt = self.vertices.T  # (d, m)
        a = np.vstack([vt, vt, np.ones((1, m))])
        senses = ["<="] * d + [">="] * d + ["="]
        b = np.concatenate([point + tol, point - tol, [1.0]])
        res = solve_lp(
            np.zeros(m), a, senses, b, np.zeros(m), np.ones(m)
        )
        return res.status == "optimal"


def make_region(x, neighbour_points):
    """Region spanned by the robust neighbours plus the input itself.

    The input is appended as the final vertex so the hull always contains
    the point being explained.
    """
    x = np.asarray(x, dtype=np.float64)
    pts = np.asarray(neighbour_points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != x.shape[0]:
        raise InputShapeError("neighbour points must be (m, d) matching x")
    return PlausibleRegion(np.vstack([pts, x[None, :]]))
