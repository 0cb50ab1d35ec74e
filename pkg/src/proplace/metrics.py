"""Evaluation metrics for generated counterfactuals.

Four views: normalised L1 cost, plausibility as a 10-neighbour local
outlier factor against reference data, empirical validity across retrained
models (vr), and the certified worst-case validity rate over the shift set
(v-delta).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InputShapeError, InsufficientReferenceError
from .neighbors import CachingCertifier
from .nn_core import Dataset, forward_logit_batch

# stabiliser added to mean reachability before inverting, so duplicate
# clusters yield large equal densities (ratio exactly 1) instead of inf/inf
_LRD_EPS = 1e-10


def l1_distance(a, b):
    """Normalised L1: mean absolute per-feature change, in [0,1] for scaled data."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise InputShapeError(f"mismatched vectors {a.shape} vs {b.shape}")
    return float(np.abs(a - b).mean())


def _pairwise_dist(a, b):
    sq = (a**2).sum(axis=1)[:, None] + (b**2).sum(axis=1)[None, :] - 2.0 * (a @ b.T)
    return np.sqrt(np.maximum(sq, 0.0))


def _as_rows(reference):
    if isinstance(reference, Dataset):
        return reference.rows
    return np.asarray(reference, dtype=np.float64)


def local_outlier_factor(points, reference, k=10):
    """LOF of each point against a reference sample (novelty convention).

    Scores near 1 mean the point sits in reference-density territory;
    larger means more isolated.  Needs at least k+1 reference points so
    every reference point has k neighbours besides itself.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    reference = _as_rows(reference)
    if reference.ndim != 2 or points.shape[1] != reference.shape[1]:
        raise InputShapeError("reference must be (m, d) matching the points")
    m = reference.shape[0]
    if m < k + 1:
        raise InsufficientReferenceError(
            f"LOF with k={k} needs at least {k + 1} reference points, got {m}"
        )

    # reference-internal k-NN (self excluded)
    dref = _pairwise_dist(reference, reference)
    np.fill_diagonal(dref, np.inf)
    nbr = np.argpartition(dref, k - 1, axis=1)[:, :k]
    ndist = np.take_along_axis(dref, nbr, axis=1)
    order = np.argsort(ndist, axis=1)
    nbr = np.take_along_axis(nbr, order, axis=1)
    ndist = np.take_along_axis(ndist, order, axis=1)
    k_dist = ndist[:, -1]
    reach = np.maximum(ndist, k_dist[nbr])
    lrd_ref = 1.0 / (reach.mean(axis=1) + _LRD_EPS)

    # query points against the reference
    dq = _pairwise_dist(points, reference)
    qnbr = np.argpartition(dq, k - 1, axis=1)[:, :k]
    qdist = np.take_along_axis(dq, qnbr, axis=1)
    qorder = np.argsort(qdist, axis=1)
    qnbr = np.take_along_axis(qnbr, qorder, axis=1)
    qdist = np.take_along_axis(qdist, qorder, axis=1)
    qreach = np.maximum(qdist, k_dist[qnbr])
    lrd_q = 1.0 / (qreach.mean(axis=1) + _LRD_EPS)
    return lrd_ref[qnbr].mean(axis=1) / lrd_q


def lof10(point, reference):
    """10-neighbour LOF of a single point."""
    return float(local_outlier_factor(np.atleast_2d(point), reference, k=10)[0])


def validity_rate(ce_set, retrained):
    """Percentage of (CE, model) pairs still classified 1."""
    points = np.atleast_2d(np.asarray(ce_set, dtype=np.float64))
    if not retrained:
        raise InputShapeError("validity_rate needs at least one model")
    hits = [forward_logit_batch(m, points) >= 0.0 for m in retrained]
    return float(np.mean(hits) * 100.0)


def v_delta_rate(ce_set, net, shifts, *, certifier=None):
    """Percentage of CEs whose class-1 prediction certifies over the shifts."""
    points = np.atleast_2d(np.asarray(ce_set, dtype=np.float64))
    if certifier is None:
        certifier = CachingCertifier(net, shifts)
    robust = [certifier(p) for p in points]
    return float(np.mean(robust) * 100.0)


@dataclass(frozen=True)
class MetricsReport:
    """Aggregate scores plus the per-CE records they average."""

    n_instances: int
    vr_percent: float
    v_delta_percent: float
    l1_mean: float
    lof_mean: float
    per_instance: list = field(default_factory=list)

    def to_json(self):
        """Canonical JSON: sorted keys, no volatile fields, trailing newline."""
        payload = {
            "n_instances": int(self.n_instances),
            "vr_percent": float(self.vr_percent),
            "v_delta_percent": float(self.v_delta_percent),
            "l1_mean": float(self.l1_mean),
            "lof_mean": float(self.lof_mean),
            "per_instance": self.per_instance,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    def to_table(self):
        rows = [
            ("vr %", f"{self.vr_percent:.2f}"),
            ("v-delta %", f"{self.v_delta_percent:.2f}"),
            ("l1 mean", f"{self.l1_mean:.6f}"),
            ("lof mean", f"{self.lof_mean:.6f}"),
            ("instances", f"{self.n_instances}"),
        ]
        width = max(len(name) for name, _ in rows)
        vwidth = max(len(val) for _, val in rows)
        lines = [f"{name:<{width}}  {val:>{vwidth}}" for name, val in rows]
        return "\n".join(lines) + "\n"


def compute_report(originals, counterfactuals, *, retrained_models, net, shifts,
                   reference, k=10, certifier=None):
    """Assemble the full report for a batch of explanations."""
    originals = np.atleast_2d(np.asarray(originals, dtype=np.float64))
    counterfactuals = np.atleast_2d(np.asarray(counterfactuals, dtype=np.float64))
    if originals.shape != counterfactuals.shape:
        raise InputShapeError("originals and counterfactuals must align")
    if certifier is None:
        certifier = CachingCertifier(net, shifts)
    l1s = np.abs(originals - counterfactuals).mean(axis=1)
    lofs = local_outlier_factor(counterfactuals, reference, k=k)
    valid = np.array(
        [forward_logit_batch(m, counterfactuals) >= 0.0 for m in retrained_models]
    )
    robust = np.array([certifier(p) for p in counterfactuals])
    per_instance = [
        {
            "l1": float(l1s[i]),
            "lof": float(lofs[i]),
            "vr_percent": float(valid[:, i].mean() * 100.0),
            "v_delta_percent": 100.0 if robust[i] else 0.0,
        }
        for i in range(originals.shape[0])
    ]
    return MetricsReport(
        n_instances=originals.shape[0],
        vr_percent=float(valid.mean() * 100.0),
        v_delta_percent=float(robust.mean() * 100.0),
        l1_mean=float(l1s.mean()),
        lof_mean=float(lofs.mean()),
        per_instance=per_instance,
    )
