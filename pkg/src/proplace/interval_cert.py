"""Interval abstraction of bounded parameter shifts, and robustness certification.

A shift set with magnitude delta contains every network whose parameters each
lie within +-delta of the original (infinity-norm ball in parameter space).
Interval propagation of that box through the network yields sound output
bounds; a lower bound >= 0 proves the prediction cannot flip under any
admissible shift.  Propagation is exact for one hidden layer but can be
conservative for deeper networks, so `certify_delta_robust` computes the
exact worst-case logit with a MILP and uses propagation only as an optional
fast accept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CertificationTimeoutError,
    InputShapeError,
    InternalConsistencyError,
    InvalidShiftError,
)
from .nn_core import ReluNetwork


@dataclass(frozen=True)
class ModelShiftSet:
    """All networks within +-delta of `base` on every weight and bias.

    The distance between parameter vectors is measured in the infinity
    norm; p is kept as a field for clarity but only inf is supported.
    """

    base: ReluNetwork
    delta: float
    p: float = math.inf

    def __post_init__(self):
        d = self.delta
        if isinstance(d, bool) or not isinstance(d, (int, float)):
            raise InvalidShiftError(f"shift magnitude must be a real number, got {d!r}")
        if not math.isfinite(d) or d <= 0:
            raise InvalidShiftError(f"shift magnitude must be finite and > 0, got {d}")
        if self.p != math.inf:
            raise InvalidShiftError(f"only the infinity norm is supported, got p={self.p}")
        object.__setattr__(self, "delta", float(d))


class IntervalNetwork:
    """Per-parameter interval version of a network: theta -> [lo, hi]."""

    def __init__(self, w_lo, w_hi, b_lo, b_hi):
        self.w_lo = tuple(np.asarray(w, dtype=np.float64) for w in w_lo)
        self.w_hi = tuple(np.asarray(w, dtype=np.float64) for w in w_hi)
        self.b_lo = tuple(np.asarray(b, dtype=np.float64) for b in b_lo)
        self.b_hi = tuple(np.asarray(b, dtype=np.float64) for b in b_hi)
        for lo, hi in zip(self.w_lo + self.b_lo, self.w_hi + self.b_hi):
            if lo.shape != hi.shape:
                raise InputShapeError("interval endpoints disagree on shape")
            if np.any(lo > hi):
                raise InputShapeError("interval lower bound exceeds upper bound")

    @property
    def n_layers(self):
        return len(self.w_lo)

    @property
    def input_dim(self):
        return self.w_lo[0].shape[1]

    @property
    def layer_sizes(self):
        return (self.input_dim,) + tuple(w.shape[0] for w in self.w_lo)


@dataclass(frozen=True)
class OutputBound:
    """Sound bounds on the logit over the whole shift set."""

    l: float
    u: float


@dataclass(frozen=True)
class CertificationResult:
    robust: bool
    worst_logit: float


def abstract(net, shifts):
    """Interval abstraction: every parameter becomes [theta-delta, theta+delta].

    `shifts` may be a ModelShiftSet or a bare magnitude.
    """
    delta = shifts.delta if isinstance(shifts, ModelShiftSet) else shifts
    if isinstance(delta, bool) or not isinstance(delta, (int, float)):
        raise InvalidShiftError(f"shift magnitude must be a real number, got {delta!r}")
    if not math.isfinite(delta) or delta <= 0:
        raise InvalidShiftError(f"shift magnitude must be finite and > 0, got {delta}")
    return IntervalNetwork(
        [w - delta for w in net.weights],
        [w + delta for w in net.weights],
        [b - delta for b in net.biases],
        [b + delta for b in net.biases],
    )


def interval_from_network(net):
    """Width-zero interval network (used to propagate concrete weights)."""
    return IntervalNetwork(net.weights, net.weights, net.biases, net.biases)


def _interval_affine(w_lo, w_hi, b_lo, b_hi, v_lo, v_hi):
    # bounds of W v + b over the boxes [w_lo, w_hi] x [v_lo, v_hi]
    cands = np.stack(
        [w_lo * v_lo, w_lo * v_hi, w_hi * v_lo, w_hi * v_hi]
    )
    lo = cands.min(axis=0).sum(axis=1) + b_lo
    hi = cands.max(axis=0).sum(axis=1) + b_hi
    return lo, hi


def layer_value_boxes(inet, x_lo, x_hi=None):
    """Interval forward pass.

    Returns (pre_boxes, val_boxes): per layer, bounds on the pre-activations
    and on the post-activation values.  The final entry of each list covers
    the output layer (no ReLU applied to its value box).
    """
    x_lo = np.asarray(x_lo, dtype=np.float64)
    x_hi = x_lo if x_hi is None else np.asarray(x_hi, dtype=np.float64)
    if x_lo.shape != (inet.input_dim,) or x_hi.shape != (inet.input_dim,):
        raise InputShapeError(
            f"input box has shape {x_lo.shape}, network expects ({inet.input_dim},)"
        )
    if np.any(x_lo > x_hi):
        raise InputShapeError("input box lower bound exceeds upper bound")
    v_lo, v_hi = x_lo, x_hi
    pre_boxes, val_boxes = [], []
    n = inet.n_layers
    for i in range(n):
        lo, hi = _interval_affine(
            inet.w_lo[i], inet.w_hi[i], inet.b_lo[i], inet.b_hi[i], v_lo, v_hi
        )
        pre_boxes.append((lo, hi))
        if i < n - 1:
            v_lo, v_hi = np.maximum(lo, 0.0), np.maximum(hi, 0.0)
        else:
            v_lo, v_hi = lo, hi
        val_boxes.append((v_lo, v_hi))
    return pre_boxes, val_boxes


def propagate_bounds(inet, x):
    """Sound logit bounds for a fixed input over the abstracted parameter box."""
    _, val_boxes = layer_value_boxes(inet, x)
    lo, hi = val_boxes[-1]
    return OutputBound(l=float(lo[0]), u=float(hi[0]))


def certify_delta_robust(net, shifts, x_prime, solver=None, *, fast_path=False,
                         time_limit=None):
    """Decide whether x_prime keeps class 1 under every admissible shift.

    Computes the exact minimum logit over the shift set with a MILP and
    reports robust iff that minimum is >= 0.  With fast_path=True, a
    propagation lower bound l >= 0 short-circuits the solve; worst_logit is
    then that (possibly conservative) lower bound.

    Raises CertificationTimeoutError if the solve hits time_limit: the
    outcome is then unknown, which is different from a completed solve
    returning robust=False.
    """
    if not isinstance(shifts, ModelShiftSet):
        shifts = ModelShiftSet(base=net, delta=shifts)
    inet = abstract(net, shifts)
    x_prime = np.asarray(x_prime, dtype=np.float64)
    bound = propagate_bounds(inet, x_prime)
    if fast_path and bound.l >= 0.0:
        return CertificationResult(robust=True, worst_logit=bound.l)

    from . import milp as _milp  # deferred: milp imports this module's types

    model, enc = _milp.build_worst_logit_model(inet, x_prime)
    solve = solver if solver is not None else _milp.solve
    sol = solve(model, time_limit=time_limit)
    if sol.status == "timeout":
        raise CertificationTimeoutError(
            f"certification exceeded time limit of {time_limit}s"
        )
    if sol.status != "optimal":
        raise InternalConsistencyError(
            f"worst-case logit solve returned {sol.status}; "
            "the shift box is always feasible"
        )
    worst = float(sol.objective_value)
    if worst < bound.l - 1e-6 or worst > bound.u + 1e-6:
        raise InternalConsistencyError(
            f"exact worst logit {worst} escapes propagated bounds "
            f"[{bound.l}, {bound.u}]"
        )
    return CertificationResult(robust=worst >= 0.0, worst_logit=worst)
