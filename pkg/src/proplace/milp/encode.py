"""MILP encodings of ReLU forward passes.

Two modes share the classic big-M node template (v >= 0, v <= M*gamma,
v >= pre, v <= pre + M*(1-gamma)):

* concrete weights with a fixed or variable input -- used by the outer
  search, one block per pinned model;
* an interval parameter box with a fixed input -- used to compute the exact
  worst-case logit over all admissible parameter shifts.

The interval mode rests on the reachable-set identity for row-independent
parameter boxes: given the previous layer's values v >= 0, a node's
pre-activation can be driven to any point of [W_lo v + b_lo, W_hi v + b_hi]
by an in-box parameter choice, and nothing outside it.  The worst-case
problem is therefore an exact MILP over node values, with the corner
expressions W_lo v + b_lo and W_hi v + b_hi replacing the bilinear
weight-times-value products.  Per-node big-M constants come from interval
propagation over the input box, inflated by 1.1.

Node-level bound tightening pins the binary of every sign-stable node, so
typical instances branch over a handful of genuinely ambiguous nodes only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InputShapeError, InternalConsistencyError, MilpEncodingError
from ..interval_cert import (
    IntervalNetwork,
    interval_from_network,
    layer_value_boxes,
)
from ..nn_core import ReluNetwork, forward_logit, node_values
from .model import MilpModel


@dataclass
class EncodedNetwork:
    """Bookkeeping for one encoded forward pass."""

    mode: str                   # 'concrete' | 'interval'
    prefix: str
    input_names: list | None    # variable-input mode only
    x_fixed: np.ndarray | None  # fixed-input mode only
    node_vars: list             # per hidden layer, list of value-variable names
    gamma_vars: list            # per hidden layer, list of names or None (pinned/absent)
    output_var: str
    pre_boxes: list             # per layer, (lo, hi) arrays used for the big-Ms


def _corner_consts(w_lo, w_hi, b_lo, b_hi, x):
    """Constant [lo, hi] pre-activation range when the layer input is fixed."""
    lo = np.minimum(w_lo * x, w_hi * x).sum(axis=1) + b_lo
    hi = np.maximum(w_lo * x, w_hi * x).sum(axis=1) + b_hi
    return lo, hi


def _affine_range(w, b, v_lo, v_hi):
    """Range of w.v + b over the box [v_lo, v_hi] (constant coefficients)."""
    lo = (np.where(w > 0, w * v_lo, w * v_hi)).sum(axis=1) + b
    hi = (np.where(w > 0, w * v_hi, w * v_lo)).sum(axis=1) + b
    return lo, hi


def encode_network_forward(model, net, x, prefix="n", big_m=None, input_box=None):
    """Append one forward pass to `model`; returns an EncodedNetwork.

    net: ReluNetwork (concrete weights) or IntervalNetwork (parameter box).
    x: sequence of variable names already declared in `model`, or a fixed
    vector.  input_box=(lo, hi) bounds a variable input for per-node big-M
    computation; without it, big_m must be a valid global bound on every
    |pre-activation|.  An IntervalNetwork requires a fixed input.
    """
    if isinstance(net, ReluNetwork):
        return _encode_concrete(model, net, x, prefix, big_m, input_box)
    if isinstance(net, IntervalNetwork):
        if _is_var_input(x):
            raise InputShapeError(
                "interval-parameter encoding requires a fixed input vector"
            )
        return _encode_interval(model, net, np.asarray(x, dtype=np.float64), prefix)
    raise TypeError(f"cannot encode {type(net).__name__}")


def _is_var_input(x):
    return len(x) > 0 and isinstance(next(iter(x)), str)


def _encode_concrete(model, net, x, prefix, big_m, input_box):
    d = net.input_dim
    if _is_var_input(x):
        input_names = list(x)
        if len(input_names) != d:
            raise InputShapeError(f"{len(input_names)} input vars for dimension {d}")
        x_fixed = None
        if input_box is not None:
            x_lo = np.asarray(input_box[0], dtype=np.float64)
            x_hi = np.asarray(input_box[1], dtype=np.float64)
        elif big_m is not None:
            x_lo = x_hi = None
        else:
            raise InputShapeError("variable input needs input_box or big_m")
    else:
        input_names = None
        x_fixed = np.asarray(x, dtype=np.float64)
        if x_fixed.shape != (d,):
            raise InputShapeError(f"input shape {x_fixed.shape}, expected ({d},)")
        x_lo = x_hi = x_fixed

    n_layers = len(net.weights)
    if x_lo is not None:
        pre_boxes = layer_value_boxes(interval_from_network(net), x_lo, x_hi)[0]
    else:
        pre_boxes = [
            (np.full(w.shape[0], -float(big_m)), np.full(w.shape[0], float(big_m)))
            for w in net.weights
        ]

    node_vars, gamma_vars = [], []
    prev_names = input_names
    prev_fixed = x_fixed
    for i in range(n_layers - 1):
        lo, hi = pre_boxes[i]
        v_names, g_names = [], []
        for j in range(net.weights[i].shape[0]):
            l, u = float(lo[j]), float(hi[j])
            m_node = float(big_m) if x_lo is None else 1.1 * max(abs(l), abs(u), 1e-9)
            v = model.add_var(f"{prefix}_v{i}_{j}", lb=0.0, ub=max(0.0, u))
            coeffs, const = _pre_expression(net.weights[i][j], net.biases[i][j],
                                            prev_names, prev_fixed)
            if l >= 0.0:
                g = model.add_var(f"{prefix}_g{i}_{j}", lb=1.0, ub=1.0, binary=True)
                model.add_constraint({v: 1.0, **_neg(coeffs)}, "=", const,
                                     name=f"{prefix}_eq{i}_{j}")
            elif u <= 0.0:
                g = model.add_var(f"{prefix}_g{i}_{j}", lb=0.0, ub=0.0, binary=True)
                # v's bounds are [0, 0]; nothing to add
            else:
                g = model.add_var(f"{prefix}_g{i}_{j}", binary=True)
                model.add_constraint({v: 1.0, **_neg(coeffs)}, ">=", const,
                                     name=f"{prefix}_lo{i}_{j}")
                model.add_constraint({v: 1.0, **_neg(coeffs), g: m_node}, "<=",
                                     const + m_node, name=f"{prefix}_hi{i}_{j}")
                model.add_constraint({v: 1.0, g: -m_node}, "<=", 0.0,
                                     name=f"{prefix}_on{i}_{j}")
            v_names.append(v)
            g_names.append(g)
        node_vars.append(v_names)
        gamma_vars.append(g_names)
        prev_names, prev_fixed = v_names, None

    lo, hi = pre_boxes[-1]
    out = model.add_var(f"{prefix}_out", lb=float(lo[0]), ub=float(hi[0]))
    coeffs, const = _pre_expression(net.weights[-1][0], net.biases[-1][0],
                                    prev_names, prev_fixed)
    model.add_constraint({out: 1.0, **_neg(coeffs)}, "=", const,
                         name=f"{prefix}_outdef")
    return EncodedNetwork(
        mode="concrete", prefix=prefix, input_names=input_names, x_fixed=x_fixed,
        node_vars=node_vars, gamma_vars=gamma_vars, output_var=out,
        pre_boxes=pre_boxes,
    )


def _pre_expression(w_row, bias, prev_names, prev_fixed):
    """Linear expression of a pre-activation: (coeff dict, constant)."""
    if prev_names is None:
        return {}, float(w_row @ prev_fixed + bias)
    coeffs = {}
    for k, name in enumerate(prev_names):
        if w_row[k] != 0.0:
            coeffs[name] = coeffs.get(name, 0.0) + float(w_row[k])
    return coeffs, float(bias)


def _neg(coeffs):
    return {k: -v for k, v in coeffs.items()}


def _encode_interval(model, inet, x, prefix):
    if x.shape != (inet.input_dim,):
        raise InputShapeError(f"input shape {x.shape}, expected ({inet.input_dim},)")
    pre_boxes, val_boxes = layer_value_boxes(inet, x)
    n_layers = inet.n_layers

    node_vars, gamma_vars = [], []
    prev_names = None
    prev_box = (x, x)
    for i in range(n_layers - 1):
        v_names, g_names = [], []
        if i == 0:
            # fixed input: the reachable pre-activation range is constant, so
            # each node value is simply a bounded variable
            lo, hi = _corner_consts(inet.w_lo[0], inet.w_hi[0],
                                    inet.b_lo[0], inet.b_hi[0], x)
            for j in range(lo.shape[0]):
                v = model.add_var(f"{prefix}_v0_{j}",
                                  lb=max(0.0, float(lo[j])),
                                  ub=max(0.0, float(hi[j])))
                v_names.append(v)
                g_names.append(None)
        else:
            v_lo, v_hi = prev_box
            lo_rng = _affine_range(inet.w_lo[i], inet.b_lo[i], v_lo, v_hi)
            hi_rng = _affine_range(inet.w_hi[i], inet.b_hi[i], v_lo, v_hi)
            for j in range(inet.w_lo[i].shape[0]):
                lo_coeffs = {
                    prev_names[k]: -float(inet.w_lo[i][j, k])
                    for k in range(len(prev_names))
                    if inet.w_lo[i][j, k] != 0.0
                }
                hi_coeffs = {
                    prev_names[k]: -float(inet.w_hi[i][j, k])
                    for k in range(len(prev_names))
                    if inet.w_hi[i][j, k] != 0.0
                }
                hi_min, hi_max = float(hi_rng[0][j]), float(hi_rng[1][j])
                v_ub = max(0.0, hi_max)
                v = model.add_var(f"{prefix}_v{i}_{j}", lb=0.0, ub=v_ub)
                if hi_max <= 0.0:
                    # never activates under any admissible shift
                    g_names.append(None)
                    v_names.append(v)
                    continue
                model.add_constraint({v: 1.0, **lo_coeffs}, ">=",
                                     float(inet.b_lo[i][j]),
                                     name=f"{prefix}_lo{i}_{j}")
                if hi_min >= 0.0:
                    # upper envelope relu(hi) = hi: plain linear cap
                    model.add_constraint({v: 1.0, **hi_coeffs}, "<=",
                                         float(inet.b_hi[i][j]),
                                         name=f"{prefix}_hi{i}_{j}")
                    g_names.append(None)
                else:
                    g = model.add_var(f"{prefix}_g{i}_{j}", binary=True)
                    m1 = 1.1 * (-hi_min)
                    m2 = max(1.1 * v_ub, 1e-9)
                    model.add_constraint(
                        {v: 1.0, **hi_coeffs, g: m1}, "<=",
                        float(inet.b_hi[i][j]) + m1, name=f"{prefix}_hi{i}_{j}")
                    model.add_constraint({v: 1.0, g: -m2}, "<=", 0.0,
                                         name=f"{prefix}_on{i}_{j}")
                    g_names.append(g)
                v_names.append(v)
        node_vars.append(v_names)
        gamma_vars.append(g_names)
        prev_names = v_names
        prev_box = val_boxes[i]

    # output layer: hidden values are >= 0, so the low corner of the output
    # parameters minimises the logit for every feasible v
    out_lo, out_hi = val_boxes[-1]
    out = model.add_var(f"{prefix}_out", lb=float(out_lo[0]), ub=float(out_hi[0]))
    if prev_names is None:
        lo, _ = _corner_consts(inet.w_lo[-1], inet.w_hi[-1],
                               inet.b_lo[-1], inet.b_hi[-1], x)
        model.add_constraint({out: 1.0}, "=", float(lo[0]), name=f"{prefix}_outdef")
    else:
        coeffs = {
            prev_names[k]: -float(inet.w_lo[-1][0, k])
            for k in range(len(prev_names))
            if inet.w_lo[-1][0, k] != 0.0
        }
        model.add_constraint({out: 1.0, **coeffs}, "=", float(inet.b_lo[-1][0]),
                             name=f"{prefix}_outdef")
    return EncodedNetwork(
        mode="interval", prefix=prefix, input_names=None, x_fixed=x,
        node_vars=node_vars, gamma_vars=gamma_vars, output_var=out,
        pre_boxes=pre_boxes,
    )


def build_worst_logit_model(inet, x, name="worst_logit"):
    """MILP whose optimum is the exact minimum logit over the parameter box."""
    model = MilpModel(name=name)
    enc = encode_network_forward(model, inet, x, prefix="w")
    model.set_objective({enc.output_var: 1.0}, "min")
    return model, enc


def extract_worst_network(inet, x, enc, solution):
    """Recover in-box parameters realising the solved worst-case node values.

    Each node's pre-activation is matched by interpolating between the low
    and high corner of its row's parameter box; inactive nodes sit at the
    low corner, which the value constraints guarantee is non-positive.
    Cross-checks the rebuilt network's forward pass against the solve.
    """
    x = np.asarray(x, dtype=np.float64)
    weights, biases = [], []
    prev = x
    for i in range(inet.n_layers - 1):
        v_sol = np.array([solution.values[name] for name in enc.node_vars[i]])
        lo_w = np.where(prev >= 0, inet.w_lo[i], inet.w_hi[i])
        hi_w = np.where(prev >= 0, inet.w_hi[i], inet.w_lo[i])
        lo = lo_w @ prev + inet.b_lo[i]
        hi = hi_w @ prev + inet.b_hi[i]
        span = hi - lo
        target = np.clip(v_sol, lo, hi)
        off = (v_sol <= 1e-9) & (lo <= 1e-9)
        target = np.where(off, lo, target)
        s = np.where(span > 1e-15, (target - lo) / np.where(span > 1e-15, span, 1.0), 0.0)
        weights.append(lo_w + s[:, None] * (hi_w - lo_w))
        biases.append(inet.b_lo[i] + s * (inet.b_hi[i] - inet.b_lo[i]))
        prev = np.maximum(target, 0.0)
    lo_w = np.where(prev >= 0, inet.w_lo[-1], inet.w_hi[-1])
    weights.append(lo_w)
    biases.append(inet.b_lo[-1].copy())

    worst = ReluNetwork(weights, biases)
    achieved = forward_logit(worst, x)
    if abs(achieved - solution.objective_value) > 1e-5:
        raise InternalConsistencyError(
            f"reconstructed worst model attains {achieved}, "
            f"solver reported {solution.objective_value}"
        )
    return worst


def check_relu_semantics(net, x_value, enc, solution, tol=1e-5):
    """Verify a concrete-mode solve respects true ReLU semantics.

    Recomputes all node values from the network equations at the solved
    input and compares; a violation beyond tol means an undersized big-M.
    """
    true_vals = node_values(net, x_value)
    for i, names in enumerate(enc.node_vars):
        got = np.array([solution.values[n] for n in names])
        if np.max(np.abs(got - true_vals[i])) > tol:
            raise MilpEncodingError(
                f"layer {i} node values drift {np.max(np.abs(got - true_vals[i])):.2e} "
                "from ReLU semantics; big-M too small"
            )
    out_got = solution.values[enc.output_var]
    if abs(out_got - true_vals[-1][0]) > tol:
        raise MilpEncodingError(
            f"output {out_got} vs recomputed {true_vals[-1][0]}; big-M too small"
        )
