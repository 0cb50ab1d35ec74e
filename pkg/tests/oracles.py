"""Independent reference implementations used to pin expected test values.

Everything here is written against raw numpy arrays plus scipy / sklearn
primitives, never against the package under test, so a bug in the package
cannot leak into the expected values.  Where two oracle routes exist for the
same quantity (closed form vs enumeration vs LP) the tests cross-check them
against each other before trusting either.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog

# ---------------------------------------------------------------------------
# plain forward passes


def forward_logit_raw(weights, biases, x):
    """Pre-sigmoid output of a ReLU net given as raw weight / bias lists."""
    a = np.asarray(x, dtype=np.float64)
    for w, b in zip(weights[:-1], biases[:-1]):
        a = np.maximum(np.asarray(w) @ a + np.asarray(b), 0.0)
    out = np.asarray(weights[-1]) @ a + np.asarray(biases[-1])
    return float(out[0])


def first_layer_pre_bounds(w, b, delta, x):
    """Exact range of first-layer pre-activations over the parameter box.

    Each pre-activation is sum_k w_jk x_k + b_j with every parameter free in
    [theta - delta, theta + delta]; the terms are independent so the range is
    the sum of per-term ranges.
    """
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    a = (w - delta) * x
    c = (w + delta) * x
    lo = np.minimum(a, c).sum(axis=1) + b - delta
    hi = np.maximum(a, c).sum(axis=1) + b + delta
    return lo, hi


# ---------------------------------------------------------------------------
# worst-case logit over the parameter box: three routes


def worst_logit_h1_closed_form(weights, biases, delta, x):
    """Exact worst logit for a single-hidden-layer net.

    The hidden value r_j ranges over [relu(lo_j), relu(hi_j)] independently
    per unit, and the output row contributes c_j r_j with c_j free in a box,
    so the worst total is the sum of per-unit bilinear box minima (attained
    at corners) plus the low output bias.
    """
    assert len(weights) == 2
    lo, hi = first_layer_pre_bounds(weights[0], biases[0], delta, x)
    r_lo, r_hi = np.maximum(lo, 0.0), np.maximum(hi, 0.0)
    c = np.asarray(weights[1], dtype=np.float64).ravel()
    c_lo, c_hi = c - delta, c + delta
    corners = np.stack(
        [c_lo * r_lo, c_lo * r_hi, c_hi * r_lo, c_hi * r_hi]
    )
    return float(corners.min(axis=0).sum() + float(np.asarray(biases[1]).ravel()[0]) - delta)


def worst_logit_corner_enum(weights, biases, delta, x):
    """Min forward logit over every corner of the parameter box.

    Every corner is an admissible model, so this is an upper bound on the
    true worst logit for any depth, and exact for a single hidden layer
    (the logit is coordinatewise monotone in each parameter there).  Only
    usable for tiny nets: 2^P forward passes.
    """
    flat = []
    for w in weights:
        flat.extend(np.asarray(w, dtype=np.float64).ravel())
    for b in biases:
        flat.extend(np.asarray(b, dtype=np.float64).ravel())
    flat = np.asarray(flat)
    n_param = flat.size
    if n_param > 22:
        raise ValueError(f"{n_param} parameters is too many for corner enumeration")

    shapes_w = [np.asarray(w).shape for w in weights]
    shapes_b = [np.asarray(b).shape for b in biases]
    best = np.inf
    for signs in itertools.product((-1.0, 1.0), repeat=n_param):
        theta = flat + delta * np.asarray(signs)
        ws, bs, pos = [], [], 0
        for shape in shapes_w:
            size = int(np.prod(shape))
            ws.append(theta[pos : pos + size].reshape(shape))
            pos += size
        for shape in shapes_b:
            size = int(np.prod(shape))
            bs.append(theta[pos : pos + size].reshape(shape))
            pos += size
        best = min(best, forward_logit_raw(ws, bs, x))
    return best


def worst_logit_pattern_lp(weights, biases, delta, x):
    """Exact worst logit for any depth via per-activation-pattern LPs.

    Works in the space of post-ReLU node values v.  First-layer values range
    over constant boxes.  For each deeper node an ON/OFF choice is fixed by
    the pattern: ON means v equals some achievable pre-activation >= 0, OFF
    means v = 0 with the low pre-activation <= 0.  The union over patterns
    of the per-pattern polytopes is exactly the reachable set of node
    values, so the min of the LP optima is the true worst logit.
    """
    weights = [np.asarray(w, dtype=np.float64) for w in weights]
    biases = [np.asarray(b, dtype=np.float64) for b in biases]
    depth = len(weights) - 1
    widths = [w.shape[0] for w in weights[:-1]]
    total = sum(widths)
    offsets = np.cumsum([0] + widths)

    lo1, hi1 = first_layer_pre_bounds(weights[0], biases[0], delta, x)
    base_lb = np.zeros(total)
    base_ub = np.full(total, np.inf)
    base_lb[: widths[0]] = np.maximum(lo1, 0.0)
    base_ub[: widths[0]] = np.maximum(hi1, 0.0)

    c_obj = np.zeros(total)
    c_obj[offsets[depth - 1] : offsets[depth]] = weights[-1].ravel() - delta
    obj_const = float(biases[-1].ravel()[0]) - delta

    deep_nodes = [
        (layer, j) for layer in range(1, depth) for j in range(widths[layer])
    ]
    best = np.inf
    for pattern in itertools.product((0, 1), repeat=len(deep_nodes)):
        rows_ub, rhs_ub = [], []
        lb, ub = base_lb.copy(), base_ub.copy()
        for (layer, j), on in zip(deep_nodes, pattern):
            w_row = weights[layer][j]
            b_j = float(biases[layer][j])
            prev = slice(offsets[layer - 1], offsets[layer])
            idx = offsets[layer] + j
            lo_row = np.zeros(total)
            lo_row[prev] = w_row - delta
            if on:
                # v >= lo_expr  and  v <= hi_expr, v >= 0 via bounds
                row = lo_row.copy()
                row[idx] -= 1.0
                rows_ub.append(row)
                rhs_ub.append(-(b_j - delta))
                row = np.zeros(total)
                row[prev] = -(w_row + delta)
                row[idx] += 1.0
                rows_ub.append(row)
                rhs_ub.append(b_j + delta)
            else:
                # v pinned to zero, pattern feasible only if lo_expr <= 0
                lb[idx] = ub[idx] = 0.0
                rows_ub.append(lo_row)
                rhs_ub.append(-(b_j - delta))
        res = linprog(
            c_obj,
            A_ub=np.asarray(rows_ub) if rows_ub else None,
            b_ub=np.asarray(rhs_ub) if rhs_ub else None,
            bounds=list(zip(lb, ub)),
            method="highs",
        )
        if res.status == 0:
            best = min(best, res.fun + obj_const)
    assert np.isfinite(best), "no feasible activation pattern"
    return float(best)


def sample_shifted_logits(weights, biases, delta, x, n, seed):
    """Forward logits of n models sampled uniformly from the parameter box."""
    rng = np.random.default_rng(seed)
    out = np.empty(n)
    for i in range(n):
        ws = [w + rng.uniform(-delta, delta, size=np.shape(w)) for w in weights]
        bs = [b + rng.uniform(-delta, delta, size=np.shape(b)) for b in biases]
        out[i] = forward_logit_raw(ws, bs, x)
    return out


# ---------------------------------------------------------------------------
# LP / MILP references


def lp_reference(objective, senses, rows, rhs, bounds):
    """scipy answer for min objective @ x subject to rows x (senses) rhs.

    Returns (status, objective_value, x) with status in
    'optimal' / 'infeasible' / 'unbounded'.
    """
    rows = np.asarray(rows, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    a_ub, b_ub, a_eq, b_eq = [], [], [], []
    for row, sense, r in zip(rows, senses, rhs):
        if sense == "<=":
            a_ub.append(row)
            b_ub.append(r)
        elif sense == ">=":
            a_ub.append(-row)
            b_ub.append(-r)
        else:
            a_eq.append(row)
            b_eq.append(r)
    res = linprog(
        objective,
        A_ub=np.asarray(a_ub) if a_ub else None,
        b_ub=np.asarray(b_ub) if b_ub else None,
        A_eq=np.asarray(a_eq) if a_eq else None,
        b_eq=np.asarray(b_eq) if b_eq else None,
        bounds=bounds,
        method="highs",
    )
    if res.status == 0:
        return "optimal", float(res.fun), np.asarray(res.x)
    if res.status == 2:
        return "infeasible", None, None
    if res.status == 3:
        return "unbounded", None, None
    raise RuntimeError(f"scipy linprog status {res.status}: {res.message}")


def milp_reference(model):
    """Reference optimum of a MilpModel by enumerating binary assignments.

    Reads only the public plain-data attributes of the model; each assignment
    pins the binaries and hands the continuous rest to scipy.  Returns
    (status, objective_value) where status is 'optimal' / 'infeasible' /
    'unbounded'.
    """
    names = list(model.var_order)
    binaries = [n for n in names if model.variables[n].is_binary]
    if len(binaries) > 16:
        raise ValueError(f"{len(binaries)} binaries is too many to enumerate")
    col = {n: i for i, n in enumerate(names)}

    obj = np.zeros(len(names))
    for n, coeff in model.objective.items():
        obj[col[n]] = coeff
    sign = 1.0 if model.objective_sense == "min" else -1.0

    rows, senses, rhs = [], [], []
    for con in model.constraints:
        row = np.zeros(len(names))
        for n, coeff in con.coeffs.items():
            row[col[n]] = coeff
        rows.append(row)
        senses.append(con.sense)
        rhs.append(con.rhs)

    best = None
    unbounded = False
    for assignment in itertools.product((0.0, 1.0), repeat=len(binaries)):
        bounds = []
        pinned = dict(zip(binaries, assignment))
        feasible_pin = True
        for n in names:
            v = model.variables[n]
            if n in pinned:
                val = pinned[n]
                if val < v.lb - 1e-12 or val > v.ub + 1e-12:
                    feasible_pin = False
                    break
                bounds.append((val, val))
            else:
                bounds.append((v.lb, None if np.isinf(v.ub) else v.ub))
        if not feasible_pin:
            continue
        status, val, _ = lp_reference(
            sign * obj, senses, rows if rows else np.zeros((0, len(names))), rhs, bounds
        )
        if status == "unbounded":
            unbounded = True
        elif status == "optimal" and (best is None or val < best):
            best = val
    if unbounded:
        return "unbounded", None
    if best is None:
        return "infeasible", None
    return "optimal", sign * best


# ---------------------------------------------------------------------------
# neighbourhood / outlier references


def knn_reference(points, x, k):
    """Indices of the k nearest rows, ties broken by row index."""
    points = np.asarray(points, dtype=np.float64)
    d = np.linalg.norm(points - np.asarray(x), axis=1)
    order = np.lexsort((np.arange(len(points)), d))
    return list(order[:k])


def lof_reference(queries, reference, k):
    """sklearn local outlier factor of query points against a reference set."""
    from sklearn.neighbors import LocalOutlierFactor

    lof = LocalOutlierFactor(n_neighbors=k, novelty=True)
    lof.fit(np.asarray(reference, dtype=np.float64))
    return -lof.score_samples(np.atleast_2d(np.asarray(queries, dtype=np.float64)))


def logreg_accuracy(train_rows, train_labels, test_rows, test_labels):
    """Linear-baseline test accuracy used to sanity-floor the MLP trainer."""
    from sklearn.linear_model import LogisticRegression

    clf = LogisticRegression(max_iter=2000)
    clf.fit(train_rows, train_labels)
    return float(clf.score(test_rows, test_labels))


# ---------------------------------------------------------------------------
# random problem generators (seeded, shared across test modules)


def random_small_net(rng, max_hidden_total=6, d_max=3):
    """Random ReLU net with at most max_hidden_total hidden nodes."""
    d = int(rng.integers(1, d_max + 1))
    n_layers = int(rng.integers(1, 3))
    widths = []
    remaining = max_hidden_total
    for _ in range(n_layers):
        w = int(rng.integers(1, min(4, remaining) + 1))
        widths.append(w)
        remaining -= w
    sizes = [d] + widths + [1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.uniform(-1.5, 1.5, size=(fan_out, fan_in)))
        biases.append(rng.uniform(-1.0, 1.0, size=fan_out))
    return weights, biases


def random_lp(rng, n_vars=6, n_cons=5):
    """Random bounded-feasible LP in (objective, senses, rows, rhs, bounds) form."""
    obj = rng.uniform(-2.0, 2.0, size=n_vars)
    rows = rng.uniform(-1.5, 1.5, size=(n_cons, n_vars))
    x0 = rng.uniform(0.0, 1.0, size=n_vars)
    slack = rng.uniform(0.1, 1.0, size=n_cons)
    senses, rhs = [], []
    for i in range(n_cons):
        kind = rng.integers(0, 3)
        base = float(rows[i] @ x0)
        if kind == 0:
            senses.append("<=")
            rhs.append(base + slack[i])
        elif kind == 1:
            senses.append(">=")
            rhs.append(base - slack[i])
        else:
            senses.append("=")
            rhs.append(base)
    bounds = [(0.0, 2.0)] * n_vars
    return obj, senses, rows, rhs, bounds
