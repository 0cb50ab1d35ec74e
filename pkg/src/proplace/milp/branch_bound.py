"""Branch-and-bound over LP relaxations.

Best-first search; branches on the most fractional binary (ties to the
lowest variable index); children inherit the parent's LP bound for pruning.
Absolute optimality gap 1e-6.  A time limit returns the best incumbent
found so far with status 'timeout'.
"""

from __future__ import annotations

import heapq
import math
import time

import numpy as np

from ..errors import InternalConsistencyError
from .model import MilpModel, MilpSolution
from .simplex import solve_lp

GAP = 1e-6
INT_TOL = 1e-6


def _model_arrays(model):
    n = model.n_vars
    c = np.zeros(n)
    sign = 1.0 if model.objective_sense == "min" else -1.0
    for name, coeff in model.objective.items():
        c[model.variables[name].index] = sign * coeff
    m = len(model.constraints)
    A = np.zeros((m, n))
    b = np.zeros(m)
    senses = []
    for i, con in enumerate(model.constraints):
        for name, coeff in con.coeffs.items():
            A[i, model.variables[name].index] += coeff
        b[i] = con.rhs
        senses.append(con.sense)
    lb = np.array([model.variables[v].lb for v in model.var_order])
    ub = np.array([model.variables[v].ub for v in model.var_order])
    binaries = [model.variables[v].index for v in model.binary_names]
    return c, A, senses, b, lb, ub, binaries, sign


def solve(model, time_limit=None):
    """Solve a MilpModel to global optimality (absolute gap 1e-6)."""
    if not isinstance(model, MilpModel):
        raise TypeError(f"expected MilpModel, got {type(model).__name__}")
    c, A, senses, b, lb, ub, binaries, sign = _model_arrays(model)
    deadline = None if time_limit is None else time.monotonic() + float(time_limit)

    def wrap(status, x=None, obj=None, root=None):
        values = {}
        if x is not None:
            values = {name: float(x[i]) for i, name in enumerate(model.var_order)}
        return MilpSolution(
            status=status,
            values=values,
            objective_value=None if obj is None else sign * obj,
            root_relaxation=None if root is None else sign * root,
        )

    root = solve_lp(c, A, senses, b, lb, ub)
    if root.status == "infeasible":
        return wrap("infeasible")
    if root.status == "unbounded":
        return wrap("unbounded")
    if not binaries:
        return wrap("optimal", root.x, root.objective, root=root.objective)
    root_bound = root.objective

    incumbent = None
    incumbent_obj = math.inf
    # heap entries: (parent LP bound, insertion counter, bounds overrides)
    counter = 0
    heap = []

    def push(bound, fixed):
        nonlocal counter
        heapq.heappush(heap, (bound, counter, fixed))
        counter += 1

    def polish(res, node_lb, node_ub):
        # re-solve with every binary pinned to its rounded value, so the
        # stored incumbent is exactly integral rather than within INT_TOL
        xs = res.x[binaries]
        rounded = np.round(xs)
        if np.array_equal(xs, rounded):
            return res
        plb, pub = node_lb.copy(), node_ub.copy()
        plb[binaries] = rounded
        pub[binaries] = rounded
        return solve_lp(c, A, senses, b, plb, pub)

    def process(res, node_lb, node_ub):
        """Either record an integral incumbent or queue two children."""
        nonlocal incumbent, incumbent_obj
        xs = res.x[binaries]
        frac = np.minimum(xs, 1.0 - xs)
        worst = int(np.argmax(frac))
        if frac[worst] <= INT_TOL:
            exact = polish(res, node_lb, node_ub)
            if exact.status == "optimal":
                if exact.objective < incumbent_obj - 1e-12:
                    incumbent = exact.x.copy()
                    incumbent_obj = exact.objective
                return None
            if frac[worst] > 0.0:
                # integrality was a tolerance artefact; branch for real
                return binaries[worst]
            raise InternalConsistencyError(
                "integral LP solution infeasible with binaries pinned"
            )
        return binaries[worst]

    first_branch = process(root, lb, ub)
    if first_branch is not None:
        push(root.objective, ((first_branch, 0.0), ))
        push(root.objective, ((first_branch, 1.0), ))

    timed_out = False
    while heap:
        bound, _, fixed = heapq.heappop(heap)
        if bound >= incumbent_obj - GAP:
            break  # best-first: every queued node is at least this weak
        if deadline is not None and time.monotonic() > deadline:
            timed_out = True
            break
        node_lb = lb.copy()
        node_ub = ub.copy()
        for idx, val in fixed:
            node_lb[idx] = val
            node_ub[idx] = val
        res = solve_lp(c, A, senses, b, node_lb, node_ub)
        if res.status == "infeasible":
            continue
        if res.status == "unbounded":
            raise InternalConsistencyError(
                "child LP unbounded although the root relaxation was bounded"
            )
        if res.objective >= incumbent_obj - GAP:
            continue
        branch_var = process(res, node_lb, node_ub)
        if branch_var is not None:
            push(res.objective, fixed + ((branch_var, 0.0),))
            push(res.objective, fixed + ((branch_var, 1.0),))

    if incumbent is not None:
        status = "timeout" if timed_out else "optimal"
        return wrap(status, incumbent, incumbent_obj, root=root_bound)
    if timed_out:
        return MilpSolution(status="timeout", root_relaxation=sign * root_bound)
    return wrap("infeasible", root=root_bound)
