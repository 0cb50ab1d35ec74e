"""Solver-agnostic MILP container.

Linear objective, linear constraints over continuous and binary variables.
The model is plain data: building it performs validation only, solving and
file export live in sibling modules.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_SENSES = ("<=", ">=", "=")


@dataclass(frozen=True)
class Variable:
    name: str
    index: int
    lb: float
    ub: float
    is_binary: bool


@dataclass(frozen=True)
class Constraint:
    name: str
    coeffs: dict
    sense: str
    rhs: float


@dataclass
class MilpSolution:
    """Outcome of a solve.

    status is one of 'optimal', 'infeasible', 'unbounded', 'timeout'.
    values maps every variable name to its assignment (empty unless an
    incumbent exists).  root_relaxation is the LP-relaxation optimum at the
    root node, when one was solved to optimality.
    """

    status: str
    values: dict = field(default_factory=dict)
    objective_value: float | None = None
    root_relaxation: float | None = None


class MilpModel:
    def __init__(self, name="model"):
        self.name = name
        self.variables = {}
        self.var_order = []
        self.constraints = []
        self.objective = {}
        self.objective_sense = "min"

    def add_var(self, name, lb=0.0, ub=math.inf, binary=False):
        """Declare a variable; binary variables are clipped into [0, 1]."""
        if not _NAME_RE.match(name):
            raise ValueError(f"invalid variable name {name!r}")
        if name in self.variables:
            raise ValueError(f"duplicate variable {name!r}")
        lb, ub = float(lb), float(ub)
        if math.isnan(lb) or math.isnan(ub):
            raise ValueError(f"NaN bound on {name!r}")
        if binary:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        if lb > ub:
            raise ValueError(f"empty bound interval [{lb}, {ub}] on {name!r}")
        self.variables[name] = Variable(
            name=name, index=len(self.var_order), lb=lb, ub=ub, is_binary=binary
        )
        self.var_order.append(name)
        return name

    def add_constraint(self, coeffs, sense, rhs, name=None):
        if sense not in _SENSES:
            raise ValueError(f"constraint sense must be one of {_SENSES}, got {sense!r}")
        rhs = float(rhs)
        if not math.isfinite(rhs):
            raise ValueError(f"non-finite rhs {rhs}")
        clean = {}
        for var, coeff in coeffs.items():
            if var not in self.variables:
                raise ValueError(f"constraint references undeclared variable {var!r}")
            coeff = float(coeff)
            if not math.isfinite(coeff):
                raise ValueError(f"non-finite coefficient on {var!r}")
            clean[var] = coeff
        if name is None:
            name = f"c{len(self.constraints)}"
        elif not _NAME_RE.match(name):
            raise ValueError(f"invalid constraint name {name!r}")
        self.constraints.append(Constraint(name=name, coeffs=clean, sense=sense, rhs=rhs))
        return name

    def set_objective(self, coeffs, sense="min"):
        if sense not in ("min", "max"):
            raise ValueError(f"objective sense must be 'min' or 'max', got {sense!r}")
        clean = {}
        for var, coeff in coeffs.items():
            if var not in self.variables:
                raise ValueError(f"objective references undeclared variable {var!r}")
            coeff = float(coeff)
            if not math.isfinite(coeff):
                raise ValueError(f"non-finite objective coefficient on {var!r}")
            clean[var] = coeff
        self.objective = clean
        self.objective_sense = sense

    @property
    def n_vars(self):
        return len(self.var_order)

    @property
    def binary_names(self):
        return [n for n in self.var_order if self.variables[n].is_binary]

    def __repr__(self):
        n_bin = len(self.binary_names)
        return (
            f"MilpModel({self.name!r}, {self.n_vars} vars "
            f"({n_bin} binary), {len(self.constraints)} constraints)"
        )
