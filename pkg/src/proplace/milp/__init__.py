"""Self-contained mixed-integer linear programming layer.

A bounded-variable primal simplex solves LP relaxations; best-first
branch and bound handles binaries; encode builds ReLU-network blocks;
lpformat round-trips models through LP-format text.
"""

from .branch_bound import solve
from .encode import (
    EncodedNetwork,
    build_worst_logit_model,
    check_relu_semantics,
    encode_network_forward,
    extract_worst_network,
)
from .lpformat import export_lp, parse_lp
from .model import Constraint, MilpModel, MilpSolution, Variable
from .simplex import LpResult, solve_lp

__all__ = [
    "Constraint",
    "EncodedNetwork",
    "LpResult",
    "MilpModel",
    "MilpSolution",
    "Variable",
    "build_worst_logit_model",
    "check_relu_semantics",
    "encode_network_forward",
    "export_lp",
    "extract_worst_network",
    "parse_lp",
    "solve",
    "solve_lp",
]
