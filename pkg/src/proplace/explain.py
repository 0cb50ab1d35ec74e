"""Bi-level search for provably robust, plausible counterfactuals.

A counterfactual must reach class 1 with margin sigma under the worst
parameter shift in the admissible box, while staying inside the convex hull
of the input and its robust neighbours and moving as little as possible in
normalised L1.  The worst case over a continuum of models is handled by a
cutting-plane loop: the outer MILP minimises distance subject to the margin
holding for a finite, growing set of pinned models; the inner MILP then
finds the true worst model at the proposed point.  If that model still
clears sigma (within slack t) the point is provably robust and the loop
stops; otherwise the model joins the cut set and the outer problem repeats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CertificationTimeoutError,
    InputShapeError,
    InternalConsistencyError,
    NoCandidatesError,
    NoFeasibleCeError,
    NonConvergenceError,
)
from .interval_cert import ModelShiftSet, abstract, certify_delta_robust
from .milp import (
    MilpModel,
    build_worst_logit_model,
    check_relu_semantics,
    encode_network_forward,
    extract_worst_network,
    solve,
)
from .neighbors import (
    CachingCertifier,
    PlausibleRegion,
    build_tree,
    make_region,
    robust_knn,
)
from .nn_core import Dataset, forward_logit, predict_class_batch


@dataclass
class ProplaceConfig:
    """Knobs of the search.

    delta bounds each parameter's shift; k robust neighbours span the
    plausible region; sigma is the required worst-case margin and t the
    convergence slack (sigma > t > 0); max_iters caps cutting-plane rounds.
    """

    delta: float = 0.05
    k: int = 10
    sigma: float = 1e-4
    t: float = 1e-5
    max_iters: int = 50
    time_limit: float | None = None

    def __post_init__(self):
        if isinstance(self.delta, bool) or not isinstance(self.delta, (int, float)):
            raise InputShapeError(f"delta must be a real number, got {self.delta!r}")
        if not math.isfinite(self.delta) or self.delta <= 0:
            raise InputShapeError(f"delta must be finite and > 0, got {self.delta}")
        if not isinstance(self.k, int) or isinstance(self.k, bool) or self.k < 1:
            raise InputShapeError(f"k must be a positive integer, got {self.k!r}")
        if not (0.0 < self.t < self.sigma):
            raise InputShapeError(
                f"need sigma > t > 0, got sigma={self.sigma}, t={self.t}"
            )
        if not math.isfinite(self.sigma):
            raise InputShapeError("sigma must be finite")
        if not isinstance(self.max_iters, int) or self.max_iters < 1:
            raise InputShapeError(
                f"max_iters must be a positive integer, got {self.max_iters!r}"
            )
        if self.time_limit is not None and not self.time_limit > 0:
            raise InputShapeError("time_limit must be positive when set")


@dataclass
class InnerResult:
    """Worst admissible model at a candidate point, and its logit there."""

    worst_model: object
    worst_logit: float


@dataclass
class CeResult:
    """One explanation: the point found plus the evidence for it."""

    x: np.ndarray
    x_prime: np.ndarray
    certified: bool
    worst_logit: float
    distance: float
    iterations: int
    cut_models: list
    sigma_used: float
    t_used: float
    original_logit: float
    neighbour_indices: np.ndarray | None = None
    region_vertices: np.ndarray | None = None
    trace: list = field(default_factory=list)

    @property
    def n_cut_models(self):
        return len(self.cut_models)

    def to_dict(self):
        return {
            "x": self.x.tolist(),
            "x_prime": self.x_prime.tolist(),
            "certified": bool(self.certified),
            "worst_logit": float(self.worst_logit),
            "distance": float(self.distance),
            "iterations": int(self.iterations),
            "n_cut_models": int(self.n_cut_models),
            "sigma_used": float(self.sigma_used),
            "t_used": float(self.t_used),
            "original_logit": float(self.original_logit),
            "neighbour_indices": (
                None
                if self.neighbour_indices is None
                else [int(i) for i in self.neighbour_indices]
            ),
            "region_vertices": (
                None
                if self.region_vertices is None
                else self.region_vertices.tolist()
            ),
            "trace": self.trace,
        }


def build_outer_model(x, region, cut_models, sigma):
    """Distance-minimising MILP over the region, one margin row per model.

    Returns (model, x variable names, encodings).  The candidate is tied to
    the hull through convex-combination variables; per-feature auxiliaries
    linearise |x_f - x'_f|; every pinned model's encoded logit must clear
    sigma.
    """
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[0]
    lo, hi = region.bounding_box()
    model = MilpModel(name="outer_ce")
    x_names = [
        model.add_var(f"x_{f}", lb=float(lo[f]), ub=float(hi[f])) for f in range(d)
    ]
    s_names = []
    for f in range(d):
        cap = max(x[f] - lo[f], hi[f] - x[f], 0.0)
        s = model.add_var(f"s_{f}", lb=0.0, ub=float(cap))
        model.add_constraint({s: 1.0, x_names[f]: 1.0}, ">=", float(x[f]),
                             name=f"abs_up_{f}")
        model.add_constraint({s: 1.0, x_names[f]: -1.0}, ">=", float(-x[f]),
                             name=f"abs_dn_{f}")
        s_names.append(s)
    lam = [
        model.add_var(f"lam_{j}", lb=0.0, ub=1.0) for j in range(region.n_vertices)
    ]
    model.add_constraint({name: 1.0 for name in lam}, "=", 1.0, name="hull_sum")
    verts = region.vertices
    for f in range(d):
        coeffs = {x_names[f]: -1.0}
        for j in range(region.n_vertices):
            if verts[j, f] != 0.0:
                coeffs[lam[j]] = float(verts[j, f])
        model.add_constraint(coeffs, "=", 0.0, name=f"hull_{f}")
    encs = []
    for i, net in enumerate(cut_models):
        enc = encode_network_forward(
            model, net, x_names, prefix=f"m{i}", input_box=(lo, hi)
        )
        model.add_constraint({enc.output_var: 1.0}, ">=", float(sigma),
                             name=f"margin_{i}")
        encs.append(enc)
    model.set_objective({s: 1.0 / d for s in s_names}, "min")
    return model, x_names, encs


def outer_minimisation(x, region, cut_models, sigma, *, time_limit=None):
    """Closest in-region point clearing sigma on every pinned model.

    Returns (x_prime, normalised L1 objective), or None when no region
    point satisfies all margin rows.
    """
    model, x_names, encs = build_outer_model(x, region, cut_models, sigma)
    sol = solve(model, time_limit=time_limit)
    if sol.status == "infeasible":
        return None
    if sol.status == "timeout":
        raise CertificationTimeoutError("outer minimisation hit the time limit")
    if sol.status != "optimal":
        raise InternalConsistencyError(
            f"outer minimisation returned {sol.status}; the feasible set is bounded"
        )
    x_prime = np.array([sol.values[n] for n in x_names])
    for net, enc in zip(cut_models, encs):
        check_relu_semantics(net, x_prime, enc, sol)
    return x_prime, float(sol.objective_value)


def inner_maximisation(net, shifts, x_prime, *, time_limit=None):
    """Adversary's move: the admissible model minimising the logit at x_prime.

    Solves the exact worst-case MILP and reconstructs an in-box network
    attaining the optimum.
    """
    if not isinstance(shifts, ModelShiftSet):
        shifts = ModelShiftSet(base=net, delta=shifts)
    x_prime = np.asarray(x_prime, dtype=np.float64)
    inet = abstract(net, shifts)
    model, enc = build_worst_logit_model(inet, x_prime)
    sol = solve(model, time_limit=time_limit)
    if sol.status == "timeout":
        raise CertificationTimeoutError("inner maximisation hit the time limit")
    if sol.status != "optimal":
        raise InternalConsistencyError(
            f"inner maximisation returned {sol.status}; the parameter box is compact"
        )
    worst = extract_worst_network(inet, x_prime, enc, sol)
    return InnerResult(worst_model=worst, worst_logit=float(sol.objective_value))


class Explainer:
    """Reusable generator: one network, one shift set, many inputs.

    Robustness certificates for dataset points are cached across calls, so
    batch explanation shares neighbour-screening work.
    """

    def __init__(self, net, data=None, config=None):
        self.config = config if config is not None else ProplaceConfig()
        self.net = net
        self.shifts = ModelShiftSet(base=net, delta=self.config.delta)
        self.certifier = CachingCertifier(
            net, self.shifts, time_limit=self.config.time_limit
        )
        # candidate neighbours: points the model itself classifies as 1;
        # ground-truth-labelled points it misclassifies could never certify
        if data is None:
            self._tree = None
        else:
            rows = data.rows if isinstance(data, Dataset) else np.asarray(
                data, dtype=np.float64
            )
            self._tree = build_tree(
                rows, class_filter=1, labels=predict_class_batch(net, rows)
            )

    def generate(self, x, *, region=None):
        """Search a certified counterfactual for one input.

        With region=None the plausible region is built from the k nearest
        robust neighbours; passing a PlausibleRegion overrides that.  Raises
        NoFeasibleCeError / NonConvergenceError when the search fails, and
        InsufficientRobustNeighboursError when too few neighbours certify.
        """
        cfg = self.config
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.net.input_dim,):
            raise InputShapeError(
                f"input shape {x.shape}, network expects ({self.net.input_dim},)"
            )
        if not np.all(np.isfinite(x)):
            raise InputShapeError("input must be finite")

        neighbour_indices = None
        if region is None:
            if self._tree is None:
                raise NoCandidatesError(
                    "explainer was built without data; pass region= explicitly"
                )
            neighbour_indices, pts = robust_knn(x, cfg.k, self._tree, self.certifier)
            region = make_region(x, pts)
        elif not isinstance(region, PlausibleRegion):
            region = PlausibleRegion(region)

        # feasibility guard: when every vertex is provably robust, cap the
        # margin at half the weakest vertex's worst-case logit so vertices
        # stay feasible for the outer problem
        vertex_floor = min(self.certifier.query(v)[1] for v in region.vertices)
        sigma_eff = cfg.sigma
        if vertex_floor > 0.0:
            sigma_eff = min(cfg.sigma, 0.5 * vertex_floor)
        t_eff = min(cfg.t, 0.5 * sigma_eff)

        cut_models = [self.net]
        trace = []
        x_prime = None
        worst_logit = -math.inf
        for iteration in range(1, cfg.max_iters + 1):
            out = outer_minimisation(
                x, region, cut_models, sigma_eff, time_limit=cfg.time_limit
            )
            if out is None:
                raise NoFeasibleCeError(
                    f"no region point clears margin {sigma_eff:g} against "
                    f"{len(cut_models)} pinned model(s)"
                )
            x_prime, objective = out
            inner = inner_maximisation(
                self.net, self.shifts, x_prime, time_limit=cfg.time_limit
            )
            worst_logit = inner.worst_logit
            trace.append(
                {
                    "iteration": iteration,
                    "x_prime": x_prime.tolist(),
                    "objective": float(objective),
                    "worst_logit": float(worst_logit),
                }
            )
            if worst_logit >= sigma_eff - t_eff:
                break
            cut_models.append(inner.worst_model)
        else:
            raise NonConvergenceError(
                f"no provably robust point after {cfg.max_iters} iterations "
                f"(last worst-case logit {worst_logit:g})",
                trace,
            )

        final = certify_delta_robust(
            self.net, self.shifts, x_prime, time_limit=cfg.time_limit
        )
        return CeResult(
            x=x.copy(),
            x_prime=x_prime,
            certified=final.robust,
            worst_logit=final.worst_logit,
            distance=float(np.abs(x - x_prime).mean()),
            iterations=iteration,
            cut_models=list(cut_models),
            sigma_used=sigma_eff,
            t_used=t_eff,
            original_logit=forward_logit(self.net, x),
            neighbour_indices=neighbour_indices,
            region_vertices=region.vertices.copy(),
            trace=trace,
        )


def generate_counterfactual(net, x, data=None, config=None, *, region=None):
    """One-shot convenience wrapper around Explainer."""
    return Explainer(net, data=data, config=config).generate(x, region=region)
