"""Acceptance battery.

Ten end-to-end checks, one per release gate.  Each prints a single
verdict line so a full run reads as a checklist; thresholds and scenario
constants are stated inline next to the check they gate.
"""

import time

import numpy as np
import pytest
from oracles import (
    lof_reference,
    milp_reference,
    random_small_net,
    sample_shifted_logits,
    worst_logit_pattern_lp,
)
from test_milp import _random_milp

from proplace import (
    Dataset,
    Explainer,
    InsufficientRobustNeighboursError,
    ModelShiftSet,
    ProplaceConfig,
    ReluNetwork,
    TrainConfig,
    abstract,
    certify_delta_robust,
    forward_logit,
    l1_distance,
    local_outlier_factor,
    lof10,
    predict_class_batch,
    propagate_bounds,
    retrain_ensemble,
    train,
    v_delta_rate,
    validity_rate,
)
from proplace.cli import split_dataset
from proplace.milp import solve
from proplace.synth import two_moons


def _verdict(capsys, num, name, ok, detail):
    with capsys.disabled():
        print(f"\n[criterion {num:02d}] {'PASS' if ok else 'FAIL'}  {name}: {detail}")
    assert ok, f"criterion {num} ({name}): {detail}"


@pytest.fixture(scope="module")
def protocol_run():
    """The bundled-dataset protocol: train, retrain 20 models, explain 50."""
    started = time.monotonic()
    data = two_moons(n=200, seed=0)
    first, second, train_split, _ = split_dataset(data, 0)
    tcfg = TrainConfig(
        epochs=150, batch_size=32, learning_rate=0.01, seed=0, hidden=(8, 8)
    )
    net = train(train_split, tcfg)
    ensemble = retrain_ensemble(first, second, tcfg)
    explainer = Explainer(
        net, data=train_split, config=ProplaceConfig(delta=0.02, k=10)
    )
    preds = predict_class_batch(net, data.rows)
    pool = np.flatnonzero(preds == 0)[:50]
    results = [explainer.generate(data.rows[i]) for i in pool]
    return {
        "net": net,
        "ensemble": ensemble,
        "results": results,
        "elapsed": time.monotonic() - started,
        "reference": train_split.rows[train_split.labels == 1],
    }


@pytest.fixture(scope="module")
def tiny_scenario():
    """1-1-1 net, x = 0.5, delta = 0.1, segment region [0.5, 2.0]."""
    net = ReluNetwork(
        [np.array([[1.0]]), np.array([[1.0]])],
        [np.array([0.0]), np.array([-1.0])],
    )
    cfg = ProplaceConfig(delta=0.1, k=1, sigma=1e-5, t=1e-6)
    res = Explainer(net, config=cfg).generate(
        np.array([0.5]), region=np.array([[0.5], [2.0]])
    )
    return net, res


def test_criterion_01_certified_coverage(protocol_run, capsys):
    results = protocol_run["results"]
    ces = np.array([r.x_prime for r in results])
    rate = v_delta_rate(ces, protocol_run["net"], 0.02)
    elapsed = protocol_run["elapsed"]
    ok = (
        len(results) == 50
        and all(r.certified for r in results)
        and rate == 100.0
        and elapsed < 300.0
    )
    _verdict(
        capsys, 1, "bundled-run certified coverage", ok,
        f"{len(results)} CEs, v-delta {rate:.1f}%, {elapsed:.1f}s (< 300s)",
    )


def test_criterion_02_retrain_validity(protocol_run, capsys):
    ces = np.array([r.x_prime for r in protocol_run["results"]])
    vr = validity_rate(ces, protocol_run["ensemble"])
    _verdict(
        capsys, 2, "retrain-ensemble validity", vr >= 95.0,
        f"vr {vr:.1f}% over 20 retrained models (threshold 95%)",
    )


def test_criterion_03_worst_logit_exactness(capsys):
    rng = np.random.default_rng(31)
    worst_gap = 0.0
    for _ in range(25):
        weights, biases = random_small_net(rng)
        net = ReluNetwork(weights, biases)
        x = rng.uniform(-1.0, 2.0, net.input_dim)
        for delta in (0.01, 0.05, 0.1):
            got = certify_delta_robust(net, delta, x).worst_logit
            want = worst_logit_pattern_lp(weights, biases, delta, x)
            worst_gap = max(worst_gap, abs(got - want))
    _verdict(
        capsys, 3, "worst-case logit vs enumeration oracle", worst_gap <= 1e-6,
        f"25 nets x 3 shift radii, max gap {worst_gap:.2e}",
    )


def test_criterion_04_interval_soundness(capsys):
    rng = np.random.default_rng(41)
    violations = 0
    slack = 1e-9
    for case in range(10):
        weights, biases = random_small_net(rng)
        net = ReluNetwork(weights, biases)
        delta = float(rng.choice([0.01, 0.05, 0.1]))
        x = rng.uniform(-1.0, 2.0, net.input_dim)
        bound = propagate_bounds(abstract(net, ModelShiftSet(net, delta)), x)
        logits = sample_shifted_logits(weights, biases, delta, x, 1000, seed=case)
        if logits.min() < bound.l - slack or logits.max() > bound.u + slack:
            violations += 1
        if certify_delta_robust(net, delta, x).worst_logit < bound.l - slack:
            violations += 1
    _verdict(
        capsys, 4, "interval bounds contain sampled models", violations == 0,
        f"10 cases x 1000 samples inside [l, u], exact worst >= l; "
        f"{violations} violations",
    )


def test_criterion_05_branch_bound_vs_enumeration(capsys):
    rng = np.random.default_rng(777)
    n_opt = n_inf = 0
    worst_gap = 0.0
    status_mismatch = 0
    for trial in range(100):
        model = _random_milp(rng, max_binaries=12, anchored=trial % 3 != 2)
        ref_status, ref_obj = milp_reference(model)
        sol = solve(model)
        if sol.status != ref_status:
            status_mismatch += 1
            continue
        if ref_status == "optimal":
            n_opt += 1
            worst_gap = max(worst_gap, abs(sol.objective_value - ref_obj))
        elif ref_status == "infeasible":
            n_inf += 1
    ok = status_mismatch == 0 and worst_gap <= 1e-6
    _verdict(
        capsys, 5, "branch-and-bound vs exhaustive enumeration", ok,
        f"100 instances ({n_opt} optimal / {n_inf} infeasible), "
        f"max objective gap {worst_gap:.2e}",
    )


def test_criterion_06_analytic_two_step_convergence(tiny_scenario, capsys):
    _, res = tiny_scenario
    err = abs(res.x_prime[0] - 1.19 / 0.81)
    ok = res.iterations == 2 and res.certified and err <= 1e-4
    _verdict(
        capsys, 6, "hand-traceable scenario", ok,
        f"{res.iterations} iterations, |x' - 1.19/0.81| = {err:.2e}, "
        f"certified={res.certified}",
    )


def test_criterion_07_cutting_plane_invariants(protocol_run, tiny_scenario, capsys):
    all_results = protocol_run["results"] + [tiny_scenario[1]]
    monotone = invalidating = bounded = True
    for res in all_results:
        objs = [rec["objective"] for rec in res.trace]
        monotone &= all(b >= a - 1e-9 for a, b in zip(objs, objs[1:]))
        bounded &= 1 <= res.iterations <= 50 and len(res.trace) == res.iterations
        # each appended cut is the worst model for the candidate it answered
        for rec, cut in zip(res.trace, res.cut_models[1:]):
            logit = forward_logit(cut, np.array(rec["x_prime"]))
            invalidating &= logit < res.sigma_used - res.t_used + 1e-6
            invalidating &= abs(logit - rec["worst_logit"]) <= 1e-5
    ok = monotone and invalidating and bounded
    _verdict(
        capsys, 7, "cutting-plane loop invariants", ok,
        f"{len(all_results)} runs: objectives non-decreasing={monotone}, "
        f"cuts invalidate their candidates={invalidating}, "
        f"iteration budgets respected={bounded}",
    )


def test_criterion_08_robust_neighbour_gate(capsys):
    net = ReluNetwork(
        [np.array([[1.0]]), np.array([[1.0]])],
        [np.array([0.0]), np.array([-1.0])],
    )
    data = Dataset(np.array([[1.2], [2.0]]), np.array([1, 1]))
    x = np.array([0.5])
    gate_fired = False
    try:
        Explainer(
            net, data=data, config=ProplaceConfig(delta=0.5, k=1, sigma=1e-5, t=1e-6)
        ).generate(x)
    except InsufficientRobustNeighboursError:
        gate_fired = True
    res = Explainer(
        net, data=data, config=ProplaceConfig(delta=0.1, k=1, sigma=1e-5, t=1e-6)
    ).generate(x)
    ok = gate_fired and res.certified
    _verdict(
        capsys, 8, "robust-neighbour screening gate", ok,
        f"delta=0.5 raised InsufficientRobustNeighboursError={gate_fired}, "
        f"delta=0.1 certified={res.certified}",
    )


def test_criterion_09_plausibility(protocol_run, capsys):
    ces = np.array([r.x_prime for r in protocol_run["results"]])
    mean_lof = float(local_outlier_factor(ces, protocol_run["reference"], k=10).mean())

    rng = np.random.default_rng(91)
    cluster = rng.uniform(0.0, 1.0, size=(100, 2))
    constructed = [
        (cluster[3] + 1e-6, cluster),          # near-duplicate inlier
        (np.array([12.0, 12.0]), cluster),     # far outlier
        (np.array([0.25, 0.75]), np.tile([0.25, 0.75], (30, 1))),  # degenerate
    ]
    gap = max(
        abs(lof10(q, ref) - lof_reference(np.atleast_2d(q), ref, 10)[0])
        for q, ref in constructed
    )
    ok = mean_lof < 1.5 and gap <= 1e-6
    _verdict(
        capsys, 9, "plausibility of generated points", ok,
        f"mean LOF {mean_lof:.3f} (< 1.5), reference gap {gap:.2e}",
    )


def test_criterion_10_proximity_bounds(protocol_run, tiny_scenario, capsys):
    violations = 0
    for res in protocol_run["results"] + [tiny_scenario[1]]:
        vertex_max = max(
            l1_distance(res.x, np.asarray(v)) for v in res.region_vertices
        )
        single_model_floor = res.trace[0]["objective"]
        if not (single_model_floor - 1e-9 <= res.distance <= vertex_max + 1e-9):
            violations += 1
    _verdict(
        capsys, 10, "proximity sandwiched by region and first cut", violations == 0,
        f"51 CEs within [first-iteration distance, max vertex distance]; "
        f"{violations} violations",
    )
