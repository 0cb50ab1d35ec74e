"""Command-line interface.

Subcommands: synth (emit a bundled-style dataset), prepare (scale and
split), run (full protocol: train, retrain ensemble, explain, evaluate),
certify (standalone robustness check of a point against a stored model).
Every numeric flag can also be set through a PROPLACE_* environment
variable; explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import (
    InsufficientRobustNeighboursError,
    NoFeasibleCeError,
    NonConvergenceError,
    ProplaceError,
)
from .explain import Explainer, ProplaceConfig, build_outer_model
from .interval_cert import ModelShiftSet, abstract, certify_delta_robust, propagate_bounds
from .metrics import compute_report
from .milp import build_worst_logit_model, export_lp
from .neighbors import make_region, robust_knn
from .nn_core import (
    Dataset,
    TrainConfig,
    load_dataset,
    load_network,
    predict_class_batch,
    retrain_ensemble,
    save_dataset,
    save_network,
    train,
)
from .synth import two_blobs, two_moons


def _env_default(name, cast, fallback):
    raw = os.environ.get(f"PROPLACE_{name}")
    if raw is None:
        return fallback
    try:
        return cast(raw)
    except ValueError:
        raise ProplaceError(f"environment variable PROPLACE_{name}={raw!r} "
                            f"is not a valid {cast.__name__}") from None


def _parse_hidden(text):
    try:
        widths = tuple(int(w) for w in str(text).split(",") if w.strip())
    except ValueError:
        raise ProplaceError(f"--hidden expects comma-separated widths, got {text!r}") from None
    if not widths or any(w < 1 for w in widths):
        raise ProplaceError(f"--hidden expects positive widths, got {text!r}")
    return widths


def bundled_data_path():
    """Path of the packaged demo CSV."""
    return str(resources.files("proplace").joinpath("data/credit_mini.csv"))


def scale_minmax(rows, feature_names=None):
    """Min-max scale columns into [0,1].

    Returns (scaled, mins, maxs, constant_columns); constant columns map to
    0 and are reported so callers can warn.
    """
    rows = np.asarray(rows, dtype=np.float64)
    mins = rows.min(axis=0)
    maxs = rows.max(axis=0)
    span = maxs - mins
    constant = np.flatnonzero(span == 0.0)
    scaled = (rows - mins) / np.where(span > 0.0, span, 1.0)
    scaled[:, constant] = 0.0
    names = (
        list(feature_names)
        if feature_names is not None
        else [f"f{i}" for i in range(rows.shape[1])]
    )
    return scaled, mins, maxs, [names[i] for i in constant]


def split_dataset(data, seed):
    """Deterministic protocol split: two halves, first half 80/20 train/test."""
    perm = np.random.default_rng(seed).permutation(data.n)
    mid = data.n // 2
    first_idx, second_idx = perm[:mid], perm[mid:]
    first = Dataset(data.rows[first_idx], data.labels[first_idx], data.feature_names)
    second = Dataset(data.rows[second_idx], data.labels[second_idx], data.feature_names)
    n_train = int(round(0.8 * first.n))
    train_split = Dataset(
        first.rows[:n_train], first.labels[:n_train], data.feature_names
    )
    test_split = Dataset(
        first.rows[n_train:], first.labels[n_train:], data.feature_names
    )
    return first, second, train_split, test_split


def _load_scaled(path):
    data = load_dataset(path)
    scaled, mins, maxs, constant = scale_minmax(data.rows, data.feature_names)
    for name in constant:
        print(f"warning: feature {name!r} is constant; scaled to 0", file=sys.stderr)
    return (
        Dataset(scaled, data.labels, data.feature_names),
        {
            name: {"min": float(mins[i]), "max": float(maxs[i])}
            for i, name in enumerate(data.feature_names)
        },
    )


def cmd_synth(args):
    if args.kind == "blobs":
        data = two_blobs(n=args.n, seed=args.seed)
    else:
        data = two_moons(n=args.n, seed=args.seed)
    save_dataset(data, args.out)
    print(f"wrote {data.n} rows to {args.out}")
    return 0


def cmd_prepare(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data, scaling = _load_scaled(args.data)
    first, second, train_split, test_split = split_dataset(data, args.seed)
    save_dataset(first, out / "first_half.csv")
    save_dataset(second, out / "second_half.csv")
    save_dataset(train_split, out / "train.csv")
    save_dataset(test_split, out / "test.csv")
    with open(out / "scaling.json", "w") as fh:
        json.dump(scaling, fh, sort_keys=True, indent=2)
        fh.write("\n")
    summary = {
        "rows": data.n,
        "first_half": first.n,
        "second_half": second.n,
        "train": train_split.n,
        "test": test_split.n,
        "seed": args.seed,
    }
    with open(out / "prepare.json", "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(
        f"split {data.n} rows: halves {first.n}/{second.n}, "
        f"train/test {train_split.n}/{test_split.n} -> {out}"
    )
    return 0


def _explain_one(explainer, x):
    """Run one instance; map expected failures to explicit records."""
    try:
        res = explainer.generate(x)
    except InsufficientRobustNeighboursError as exc:
        return {"status": "infeasible", "reason": str(exc)}
    except NoFeasibleCeError as exc:
        return {"status": "infeasible", "reason": str(exc)}
    except NonConvergenceError as exc:
        return {"status": "non_convergence", "reason": str(exc),
                "trace": exc.trace}
    except ProplaceError as exc:
        return {"status": "error", "reason": f"{type(exc).__name__}: {exc}"}
    record = res.to_dict()
    record["status"] = "certified" if res.certified else "uncertified"
    return record


def cmd_run(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()

    data_path = args.data if args.data else bundled_data_path()
    data, scaling = _load_scaled(data_path)
    first, second, train_split, test_split = split_dataset(data, args.seed)

    tcfg = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        seed=args.seed,
        hidden=_parse_hidden(args.hidden),
    )
    net = train(train_split, tcfg)
    save_network(net, out / "model.json")
    ensemble = retrain_ensemble(first, second, tcfg)

    pcfg = ProplaceConfig(
        delta=args.delta,
        k=args.k,
        sigma=args.sigma,
        t=args.t,
        max_iters=args.max_iters,
        time_limit=args.time_limit,
    )
    explainer = Explainer(net, data=train_split, config=pcfg)

    preds = predict_class_batch(net, test_split.rows)
    pool = np.flatnonzero(preds == 0)
    selected = pool[: args.n_explain]
    shortfall = None
    if selected.shape[0] < args.n_explain:
        shortfall = (
            f"requested {args.n_explain} class-0 test points, "
            f"only {selected.shape[0]} available; explaining all of them"
        )
        print(f"note: {shortfall}", file=sys.stderr)

    if args.dump_lp and selected.shape[0]:
        x0 = test_split.rows[selected[0]]
        try:
            _, pts = robust_knn(x0, pcfg.k, explainer._tree, explainer.certifier)
            region = make_region(x0, pts)
            model, _, _ = build_outer_model(x0, region, [net], pcfg.sigma)
            (out / "outer_first_instance.lp").write_text(export_lp(model))
        except ProplaceError:
            pass  # outer dump is best-effort; the inner dump below always works
        inner_model, _ = build_worst_logit_model(
            abstract(net, explainer.shifts), x0
        )
        (out / "inner_first_instance.lp").write_text(export_lp(inner_model))

    records = []
    with ThreadPoolExecutor(max_workers=args.workers) as pool_exec:
        futures = [
            pool_exec.submit(_explain_one, explainer, test_split.rows[i])
            for i in selected
        ]
        for i, fut in zip(selected, futures):
            record = fut.result()
            record["instance"] = int(i)
            records.append(record)

    ok = [r for r in records if r["status"] == "certified"]
    metrics = None
    if ok:
        originals = np.array([r["x"] for r in ok])
        ces = np.array([r["x_prime"] for r in ok])
        reference = train_split.rows[train_split.labels == 1]
        report = compute_report(
            originals,
            ces,
            retrained_models=ensemble,
            net=net,
            shifts=explainer.shifts,
            reference=reference,
            certifier=explainer.certifier,
        )
        metrics = json.loads(report.to_json())
        (out / "report.txt").write_text(report.to_table())
        print(report.to_table(), end="")

    config_echo = {
        "data": str(data_path),
        "seed": args.seed,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "learning_rate": args.learning_rate,
        "hidden": list(_parse_hidden(args.hidden)),
        "delta": args.delta,
        "k": args.k,
        "sigma": args.sigma,
        "t": args.t,
        "max_iters": args.max_iters,
        "n_explain": args.n_explain,
        "workers": args.workers,
    }
    payload = {
        "config": config_echo,
        "scaling": scaling,
        "requested": int(args.n_explain),
        "explained": len(records),
        "certified": len(ok),
        "shortfall": shortfall,
        "metrics": metrics,
    }
    with open(out / "report.json", "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(out / "ces.json", "w") as fh:
        json.dump(records, fh, sort_keys=True, indent=2)
        fh.write("\n")

    elapsed = time.monotonic() - started
    print(
        f"explained {len(records)} instance(s), {len(ok)} certified, "
        f"{elapsed:.1f}s -> {out}"
    )
    acceptable = {"certified", "infeasible"}
    return 0 if all(r["status"] in acceptable for r in records) else 1


def _parse_point(args):
    if args.point is not None:
        try:
            return np.array([float(v) for v in args.point.split(",")])
        except ValueError:
            raise ProplaceError(f"--point expects comma-separated numbers, "
                                f"got {args.point!r}") from None
    with open(args.point_file) as fh:
        return np.asarray(json.load(fh), dtype=np.float64)


def cmd_certify(args):
    net = load_network(args.model)
    x = _parse_point(args)
    shifts = ModelShiftSet(base=net, delta=args.delta)
    bound = propagate_bounds(abstract(net, shifts), x)
    if args.dump_lp:
        model, _ = build_worst_logit_model(abstract(net, shifts), x)
        Path(args.dump_lp).write_text(export_lp(model))
    result = certify_delta_robust(net, shifts, x, time_limit=args.time_limit)
    verdict = "robust" if result.robust else "not robust"
    if args.json:
        print(json.dumps(
            {
                "robust": result.robust,
                "worst_logit": result.worst_logit,
                "interval_lower": bound.l,
                "interval_upper": bound.u,
            },
            sort_keys=True,
        ))
    else:
        print(f"interval bounds: [{bound.l:.6g}, {bound.u:.6g}]")
        print(f"worst-case logit: {result.worst_logit:.6g}")
        print(f"verdict: {verdict}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="proplace",
        description="Provably robust and plausible counterfactual explanations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="write a synthetic dataset CSV")
    p_synth.add_argument("--kind", choices=("blobs", "moons"), default="blobs")
    p_synth.add_argument("--n", type=int, default=200)
    p_synth.add_argument("--seed", type=int,
                         default=_env_default("SEED", int, 0))
    p_synth.add_argument("--out", default=_env_default("OUT", str, "dataset.csv"))
    p_synth.set_defaults(func=cmd_synth)

    p_prep = sub.add_parser("prepare", help="scale and split a dataset CSV")
    p_prep.add_argument("--data", required=True)
    p_prep.add_argument("--seed", type=int, default=_env_default("SEED", int, 0))
    p_prep.add_argument("--out", default=_env_default("OUT", str, "prepared"))
    p_prep.set_defaults(func=cmd_prepare)

    p_run = sub.add_parser("run", help="train, explain, evaluate, report")
    p_run.add_argument("--data", default=None,
                       help="dataset CSV (default: bundled demo data)")
    p_run.add_argument("--delta", type=float,
                       default=_env_default("DELTA", float, 0.05))
    p_run.add_argument("--k", type=int, default=_env_default("K", int, 10))
    p_run.add_argument("--sigma", type=float,
                       default=_env_default("SIGMA", float, 1e-4))
    p_run.add_argument("--t", type=float, default=_env_default("T", float, 1e-5))
    p_run.add_argument("--max-iters", type=int,
                       default=_env_default("MAX_ITERS", int, 50))
    p_run.add_argument("--n-explain", type=int,
                       default=_env_default("N_EXPLAIN", int, 50))
    p_run.add_argument("--seed", type=int, default=_env_default("SEED", int, 0))
    p_run.add_argument("--out", default=_env_default("OUT", str, "results"))
    p_run.add_argument("--epochs", type=int,
                       default=_env_default("EPOCHS", int, 50))
    p_run.add_argument("--batch-size", type=int,
                       default=_env_default("BATCH_SIZE", int, 32))
    p_run.add_argument("--learning-rate", type=float,
                       default=_env_default("LEARNING_RATE", float, 0.01))
    p_run.add_argument("--hidden", default=_env_default("HIDDEN", str, "16,16"),
                       help="comma-separated hidden-layer widths")
    p_run.add_argument("--workers", type=int,
                       default=_env_default("WORKERS", int, 1))
    p_run.add_argument("--time-limit", type=float, default=None,
                       help="per-solve MILP time limit in seconds")
    p_run.add_argument("--dump-lp", action="store_true",
                       help="write first-instance MILPs in LP format")
    p_run.set_defaults(func=cmd_run)

    p_cert = sub.add_parser("certify", help="certify one point against a model")
    p_cert.add_argument("--model", required=True, help="network JSON file")
    group = p_cert.add_mutually_exclusive_group(required=True)
    group.add_argument("--point", help="comma-separated feature values")
    group.add_argument("--point-file", help="JSON file holding one vector")
    p_cert.add_argument("--delta", type=float, required=True)
    p_cert.add_argument("--time-limit", type=float, default=None)
    p_cert.add_argument("--json", action="store_true")
    p_cert.add_argument("--dump-lp", default=None, metavar="PATH",
                        help="write the worst-case MILP in LP format")
    p_cert.set_defaults(func=cmd_certify)

    return parser


def main(argv=None):
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        return args.func(args)
    except ProplaceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
