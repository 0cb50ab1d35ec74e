"""Feed-forward ReLU classifiers with a single logit output.

The model convention throughout the package: a network with h hidden layers
maps x through V_i = ReLU(W_i V_{i-1} + B_i) for i = 1..h and outputs the
pre-sigmoid logit V_{h+1} = W_{h+1} V_h + B_{h+1}.  Class 1 is predicted
iff the logit is >= 0.

Also owns the two on-disk conventions: JSON model files and CSV datasets
(header row, label column named "label").
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CsvParseError, DegenerateDataError, InputShapeError


class ReluNetwork:
    """Immutable container for one network's parameters.

    weights[i] has shape (n_{i+1}, n_i) and biases[i] has shape (n_{i+1},);
    the final layer produces a single logit, so weights[-1] has one row.
    """

    def __init__(self, weights, biases):
        if len(weights) != len(biases):
            raise InputShapeError(
                f"{len(weights)} weight matrices but {len(biases)} bias vectors"
            )
        if not weights:
            raise InputShapeError("network needs at least one layer")
        ws, bs = [], []
        for i, (w, b) in enumerate(zip(weights, biases)):
            w = np.array(w, dtype=np.float64)
            b = np.array(b, dtype=np.float64)
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise InputShapeError(
                    f"layer {i}: weight shape {w.shape} incompatible with bias shape {b.shape}"
                )
            if i > 0 and w.shape[1] != ws[-1].shape[0]:
                raise InputShapeError(
                    f"layer {i}: expects {w.shape[1]} inputs, previous layer emits {ws[-1].shape[0]}"
                )
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise InputShapeError(f"layer {i}: non-finite parameter")
            w.setflags(write=False)
            b.setflags(write=False)
            ws.append(w)
            bs.append(b)
        if ws[-1].shape[0] != 1:
            raise InputShapeError(
                f"output layer must emit a single logit, got {ws[-1].shape[0]}"
            )
        self.weights = tuple(ws)
        self.biases = tuple(bs)

    @property
    def layer_sizes(self):
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def input_dim(self):
        return self.weights[0].shape[1]

    @property
    def n_hidden_layers(self):
        return len(self.weights) - 1

    def __repr__(self):
        return f"ReluNetwork(layer_sizes={self.layer_sizes})"


def _as_input(net, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != net.input_dim:
        raise InputShapeError(
            f"input has shape {x.shape}, network expects ({net.input_dim},)"
        )
    return x


def node_values(net, x):
    """All post-activation layer values for one input, ending with the logit.

    Returns a list [V_1, ..., V_h, V_{h+1}] where the last entry is a
    length-1 array holding the raw (pre-sigmoid) output.
    """
    v = _as_input(net, x)
    out = []
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        v = w @ v + b
        if i < len(net.weights) - 1:
            v = np.maximum(v, 0.0)
        out.append(v)
    return out


def forward_logit(net, x):
    """Pre-sigmoid output of the network for a single input vector."""
    return float(node_values(net, x)[-1][0])


def forward_logit_batch(net, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise InputShapeError(
            f"batch has shape {X.shape}, network expects (n, {net.input_dim})"
        )
    v = X
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        v = v @ w.T + b
        if i < len(net.weights) - 1:
            v = np.maximum(v, 0.0)
    return v[:, 0]


def predict_class(net, x):
    """1 iff the logit is non-negative."""
    return 1 if forward_logit(net, x) >= 0.0 else 0


def predict_class_batch(net, X):
    return (forward_logit_batch(net, X) >= 0.0).astype(int)


@dataclass
class Dataset:
    """Feature matrix plus binary labels.

    rows: (n, d) float array; labels: (n,) ints in {0, 1}.  Pipeline-ingested
    datasets are min-max scaled so every feature lies in [0, 1]; Dataset
    itself only enforces shape and finiteness so hand-built fixtures can use
    arbitrary coordinates.
    """

    rows: np.ndarray
    labels: np.ndarray
    feature_names: tuple = ()

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.rows.ndim != 2:
            raise InputShapeError(f"rows must be 2-D, got shape {self.rows.shape}")
        if self.labels.shape != (self.rows.shape[0],):
            raise InputShapeError(
                f"{self.rows.shape[0]} rows but labels shape {self.labels.shape}"
            )
        if not np.isfinite(self.rows).all():
            raise InputShapeError("non-finite feature value")
        if not np.isin(self.labels, (0, 1)).all():
            raise InputShapeError("labels must be 0 or 1")
        if not self.feature_names:
            self.feature_names = tuple(f"f{i}" for i in range(self.rows.shape[1]))
        self.feature_names = tuple(self.feature_names)
        if len(self.feature_names) != self.rows.shape[1]:
            raise InputShapeError(
                f"{len(self.feature_names)} feature names for {self.rows.shape[1]} columns"
            )

    @property
    def n(self):
        return self.rows.shape[0]

    @property
    def d(self):
        return self.rows.shape[1]


@dataclass
class TrainConfig:
    """Hyper-parameters for `train`.

    hidden gives the widths of the hidden layers; train_fraction in (0, 1]
    takes a seeded subsample of the rows before training.
    """

    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 0.01
    seed: int = 0
    train_fraction: float = 1.0
    hidden: tuple = (16, 16)


def init_network(layer_sizes, seed):
    """Seeded uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) initialisation."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = np.sqrt(1.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return ReluNetwork(weights, biases)


def _bce_loss(logits, y):
    # mean of softplus(z) - y*z, the numerically stable BCE-with-logits
    return float(np.mean(np.logaddexp(0.0, logits) - y * logits))


def train(data, config, return_history=False):
    """Adam on binary cross-entropy over sigmoid(logit).

    Deterministic given config.seed.  epochs=0 returns the seeded initial
    network unchanged.  history (if requested) holds the full-dataset loss
    after each epoch, preceded by the initial loss.
    """
    if not 0.0 < config.train_fraction <= 1.0:
        raise DegenerateDataError(
            f"train_fraction must be in (0, 1], got {config.train_fraction}"
        )
    if config.epochs < 0 or config.batch_size < 1:
        raise DegenerateDataError("epochs must be >= 0 and batch_size >= 1")
    if len(set(data.labels.tolist())) < 2:
        raise DegenerateDataError("training data contains a single class")

    rng = np.random.default_rng(config.seed)
    X, y = data.rows, data.labels.astype(np.float64)
    if config.train_fraction < 1.0:
        keep = max(1, int(round(config.train_fraction * data.n)))
        idx = rng.permutation(data.n)[:keep]
        X, y = X[idx], y[idx]

    layer_sizes = (data.d,) + tuple(config.hidden) + (1,)
    net = init_network(layer_sizes, seed=config.seed)
    if config.epochs == 0:
        return (net, [_bce_loss(forward_logit_batch(net, X), y)]) if return_history else net

    ws = [w.copy() for w in net.weights]
    bs = [b.copy() for b in net.biases]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    m_w = [np.zeros_like(w) for w in ws]
    v_w = [np.zeros_like(w) for w in ws]
    m_b = [np.zeros_like(b) for b in bs]
    v_b = [np.zeros_like(b) for b in bs]
    step = 0

    history = [_bce_loss(_forward_train(ws, bs, X)[-1][:, 0], y)]
    n = X.shape[0]
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            Xb, yb = X[batch], y[batch]
            acts = _forward_train(ws, bs, Xb)
            z = acts[-1][:, 0]
            # dL/dz for mean BCE over the batch
            g = (1.0 / (1.0 + np.exp(-z)) - yb)[:, None] / len(batch)
            grads_w, grads_b = _backward_train(ws, acts, g)
            step += 1
            corr1 = 1.0 - beta1**step
            corr2 = 1.0 - beta2**step
            for i in range(len(ws)):
                for p, gr, m, v in (
                    (ws[i], grads_w[i], m_w[i], v_w[i]),
                    (bs[i], grads_b[i], m_b[i], v_b[i]),
                ):
                    m *= beta1
                    m += (1 - beta1) * gr
                    v *= beta2
                    v += (1 - beta2) * gr * gr
                    p -= config.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + eps)
        history.append(_bce_loss(_forward_train(ws, bs, X)[-1][:, 0], y))

    trained = ReluNetwork(ws, bs)
    return (trained, history) if return_history else trained


def _forward_train(ws, bs, X):
    # returns [A_0, A_1, ..., A_h, Z_out]; hidden entries are post-ReLU
    acts = [X]
    v = X
    for i in range(len(ws)):
        v = v @ ws[i].T + bs[i]
        if i < len(ws) - 1:
            v = np.maximum(v, 0.0)
        acts.append(v)
    return acts


def _backward_train(ws, acts, g_out):
    grads_w = [None] * len(ws)
    grads_b = [None] * len(ws)
    g = g_out
    for i in range(len(ws) - 1, -1, -1):
        grads_w[i] = g.T @ acts[i]
        grads_b[i] = g.sum(axis=0)
        if i > 0:
            g = (g @ ws[i]) * (acts[i] > 0)
    return grads_w, grads_b


def retrain_ensemble(first_half, second_half, config, n_full=10, n_subsample=10):
    """Retrained model population used to score validity under retraining.

    n_full models train on the union of both halves; n_subsample models train
    on 99% of the first half, each discarding a different 1% (disjoint seeded
    chunks of a fixed permutation).  Model i trains with seed config.seed+i+1,
    numbering across the whole ensemble, so every member differs.
    """
    if first_half.d != second_half.d:
        raise InputShapeError(
            f"halves disagree on dimension: {first_half.d} vs {second_half.d}"
        )
    combined = Dataset(
        np.vstack([first_half.rows, second_half.rows]),
        np.concatenate([first_half.labels, second_half.labels]),
        first_half.feature_names,
    )
    models = []
    index = 0
    for _ in range(n_full):
        index += 1
        cfg = _reseeded(config, config.seed + index)
        models.append(train(combined, cfg))

    n = first_half.n
    chunk = max(1, int(round(0.01 * n)))
    perm = np.random.default_rng(config.seed).permutation(n)
    for i in range(n_subsample):
        index += 1
        drop = np.take(perm, np.arange(i * chunk, (i + 1) * chunk), mode="wrap")
        keep = np.setdiff1d(np.arange(n), drop)
        sub = Dataset(
            first_half.rows[keep], first_half.labels[keep], first_half.feature_names
        )
        cfg = _reseeded(config, config.seed + index)
        models.append(train(sub, cfg))
    return models


def _reseeded(config, seed):
    return TrainConfig(
        epochs=config.epochs,
        batch_size=config.batch_size,
        learning_rate=config.learning_rate,
        seed=seed,
        train_fraction=config.train_fraction,
        hidden=config.hidden,
    )


# ---------------------------------------------------------------------------
# serialization


def network_to_json(net):
    return {
        "layer_sizes": list(net.layer_sizes),
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }


def network_from_json(obj):
    net = ReluNetwork(
        [np.array(w, dtype=np.float64) for w in obj["weights"]],
        [np.array(b, dtype=np.float64) for b in obj["biases"]],
    )
    declared = tuple(obj.get("layer_sizes", net.layer_sizes))
    if declared != net.layer_sizes:
        raise InputShapeError(
            f"declared layer_sizes {declared} do not match weights {net.layer_sizes}"
        )
    return net


def save_network(net, path):
    with open(path, "w") as fh:
        json.dump(network_to_json(net), fh, indent=2)
        fh.write("\n")


def load_network(path):
    with open(path) as fh:
        return network_from_json(json.load(fh))


def load_dataset(path):
    """Read a CSV with a header row and a column named 'label'.

    Raises CsvParseError (with 1-based file line and column name) on any
    cell that does not parse.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError("empty file", row=1) from None
        header = [h.strip() for h in header]
        if "label" not in header:
            raise CsvParseError("no 'label' column in header", row=1)
        label_pos = header.index("label")
        names = [h for i, h in enumerate(header) if i != label_pos]
        rows, labels = [], []
        for line_no, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(header):
                raise CsvParseError(
                    f"expected {len(header)} cells, got {len(record)}", row=line_no
                )
            feats = []
            for i, cell in enumerate(record):
                name = header[i]
                if i == label_pos:
                    if cell.strip() not in ("0", "1"):
                        raise CsvParseError(
                            f"label {cell!r} is not 0 or 1", row=line_no, column=name
                        )
                    labels.append(int(cell))
                else:
                    try:
                        feats.append(float(cell))
                    except ValueError:
                        raise CsvParseError(
                            f"cell {cell!r} is not numeric", row=line_no, column=name
                        ) from None
            rows.append(feats)
    if not rows:
        raise CsvParseError("no data rows", row=1)
    return Dataset(np.array(rows), np.array(labels), tuple(names))


def save_dataset(data, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(data.feature_names) + ["label"])
        for row, label in zip(data.rows, data.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])
