"""Gesture classifier: a small from-scratch MLP plus a histogram nearest-neighbor baseline.

The network is sigmoid-hidden / softmax-output trained with mini-batch
gradient descent on mean cross-entropy. Initialization and per-epoch
shuffling come from a seeded xorshift64* stream, so a (data, dims, config)
triple always produces the same weights, bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import Xorshift64Star

MODEL_MAGIC = "GCMLP 1"


class EmptyDataset(ValueError):
    pass


class LabelOutOfRange(ValueError):
    pass


class EmptyDb(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class BadMagic(ValueError):
    pass


class ShapeMismatch(ValueError):
    pass


class NonFiniteValue(ValueError):
    pass


class Mlp:
    """Fully-connected net: dims[0] inputs, sigmoid hidden layers, softmax output."""

    def __init__(self, dims: list[int], weights: list[np.ndarray], biases: list[np.ndarray]):
        if len(dims) < 2:
            raise ShapeMismatch("need at least input and output layers")
        if len(weights) != len(dims) - 1 or len(biases) != len(dims) - 1:
            raise ShapeMismatch("one weight matrix and bias vector per layer")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (dims[i + 1], dims[i]) or b.shape != (dims[i + 1],):
                raise ShapeMismatch(
                    f"layer {i}: weights {w.shape}, biases {b.shape}, dims {dims}"
                )
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise NonFiniteValue(f"layer {i} has non-finite parameters")
        self.dims = list(dims)
        self.weights = weights
        self.biases = biases

    @property
    def n_classes(self) -> int:
        return self.dims[-1]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 200
    batch_size: int = 16
    seed: int = 0
    target_loss: float = 0.01

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -60.0, 60.0)))


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def init_mlp(dims: list[int], seed: int) -> Mlp:
    """Weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero.

    Draw order is layer by layer, each weight matrix row-major, so the seed
    fully determines every parameter.
    """
    return _init_with_rng(dims, Xorshift64Star(seed))


def _forward_batch(net: Mlp, x: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Returns per-layer activations (input included) and output probabilities."""
    acts = [x]
    a = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        a = _softmax(z) if i == last else _sigmoid(z)
        acts.append(a)
    return acts, a


def mlp_forward(net: Mlp, x) -> np.ndarray:
    """Class probabilities for one feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.dims[0],):
        raise DimensionMismatch(f"input {x.shape} vs dims[0] {net.dims[0]}")
    _, probs = _forward_batch(net, x[None, :])
    return probs[0]


def _batch_gradients(
    net: Mlp, x: np.ndarray, y: np.ndarray
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Mean cross-entropy over the batch plus gradients for every layer."""
    acts, probs = _forward_batch(net, x)
    n = x.shape[0]
    logp = _log_softmax(acts[-2] @ net.weights[-1].T + net.biases[-1])
    loss = float(-logp[np.arange(n), y].mean())

    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n

    grads_w: list[np.ndarray] = [None] * len(net.weights)
    grads_b: list[np.ndarray] = [None] * len(net.biases)
    for i in range(len(net.weights) - 1, -1, -1):
        grads_w[i] = delta.T @ acts[i]
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            a = acts[i]
            delta = (delta @ net.weights[i]) * a * (1.0 - a)
    return loss, grads_w, grads_b


def train(
    data: list[tuple[np.ndarray, int]], dims: list[int], cfg: TrainConfig
) -> tuple[Mlp, list[float]]:
    """Mini-batch gradient descent; returns the net and the per-epoch loss trace.

    Stops early once an epoch's mean loss drops to cfg.target_loss. The same
    xorshift64* stream initializes weights and shuffles sample order, so runs
    are reproducible.
    """
    if not data:
        raise EmptyDataset("no training samples")
    n_classes = dims[-1]
    x = np.asarray([np.asarray(v, dtype=np.float64) for v, _ in data])
    y = np.asarray([lab for _, lab in data], dtype=np.int64)
    if x.shape[1] != dims[0]:
        raise DimensionMismatch(f"features have length {x.shape[1]}, dims[0] is {dims[0]}")
    if y.min() < 0 or y.max() >= n_classes:
        raise LabelOutOfRange(f"labels must lie in [0, {n_classes})")

    rng = Xorshift64Star(cfg.seed)
    net = _init_with_rng(dims, rng)
    order = list(range(len(data)))
    losses: list[float] = []
    for _ in range(cfg.epochs):
        rng.shuffle(order)
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            bx, by = x[idx], y[idx]
            loss, gw, gb = _batch_gradients(net, bx, by)
            total += loss * len(idx)
            for i in range(len(net.weights)):
                net.weights[i] -= cfg.learning_rate * gw[i]
                net.biases[i] -= cfg.learning_rate * gb[i]
        epoch_loss = total / len(order)
        losses.append(epoch_loss)
        if epoch_loss <= cfg.target_loss:
            break
    return net, losses


def _init_with_rng(dims: list[int], rng: Xorshift64Star) -> Mlp:
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        w = np.empty((fan_out, fan_in), dtype=np.float64)
        for i in range(fan_out):
            for j in range(fan_in):
                w[i, j] = rng.uniform(-bound, bound)
        weights.append(w)
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return Mlp(list(dims), weights, biases)


def _sample_loss(net: Mlp, x: np.ndarray, label: int) -> float:
    a = x[None, :]
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        if i == last:
            return float(-_log_softmax(z)[0, label])
        a = _sigmoid(z)
    raise AssertionError("unreachable")


def gradient_check(net: Mlp, sample: tuple[np.ndarray, int], h: float = 1e-4) -> float:
    """Max relative error between backprop and central-difference gradients.

    Relative error uses max(|analytic|, |numeric|, 1e-8) as denominator.
    """
    if h <= 0:
        raise ValueError("h must be > 0")
    x = np.asarray(sample[0], dtype=np.float64)
    label = int(sample[1])
    _, gw, gb = _batch_gradients(net, x[None, :], np.asarray([label]))
    worst = 0.0
    for params, grads in ((net.weights, gw), (net.biases, gb)):
        for p, g in zip(params, grads):
            flat_p = p.reshape(-1)
            flat_g = g.reshape(-1)
            for k in range(flat_p.size):
                orig = flat_p[k]
                flat_p[k] = orig + h
                up = _sample_loss(net, x, label)
                flat_p[k] = orig - h
                down = _sample_loss(net, x, label)
                flat_p[k] = orig
                numeric = (up - down) / (2.0 * h)
                analytic = flat_g[k]
                denom = max(abs(analytic), abs(numeric), 1e-8)
                worst = max(worst, abs(analytic - numeric) / denom)
    return worst


@dataclass
class ExemplarDb:
    """Stored orientation histograms with class ids, for nearest-neighbor matching."""

    hists: np.ndarray  # (n, 36)
    labels: np.ndarray  # (n,)

    def __post_init__(self):
        self.hists = np.asarray(self.hists, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.hists.ndim != 2 or len(self.hists) != len(self.labels):
            raise ValueError("hists must be (n, bins) aligned with labels")


def nn_match(db: ExemplarDb, hist: np.ndarray) -> tuple[int, float]:
    """Nearest exemplar by L1 distance; ties go to the lower class id, then
    the earlier database entry."""
    if len(db.hists) == 0:
        raise EmptyDb("no exemplars stored")
    h = np.asarray(hist, dtype=np.float64)
    dists = np.abs(db.hists - h[None, :]).sum(axis=1)
    best = np.lexsort((np.arange(len(dists)), db.labels, dists))[0]
    return int(db.labels[best]), float(dists[best])


def save_model(net: Mlp) -> bytes:
    """Text format with shortest round-trip float reprs; load is bit-exact."""
    lines = [MODEL_MAGIC, "dims " + " ".join(str(d) for d in net.dims)]
    for w, b in zip(net.weights, net.biases):
        for row in w:
            lines.append(" ".join(repr(float(v)) for v in row))
        lines.append(" ".join(repr(float(v)) for v in b))
    return ("\n".join(lines) + "\n").encode("ascii")


def load_model(buf: bytes) -> Mlp:
    lines = buf.decode("ascii").splitlines()
    if not lines or lines[0] != MODEL_MAGIC:
        got = lines[0] if lines else ""
        raise BadMagic(f"expected {MODEL_MAGIC!r}, got {got!r}")
    if len(lines) < 2 or not lines[1].startswith("dims "):
        raise ShapeMismatch("missing dims line")
    try:
        dims = [int(t) for t in lines[1].split()[1:]]
    except ValueError:
        raise ShapeMismatch(f"bad dims line {lines[1]!r}") from None
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ShapeMismatch(f"bad dims {dims}")

    pos = 2
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        need = fan_out + 1
        if pos + need > len(lines):
            raise ShapeMismatch("file ends before all layers are read")
        try:
            w = np.asarray(
                [[float(t) for t in lines[pos + i].split()] for i in range(fan_out)]
            )
            b = np.asarray([float(t) for t in lines[pos + fan_out].split()])
        except ValueError as exc:
            raise NonFiniteValue(f"unparseable parameter: {exc}") from None
        if w.shape != (fan_out, fan_in) or b.shape != (fan_out,):
            raise ShapeMismatch(
                f"layer rows have wrong width: {w.shape} / {b.shape} for dims {dims}"
            )
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise NonFiniteValue("model file contains non-finite values")
        weights.append(w)
        biases.append(b)
        pos += need
    if pos != len(lines):
        raise ShapeMismatch(f"{len(lines) - pos} trailing lines after the last layer")
    return Mlp(dims, weights, biases)


def read_model(path) -> Mlp:
    with open(path, "rb") as f:
        return load_model(f.read())


def write_model(path, net: Mlp) -> None:
    with open(path, "wb") as f:
        f.write(save_model(net))
