"""Fully-connected ReLU/softmax network in float64, trained with momentum SGD.

Weights are stored input-major: ``weights[l]`` has shape
``(layer_sizes[l], layer_sizes[l + 1])`` and a batch propagates as
``X @ W + b``.
"""

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PROB_FLOOR = 1e-12


@dataclass
class Mlp:
    layer_sizes: list
    weights: list
    biases: list

    def __post_init__(self):
        self.layer_sizes = [int(s) for s in self.layer_sizes]
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ValueError(f"invalid layer sizes {self.layer_sizes}")
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("number of weight/bias arrays does not match layer_sizes")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            shape = (self.layer_sizes[l], self.layer_sizes[l + 1])
            if w.shape != shape or b.shape != (shape[1],):
                raise ValueError(
                    f"layer {l}: weight {w.shape} / bias {b.shape} do not match {shape}"
                )

    @property
    def n_inputs(self):
        return self.layer_sizes[0]

    @property
    def n_outputs(self):
        return self.layer_sizes[-1]

    @property
    def n_parameters(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def params(self):
        """Flat list of parameter arrays: w0, b0, w1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self):
        return copy.deepcopy(self)

    def to_dict(self):
        return {
            "layer_sizes": self.layer_sizes,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(d["layer_sizes"], d["weights"], d["biases"])
        except KeyError as exc:
            raise ValueError(f"model document missing {exc}") from None


def parse_arch(text):
    """``"32,32"`` -> ``[32, 32]``."""
    sizes = [int(s) for s in str(text).replace(" ", "").split(",") if s]
    if not sizes or min(sizes) < 1:
        raise ValueError(f"invalid architecture {text!r}")
    return sizes


def mlp_new(layer_sizes, seed=0):
    """Glorot-uniform weights, zero biases."""
    layer_sizes = [int(s) for s in layer_sizes]
    if len(layer_sizes) < 2 or min(layer_sizes) < 1:
        raise ValueError(f"invalid layer sizes {layer_sizes}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(layer_sizes, weights, biases)


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward_all(mlp, X):
    """Pre-activations and activations of every layer (activations[0] is X)."""
    acts, pre = [X], []
    last = len(mlp.weights) - 1
    for l, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        z = acts[-1] @ w + b
        pre.append(z)
        acts.append(softmax(z) if l == last else np.maximum(z, 0.0))
    return pre, acts


def forward(mlp, x):
    x = np.asarray(x, dtype=np.float64)
    X = np.atleast_2d(x)
    if X.shape[1] != mlp.n_inputs:
        raise ValueError(f"network expects {mlp.n_inputs} inputs, got {X.shape[1]}")
    probs = _forward_all(mlp, X)[1][-1]
    return probs[0] if x.ndim == 1 else probs


def cross_entropy(probs, target):
    """``-sum_c target_c log(max(probs_c, 1e-12))``; mean over rows for batches."""
    probs = np.asarray(probs, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    per_row = -(target * np.log(np.maximum(probs, PROB_FLOOR))).sum(axis=-1)
    return float(per_row.mean()) if per_row.ndim else float(per_row)


def loss_and_grads(mlp, X, Y):
    """Mean cross-entropy over the batch and its gradient per parameter array."""
    pre, acts = _forward_all(mlp, X)
    loss = cross_entropy(acts[-1], Y)
    delta = (acts[-1] - Y) / X.shape[0]
    grads = [None] * (2 * len(mlp.weights))
    for l in range(len(mlp.weights) - 1, -1, -1):
        grads[2 * l] = acts[l].T @ delta
        grads[2 * l + 1] = delta.sum(axis=0)
        if l:
            delta = (delta @ mlp.weights[l].T) * (pre[l - 1] > 0.0)
    return loss, grads


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    steps_per_epoch: int = 100
    epochs: int = 100
    seed: int = 0
    hard_labels: bool = False

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.batch_size < 1 or self.steps_per_epoch < 1 or self.epochs < 0:
            raise ValueError("batch_size and steps_per_epoch must be >= 1, epochs >= 0")


@dataclass
class OptimizerState:
    velocity: list = field(default_factory=list)


def init_optimizer(mlp):
    return OptimizerState([np.zeros_like(p) for p in mlp.params()])


def train_step(mlp, opt, X, Y, cfg):
    """One classical-momentum SGD step, in place. Returns the pre-step batch loss."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    loss, grads = loss_and_grads(mlp, X, Y)
    for p, v, g in zip(mlp.params(), opt.velocity, grads):
        v *= cfg.momentum
        v -= cfg.learning_rate * g
        p += v
    return loss


def near_relu_kink(mlp, X, margin):
    """True if any hidden pre-activation lies within ``margin`` of zero."""
    pre, _ = _forward_all(mlp, np.atleast_2d(X))
    return any(np.abs(z).min() < margin for z in pre[:-1])


def gradient_check(mlp, X, Y, eps=1e-5):
    """Max relative error between backprop and central differences over all parameters.

    The perturbed losses are evaluated in extended precision so the
    difference quotient is not swamped by cancellation when a gradient entry
    is tiny; backprop itself runs in float64. Raises ``ValueError`` when a
    hidden pre-activation sits within ``10 * eps`` of the ReLU kink.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if near_relu_kink(mlp, X, 10 * eps):
        raise ValueError("batch sits on a ReLU kink; draw another batch")
    _, grads = loss_and_grads(mlp, X, Y)

    ext = np.longdouble
    W = [w.astype(ext) for w in mlp.weights]
    B = [b.astype(ext) for b in mlp.biases]
    Ye = Y.astype(ext)
    last = len(W) - 1
    # unperturbed layer inputs and pre-activations
    inputs, pre = [X.astype(ext)], []
    for l in range(last + 1):
        pre.append(inputs[-1] @ W[l] + B[l])
        inputs.append(np.maximum(pre[-1], 0))

    def loss_with(l, col, delta):
        z = pre[l].copy()
        z[:, col] += delta
        for k in range(l + 1, last + 1):
            z = np.maximum(z, 0) @ W[k] + B[k]
        z = z - z.max(axis=1, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        return -(Ye * logp).sum() / X.shape[0]

    worst = 0.0
    h = ext(eps)
    for j, g in enumerate(grads):
        l = j // 2
        for i in np.ndindex(g.shape):
            if j % 2 == 0:
                # weight (row, col) shifts column col by h * input[:, row]
                col, step = i[1], h * inputs[l][:, i[0]]
            else:
                col, step = i[0], h
            up = loss_with(l, col, step)
            down = loss_with(l, col, -step)
            numeric = float((up - down) / (2 * h))
            denom = max(abs(numeric), abs(g[i]), 1e-10)
            worst = max(worst, abs(numeric - g[i]) / denom)
    return worst


def save_mlp(mlp, path, **extra):
    doc = mlp.to_dict()
    doc.update(extra)
    Path(path).write_text(json.dumps(doc))


def read_model_document(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such model file: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc})") from None


def load_mlp(path):
    return Mlp.from_dict(read_model_document(path))
