"""Minimal dense feed-forward network with softmax head and backprop.

Everything the attack needs from a neural net, nothing more: Glorot
init, mini-batch SGD on cross-entropy, and exact gradients of the loss
with respect to both parameters and the input vector (the latter drives
adversarial crafting). Single-sample operations are thin wrappers over
batched kernels so large round blocks stay vectorized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InputError, NumericError, TrainingError
from .rng import substream

__all__ = [
    "MlpSpec",
    "Mlp",
    "init_mlp",
    "softmax",
    "forward",
    "forward_batch",
    "train",
    "input_gradient",
    "input_gradient_batch",
    "weight_gradients",
    "export_weights",
    "parse_weights",
]

ACTIVATION_RELU = "ReLU"
ACTIVATION_TANH = "Tanh"
_ACTIVATIONS = (ACTIVATION_RELU, ACTIVATION_TANH)


@dataclass(frozen=True)
class MlpSpec:
    layer_sizes: tuple[int, ...]
    activation: str = ACTIVATION_RELU
    # None = derive from the run's master seed.
    rng_seed: int | None = None


@dataclass(frozen=True)
class Mlp:
    spec: MlpSpec
    weights: tuple[np.ndarray, ...]  # layer l: shape (layer_sizes[l+1], layer_sizes[l])
    biases: tuple[np.ndarray, ...]  # layer l: shape (layer_sizes[l+1],)

    @property
    def input_dim(self) -> int:
        return self.spec.layer_sizes[0]

    @property
    def n_classes(self) -> int:
        return self.spec.layer_sizes[-1]


def validate_spec(spec: MlpSpec) -> None:
    if len(spec.layer_sizes) < 2:
        raise ConfigurationError(
            f"layer_sizes needs at least input and output, got {spec.layer_sizes}"
        )
    if any(int(s) < 1 for s in spec.layer_sizes):
        raise ConfigurationError(f"layer sizes must be positive, got {spec.layer_sizes}")
    if spec.activation not in _ACTIVATIONS:
        raise ConfigurationError(
            f"activation must be one of {_ACTIVATIONS}, got {spec.activation!r}"
        )


def init_mlp(spec: MlpSpec) -> Mlp:
    """Glorot-uniform weights (+/- sqrt(6/(fan_in+fan_out))), zero biases."""
    validate_spec(spec)
    rng = substream(0 if spec.rng_seed is None else spec.rng_seed, "mlp-init")
    weights = []
    biases = []
    sizes = spec.layer_sizes
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, (fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(spec=spec, weights=tuple(weights), biases=tuple(biases))


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the last axis (max-subtraction)."""
    logits = np.asarray(logits, dtype=float)
    if logits.size == 0 or logits.shape[-1] == 0:
        raise InputError("softmax requires a non-empty logit vector")
    if not np.all(np.isfinite(logits)):
        raise NumericError("softmax input contains NaN or infinite entries")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def _check_batch(net: Mlp, inputs: np.ndarray) -> np.ndarray:
    X = np.asarray(inputs, dtype=float)
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise InputError(
            f"expected inputs of dimension {net.input_dim}, got shape {X.shape}"
        )
    return X


def _activate(net: Mlp, pre: np.ndarray) -> np.ndarray:
    if net.spec.activation == ACTIVATION_RELU:
        return np.maximum(pre, 0.0)
    return np.tanh(pre)


def _activate_grad(net: Mlp, pre: np.ndarray) -> np.ndarray:
    if net.spec.activation == ACTIVATION_RELU:
        # Subgradient convention: derivative 0 at exactly 0.
        return (pre > 0.0).astype(float)
    t = np.tanh(pre)
    return 1.0 - t * t


def _forward_trace(net: Mlp, X: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Forward pass keeping activations and pre-activations for backprop.

    Returns (acts, pres): acts[0] = X, acts[l+1] = activation output of
    layer l (logits for the last layer); pres[l] = pre-activation of
    layer l.
    """
    acts = [X]
    pres = []
    a = X
    last = len(net.weights) - 1
    for l, (W, b) in enumerate(zip(net.weights, net.biases)):
        pre = a @ W.T + b
        pres.append(pre)
        a = pre if l == last else _activate(net, pre)
        acts.append(a)
    return acts, pres


def logits_batch(net: Mlp, inputs: np.ndarray) -> np.ndarray:
    """Final-layer logits for an (N, input_dim) block."""
    X = _check_batch(net, inputs)
    acts, _ = _forward_trace(net, X)
    return acts[-1]


def forward_batch(net: Mlp, inputs: np.ndarray) -> np.ndarray:
    """Softmax outputs for an (N, input_dim) block."""
    return softmax(logits_batch(net, inputs))


def forward(net: Mlp, input: np.ndarray) -> np.ndarray:
    """Confidence vector (softmax over final logits) for one input."""
    x = np.asarray(input, dtype=float)
    if x.ndim != 1:
        raise InputError(f"expected a 1-D input vector, got shape {x.shape}")
    return forward_batch(net, x[None, :])[0]


def _check_labels(net: Mlp, labels: np.ndarray, count: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.ndim != 1 or y.shape[0] != count:
        raise InputError(f"expected {count} labels, got shape {y.shape}")
    if y.dtype.kind not in "iu":
        y_int = y.astype(np.int64)
        if y.size and np.any(y_int != y):
            raise InputError("labels must be integers")
        y = y_int
    y = y.astype(np.int64, copy=False)
    if y.size and (y.min() < 0 or y.max() >= net.n_classes):
        raise InputError(f"labels must lie in [0, {net.n_classes})")
    return y


def _cross_entropy(logits: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-sample CE via log-sum-exp (no explicit softmax, overflow-safe)."""
    m = logits.max(axis=1)
    lse = m + np.log(np.exp(logits - m[:, None]).sum(axis=1))
    return lse - logits[np.arange(len(y)), y]


def _backprop(
    net: Mlp, X: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, list[tuple[np.ndarray, np.ndarray]]]:
    """Batch gradients of summed CE: (d_input (N,m), per-layer (dW, db))."""
    acts, pres = _forward_trace(net, X)
    probs = softmax(acts[-1])
    delta = probs.copy()
    delta[np.arange(len(y)), y] -= 1.0  # dCE/dlogits per sample
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(net.weights)
    for l in range(len(net.weights) - 1, -1, -1):
        grads[l] = (delta.T @ acts[l], delta.sum(axis=0))
        if l > 0:
            delta = (delta @ net.weights[l]) * _activate_grad(net, pres[l - 1])
        else:
            delta = delta @ net.weights[l]
    return delta, grads


def input_gradient_batch(net: Mlp, inputs: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """d CE(forward(x), target) / d x for each row of an (N, m) block."""
    X = _check_batch(net, inputs)
    y = _check_labels(net, targets, X.shape[0])
    d_input, _ = _backprop(net, X, y)
    return d_input


def input_gradient(net: Mlp, input: np.ndarray, target_class: int) -> np.ndarray:
    """Gradient of the cross-entropy loss at `target_class` w.r.t. one input."""
    x = np.asarray(input, dtype=float)
    if x.ndim != 1:
        raise InputError(f"expected a 1-D input vector, got shape {x.shape}")
    return input_gradient_batch(net, x[None, :], np.array([target_class]))[0]


def weight_gradients(
    net: Mlp, input: np.ndarray, target_class: int
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-layer (dW, db) of the cross-entropy loss for one input."""
    x = np.asarray(input, dtype=float)
    if x.ndim != 1:
        raise InputError(f"expected a 1-D input vector, got shape {x.shape}")
    y = _check_labels(net, np.array([target_class]), 1)
    _, grads = _backprop(net, x[None, :], y)
    return grads


def train(
    net: Mlp,
    inputs,
    labels,
    epochs: int = 100,
    learning_rate: float = 0.05,
    batch_size: int = 32,
) -> tuple[Mlp, list[float]]:
    """Mini-batch SGD on mean cross-entropy; returns (trained net, loss curve).

    The input net is left untouched; the loss curve holds one mean
    per-sample loss per epoch, computed as each batch is visited.
    Shuffling draws from a stream derived from the net's rng_seed, so
    identical (net, data, hyperparameters) retrain identically.
    """
    if epochs < 1:
        raise ConfigurationError(f"epochs must be >= 1, got {epochs}")
    if learning_rate < 0:
        raise ConfigurationError(f"learning_rate must be >= 0, got {learning_rate}")
    if batch_size < 1:
        raise ConfigurationError(f"batch_size must be >= 1, got {batch_size}")
    X = np.asarray(inputs, dtype=float)
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise TrainingError(
            f"expected training inputs of dimension {net.input_dim}, got shape {X.shape}"
        )
    if X.shape[0] == 0:
        raise TrainingError("training set is empty")
    y = _check_labels(net, np.asarray(labels), X.shape[0])
    if not np.all(np.isfinite(X)):
        raise NumericError("training inputs contain NaN or infinite entries")

    rng = substream(0 if net.spec.rng_seed is None else net.spec.rng_seed, "mlp-train")
    weights = [W.copy() for W in net.weights]
    biases = [b.copy() for b in net.biases]
    current = Mlp(spec=net.spec, weights=tuple(weights), biases=tuple(biases))
    n = X.shape[0]
    curve: list[float] = []
    for _ in range(epochs):
        order = rng.permutation(n)
        total_loss = 0.0
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            Xb, yb = X[idx], y[idx]
            acts, pres = _forward_trace(current, Xb)
            logits = acts[-1]
            total_loss += float(_cross_entropy(logits, yb).sum())
            probs = softmax(logits)
            delta = probs
            delta[np.arange(len(yb)), yb] -= 1.0
            delta /= len(yb)  # mean loss over the batch
            for l in range(len(weights) - 1, -1, -1):
                dW = delta.T @ acts[l]
                db = delta.sum(axis=0)
                if l > 0:
                    delta = (delta @ weights[l]) * _activate_grad(current, pres[l - 1])
                weights[l] = weights[l] - learning_rate * dW
                biases[l] = biases[l] - learning_rate * db
            current = Mlp(spec=net.spec, weights=tuple(weights), biases=tuple(biases))
        curve.append(total_loss / n)
    return current, curve


def export_weights(net: Mlp) -> str:
    """Serialize a network to a flat text record (one field per line)."""
    lines = [
        "layer_sizes: " + " ".join(str(int(s)) for s in net.spec.layer_sizes),
        f"activation: {net.spec.activation}",
    ]
    for l, (W, b) in enumerate(zip(net.weights, net.biases)):
        lines.append(f"W{l}: " + " ".join(repr(float(v)) for v in W.ravel()))
        lines.append(f"b{l}: " + " ".join(repr(float(v)) for v in b))
    return "\n".join(lines) + "\n"


def parse_weights(text: str) -> Mlp:
    """Inverse of export_weights (spec rng_seed is not preserved)."""
    fields: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if ":" not in line:
            raise InputError(f"malformed network record line: {line!r}")
        key, value = line.split(":", 1)
        fields[key.strip()] = value.strip()
    try:
        sizes = tuple(int(v) for v in fields["layer_sizes"].split())
        spec = MlpSpec(layer_sizes=sizes, activation=fields["activation"])
        validate_spec(spec)
        weights = []
        biases = []
        for l, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            W = np.array([float(v) for v in fields[f"W{l}"].split()])
            b = np.array([float(v) for v in fields[f"b{l}"].split()])
            if W.size != fan_out * fan_in or b.size != fan_out:
                raise InputError(f"layer {l} parameter count mismatch")
            weights.append(W.reshape(fan_out, fan_in))
            biases.append(b)
    except (KeyError, ValueError) as exc:
        raise InputError(f"malformed network record: {exc}") from exc
    return Mlp(spec=spec, weights=tuple(weights), biases=tuple(biases))
