"""Fusion center: decision models over one round of device readings.

The trained model is a linear SVM fit with the Pegasos subgradient
method (mini-batch updates, step 1/(lambda*t)). A threshold-count
majority vote is available as a training-free baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigurationError,
    InputError,
    NumericError,
    TrainingError,
    UnsupportedOperationError,
)
from .rng import substream
from .scenario import Round

__all__ = [
    "FusionModel",
    "FusionTrainConfig",
    "train_fusion",
    "fuse",
    "fuse_batch",
    "decision_margin",
    "export_model",
    "parse_model",
]

KIND_LINEAR_SVM = "LinearSVM"
KIND_MAJORITY_VOTE = "MajorityVote"

# Mini-batch size of the Pegasos subgradient steps. Part of the
# training algorithm rather than the config surface: the step count it
# induces (epochs * ceil(n/64)) is what the simulator's accuracy and
# calibration behavior were tuned against.
PEGASOS_BATCH = 64


@dataclass(frozen=True)
class FusionModel:
    kind: str
    weights: np.ndarray | None = None
    bias: float = 0.0
    vote_thresholds: np.ndarray | None = None

    @property
    def n_devices(self) -> int:
        if self.kind == KIND_LINEAR_SVM:
            return int(self.weights.shape[0])
        return int(self.vote_thresholds.shape[0])


@dataclass(frozen=True)
class FusionTrainConfig:
    regularization: float = 1e-3
    epochs: int = 50
    learning_rate_scale: float = 1.0
    # None = derive from the run's master seed.
    rng_seed: int | None = None


def validate_fusion_train(cfg: FusionTrainConfig) -> None:
    if cfg.regularization <= 0:
        raise ConfigurationError(f"regularization must be > 0, got {cfg.regularization}")
    if cfg.epochs < 1:
        raise ConfigurationError(f"epochs must be >= 1, got {cfg.epochs}")
    if cfg.learning_rate_scale <= 0:
        raise ConfigurationError(
            f"learning_rate_scale must be > 0, got {cfg.learning_rate_scale}"
        )


def _stack_rounds(data: list[Round]) -> tuple[np.ndarray, np.ndarray]:
    X = np.stack([r.readings for r in data])
    y = np.array([r.true_label for r in data], dtype=np.int64)
    return X, y


def train_fusion(data: list[Round], cfg: FusionTrainConfig) -> tuple[FusionModel, float]:
    """Fit a linear SVM to labeled rounds; return (model, training accuracy).

    Mini-batch Pegasos: one pass per epoch over a fresh shuffle, step
    eta_t = scale / (lambda * t) with t counting batches. Each step
    shrinks the weights by (1 - eta*lambda) and adds the batch-averaged
    hinge subgradient of the violating samples; the bias takes the
    subgradient step without shrinkage (batch averaging keeps it
    bounded, since violator labels largely cancel).
    """
    validate_fusion_train(cfg)
    if not data:
        raise TrainingError("training set is empty")
    rng = substream(0 if cfg.rng_seed is None else cfg.rng_seed, "fusion-train")
    X, y01 = _stack_rounds(data)
    classes = np.unique(y01)
    if classes.size < 2:
        raise TrainingError(
            f"training set contains a single class ({int(classes[0])}); "
            "a discriminative fusion rule needs both"
        )
    y = np.where(y01 == 1, 1.0, -1.0)
    n_samples, n_devices = X.shape
    lam = cfg.regularization
    w = np.zeros(n_devices)
    b = 0.0
    t = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(n_samples)
        for start in range(0, n_samples, PEGASOS_BATCH):
            t += 1
            eta = cfg.learning_rate_scale / (lam * t)
            idx = order[start : start + PEGASOS_BATCH]
            Xb, yb = X[idx], y[idx]
            violating = yb * (Xb @ w + b) < 1.0
            w = max(0.0, 1.0 - eta * lam) * w
            if violating.any():
                w = w + (eta / len(yb)) * (yb[violating] @ Xb[violating])
                b = b + (eta / len(yb)) * yb[violating].sum()
    model = FusionModel(kind=KIND_LINEAR_SVM, weights=w, bias=float(b))
    accuracy = float(np.mean(fuse_batch(model, X) == y01))
    return model, accuracy


def _check_readings(model: FusionModel, readings: np.ndarray, ndim: int) -> np.ndarray:
    readings = np.asarray(readings, dtype=float)
    if readings.ndim != ndim or readings.shape[-1] != model.n_devices:
        raise InputError(
            f"expected readings with {model.n_devices} devices, got shape {readings.shape}"
        )
    return readings


def fuse_batch(model: FusionModel, readings: np.ndarray) -> np.ndarray:
    """Vectorized decisions for an (N, n) block of rounds."""
    readings = _check_readings(model, readings, ndim=2)
    if model.kind == KIND_LINEAR_SVM:
        scores = readings @ model.weights + model.bias
        return (scores > 0.0).astype(np.int64)
    if model.kind == KIND_MAJORITY_VOTE:
        votes = (readings > model.vote_thresholds).sum(axis=1)
        return (votes > model.n_devices / 2).astype(np.int64)
    raise ConfigurationError(f"unknown fusion kind {model.kind!r}")


def fuse(model: FusionModel, readings: np.ndarray) -> int:
    """Decide one round: class 1 iff the score is strictly positive (ties -> 0)."""
    readings = _check_readings(model, readings, ndim=1)
    return int(fuse_batch(model, readings[None, :])[0])


def decision_margin(model: FusionModel, readings: np.ndarray) -> float:
    """Signed Euclidean distance of one round's readings to the SVM hyperplane."""
    if model.kind != KIND_LINEAR_SVM:
        raise UnsupportedOperationError(
            f"decision_margin is defined only for {KIND_LINEAR_SVM} models"
        )
    readings = _check_readings(model, readings, ndim=1)
    norm = float(np.linalg.norm(model.weights))
    if norm == 0.0:
        raise NumericError("decision_margin undefined for a zero weight vector")
    return float((model.weights @ readings + model.bias) / norm)


def export_model(model: FusionModel) -> str:
    """Serialize a model to a flat text record (one field per line)."""
    lines = [f"kind: {model.kind}", f"n_devices: {model.n_devices}"]
    if model.kind == KIND_LINEAR_SVM:
        lines.append("weights: " + " ".join(repr(float(v)) for v in model.weights))
        lines.append(f"bias: {float(model.bias)!r}")
    elif model.kind == KIND_MAJORITY_VOTE:
        lines.append(
            "vote_thresholds: " + " ".join(repr(float(v)) for v in model.vote_thresholds)
        )
    else:
        raise ConfigurationError(f"unknown fusion kind {model.kind!r}")
    return "\n".join(lines) + "\n"


def parse_model(text: str) -> FusionModel:
    """Inverse of export_model."""
    fields: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if ":" not in line:
            raise InputError(f"malformed model record line: {line!r}")
        key, value = line.split(":", 1)
        fields[key.strip()] = value.strip()
    try:
        kind = fields["kind"]
        n = int(fields["n_devices"])
        if kind == KIND_LINEAR_SVM:
            weights = np.array([float(v) for v in fields["weights"].split()])
            model = FusionModel(kind=kind, weights=weights, bias=float(fields["bias"]))
        elif kind == KIND_MAJORITY_VOTE:
            thresholds = np.array([float(v) for v in fields["vote_thresholds"].split()])
            model = FusionModel(kind=kind, vote_thresholds=thresholds)
        else:
            raise InputError(f"unknown fusion kind {kind!r}")
    except (KeyError, ValueError) as exc:
        raise InputError(f"malformed model record: {exc}") from exc
    if model.n_devices != n:
        raise InputError(
            f"model record declares {n} devices but carries {model.n_devices} parameters"
        )
    return model
