"""The adversary: observation, surrogate fitting, gating, and crafting.

The attacker controls m of the n devices. During the observation phase
it records (own readings, fusion decision) pairs; from those it fits a
small dense network that imitates the fusion rule as seen through its
m coordinates. At attack time it launches only on rounds where the
surrogate's calibrated confidence clears a threshold, and perturbs its
readings by iterated sign-gradient steps held inside the historically
observed per-coordinate range.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, InputError, TrainingError
from .neuralnet import (
    Mlp,
    MlpSpec,
    forward_batch,
    init_mlp,
    input_gradient_batch,
    logits_batch,
    softmax,
    train,
)

__all__ = [
    "AdversaryConfig",
    "ObservationLog",
    "SurrogateModel",
    "SurrogateTrainConfig",
    "AttackDecision",
    "new_log",
    "observe",
    "fit_surrogate",
    "gate",
    "gate_batch",
    "craft",
    "craft_batch",
    "decide",
]

GATE_ABOVE = "above"
GATE_BELOW = "below"


@dataclass(frozen=True)
class AdversaryConfig:
    """Attack-side knobs.

    confidence_temperature scales the surrogate logits before the
    softmax used for GATING only (confidence = max softmax(z / T));
    inferred labels and crafting gradients use the raw network. The
    default 1.0 leaves confidences untouched; raise it to soften a
    saturated surrogate (spreads the gate sweep) or lower it to
    sharpen an underconfident one.

    stop_on_surrogate_flip stops crafting at the first iterate the
    surrogate classifies as the opposite class (plus one margin-push
    step). Off by default: the surrogate's boundary sits far inside the
    fusion boundary in the controlled subspace, so stopping there
    rarely moves the fused decision; the full budget is what makes the
    attack bite.

    gate_direction "above" launches when confidence >= threshold (the
    primary reading); "below" launches when confidence <= threshold
    (sensitivity analysis of the opposite reading).
    """

    controlled_ids: tuple[int, ...] = tuple(range(8))
    confidence_threshold: float = 0.75
    craft_step: float = 0.25
    craft_iters: int = 30
    clip_to_observed_range: bool = True
    confidence_temperature: float = 1.0
    stop_on_surrogate_flip: bool = False
    gate_direction: str = GATE_ABOVE

    @property
    def n_controlled(self) -> int:
        return len(self.controlled_ids)


def validate_adversary(cfg: AdversaryConfig, n_devices: int | None = None) -> None:
    ids = tuple(int(i) for i in cfg.controlled_ids)
    if len(set(ids)) != len(ids):
        raise ConfigurationError(f"controlled_ids must be distinct, got {ids}")
    if any(i < 0 for i in ids):
        raise ConfigurationError(f"controlled_ids must be non-negative, got {ids}")
    if n_devices is not None and any(i >= n_devices for i in ids):
        raise ConfigurationError(
            f"controlled_ids must lie in [0, {n_devices}), got {ids}"
        )
    if not 0.5 < cfg.confidence_threshold <= 1.0:
        raise ConfigurationError(
            f"confidence_threshold must lie in (0.5, 1], got {cfg.confidence_threshold}"
        )
    if cfg.craft_step <= 0:
        raise ConfigurationError(f"craft_step must be > 0, got {cfg.craft_step}")
    if cfg.craft_iters < 0:
        raise ConfigurationError(f"craft_iters must be >= 0, got {cfg.craft_iters}")
    if cfg.confidence_temperature <= 0:
        raise ConfigurationError(
            f"confidence_temperature must be > 0, got {cfg.confidence_temperature}"
        )
    if cfg.gate_direction not in (GATE_ABOVE, GATE_BELOW):
        raise ConfigurationError(
            f"gate_direction must be {GATE_ABOVE!r} or {GATE_BELOW!r}, "
            f"got {cfg.gate_direction!r}"
        )


@dataclass
class ObservationLog:
    n_controlled: int
    entries: list[tuple[np.ndarray, int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)


def new_log(n_controlled: int) -> ObservationLog:
    if n_controlled < 1:
        raise ConfigurationError(f"n_controlled must be >= 1, got {n_controlled}")
    return ObservationLog(n_controlled=n_controlled)


def observe(
    log: ObservationLog, controlled_readings: np.ndarray, fusion_decision: int
) -> ObservationLog:
    """Append one (controlled readings, fusion decision) pair; returns the log."""
    readings = np.asarray(controlled_readings, dtype=float)
    if readings.ndim != 1 or readings.shape[0] != log.n_controlled:
        raise InputError(
            f"expected {log.n_controlled} controlled readings, got shape {readings.shape}"
        )
    if fusion_decision not in (0, 1):
        raise InputError(f"fusion_decision must be 0 or 1, got {fusion_decision}")
    log.entries.append((readings.copy(), int(fusion_decision)))
    return log


@dataclass(frozen=True)
class SurrogateModel:
    net: Mlp
    observed_min: np.ndarray
    observed_max: np.ndarray


@dataclass(frozen=True)
class SurrogateTrainConfig:
    epochs: int = 10
    learning_rate: float = 0.05
    batch_size: int = 32


def fit_surrogate(
    log: ObservationLog, spec: MlpSpec, train_cfg: SurrogateTrainConfig
) -> tuple[SurrogateModel, float]:
    """Train the imitation net on logged (readings, fusion decision) pairs.

    Labels are the observed fusion decisions, not true world states.
    Returns the model plus its agreement rate with the log. A log with
    a single decision class fits the constant function (the adversary
    can still act on it); the per-coordinate min/max of the logged
    readings become the crafting clip box.
    """
    if len(log) == 0:
        raise TrainingError("observation log is empty")
    if spec.layer_sizes[0] != log.n_controlled or spec.layer_sizes[-1] != 2:
        raise ConfigurationError(
            f"surrogate spec must map {log.n_controlled} readings to 2 classes, "
            f"got layer_sizes {spec.layer_sizes}"
        )
    X = np.stack([entry[0] for entry in log.entries])
    y = np.array([entry[1] for entry in log.entries], dtype=np.int64)
    net0 = init_mlp(spec)
    net, _ = train(
        net0,
        X,
        y,
        epochs=train_cfg.epochs,
        learning_rate=train_cfg.learning_rate,
        batch_size=train_cfg.batch_size,
    )
    agreement = float(np.mean(forward_batch(net, X).argmax(axis=1) == y))
    model = SurrogateModel(
        net=net, observed_min=X.min(axis=0), observed_max=X.max(axis=0)
    )
    return model, agreement


@dataclass(frozen=True)
class AttackDecision:
    launched: bool
    inferred_label: int
    confidence: float
    crafted_readings: np.ndarray | None = None


def gate_batch(
    surrogate: SurrogateModel,
    controlled_readings: np.ndarray,
    confidence_threshold: float,
    *,
    temperature: float = 1.0,
    direction: str = GATE_ABOVE,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized gate: (launched, inferred_label, confidence) per row.

    Confidence is the max softmax of temperature-scaled logits; the
    inferred label is the raw argmax (scaling never reorders logits).
    Launch on confidence >= threshold ("above") or <= ("below"); ties
    launch in both directions.
    """
    X = np.asarray(controlled_readings, dtype=float)
    logits = logits_batch(surrogate.net, X)
    inferred = logits.argmax(axis=1)
    conf = softmax(logits / temperature).max(axis=1)
    if direction == GATE_ABOVE:
        launched = conf >= confidence_threshold
    elif direction == GATE_BELOW:
        launched = conf <= confidence_threshold
    else:
        raise ConfigurationError(f"unknown gate_direction {direction!r}")
    return launched, inferred.astype(np.int64), conf


def gate(
    surrogate: SurrogateModel,
    controlled_readings: np.ndarray,
    confidence_threshold: float,
    *,
    temperature: float = 1.0,
    direction: str = GATE_ABOVE,
) -> AttackDecision:
    """Decide whether one round's readings trigger an attack."""
    readings = np.asarray(controlled_readings, dtype=float)
    if readings.ndim != 1:
        raise InputError(f"expected a 1-D readings vector, got shape {readings.shape}")
    if not 0.5 < confidence_threshold <= 1.0:
        raise ConfigurationError(
            f"confidence_threshold must lie in (0.5, 1], got {confidence_threshold}"
        )
    launched, inferred, conf = gate_batch(
        surrogate,
        readings[None, :],
        confidence_threshold,
        temperature=temperature,
        direction=direction,
    )
    return AttackDecision(
        launched=bool(launched[0]),
        inferred_label=int(inferred[0]),
        confidence=float(conf[0]),
    )


def _clip(cfg: AdversaryConfig, surrogate: SurrogateModel, X: np.ndarray) -> np.ndarray:
    if cfg.clip_to_observed_range:
        return np.clip(X, surrogate.observed_min, surrogate.observed_max)
    return X


def craft_batch(
    surrogate: SurrogateModel,
    controlled_readings: np.ndarray,
    inferred_labels: np.ndarray,
    cfg: AdversaryConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Craft adversarial readings for a block of launched rounds.

    Targets the class opposite each row's inferred label: every
    iteration descends that target's cross-entropy by craft_step times
    the gradient sign, then clips into the observed box. Returns
    (crafted readings, per-row flag that the surrogate now prefers the
    target). Rows where the gradient sign is zero everywhere simply
    stop moving — that is a stall, not an error.

    With stop_on_surrogate_flip, a row freezes one step after its first
    iterate that the surrogate classifies as the target (margin push).
    """
    X = np.asarray(controlled_readings, dtype=float).copy()
    if X.ndim != 2 or X.shape[1] != surrogate.net.input_dim:
        raise InputError(
            f"expected readings with {surrogate.net.input_dim} coordinates, "
            f"got shape {X.shape}"
        )
    inferred = np.asarray(inferred_labels, dtype=np.int64)
    if inferred.shape != (X.shape[0],):
        raise InputError(
            f"expected {X.shape[0]} inferred labels, got shape {inferred.shape}"
        )
    targets = 1 - inferred
    step = cfg.craft_step
    if cfg.craft_iters == 0 or X.shape[0] == 0:
        flipped = (
            forward_batch(surrogate.net, X).argmax(axis=1) == targets
            if X.shape[0]
            else np.zeros(0, dtype=bool)
        )
        return X, flipped

    if not cfg.stop_on_surrogate_flip:
        # Rows stop iterating once an update leaves them unchanged
        # (pinned to the clip box or zero gradient sign): the update
        # map is memoryless, so an unmoved row never moves again and
        # skipping it cannot change the result.
        active = np.arange(X.shape[0])
        for _ in range(cfg.craft_iters):
            if active.size == 0:
                break
            Xa = X[active]
            g = input_gradient_batch(surrogate.net, Xa, targets[active])
            Xn = _clip(cfg, surrogate, Xa - step * np.sign(g))
            moved = np.any(Xn != Xa, axis=1)
            X[active] = Xn
            active = active[moved]
        flipped = forward_batch(surrogate.net, X).argmax(axis=1) == targets
        return X, flipped

    active = np.ones(X.shape[0], dtype=bool)
    flipped = np.zeros(X.shape[0], dtype=bool)
    for _ in range(cfg.craft_iters):
        if not active.any():
            break
        rows = np.flatnonzero(active)
        g = input_gradient_batch(surrogate.net, X[rows], targets[rows])
        X[rows] = _clip(cfg, surrogate, X[rows] - step * np.sign(g))
        preds = forward_batch(surrogate.net, X[rows]).argmax(axis=1)
        hit = rows[preds == targets[rows]]
        if hit.size:
            g2 = input_gradient_batch(surrogate.net, X[hit], targets[hit])
            X[hit] = _clip(cfg, surrogate, X[hit] - step * np.sign(g2))
            flipped[hit] = True
            active[hit] = False
    return X, flipped


def craft(
    surrogate: SurrogateModel,
    controlled_readings: np.ndarray,
    inferred_label: int,
    cfg: AdversaryConfig,
) -> np.ndarray:
    """Craft one round's adversarial readings (see craft_batch)."""
    readings = np.asarray(controlled_readings, dtype=float)
    if readings.ndim != 1:
        raise InputError(f"expected a 1-D readings vector, got shape {readings.shape}")
    crafted, _ = craft_batch(
        surrogate, readings[None, :], np.array([inferred_label]), cfg
    )
    return crafted[0]


def decide(
    surrogate: SurrogateModel,
    controlled_readings: np.ndarray,
    cfg: AdversaryConfig,
) -> AttackDecision:
    """Gate one round and, if launched, attach crafted readings."""
    decision = gate(
        surrogate,
        controlled_readings,
        cfg.confidence_threshold,
        temperature=cfg.confidence_temperature,
        direction=cfg.gate_direction,
    )
    if not decision.launched:
        return decision
    crafted = craft(surrogate, controlled_readings, decision.inferred_label, cfg)
    return replace(decision, crafted_readings=crafted)
