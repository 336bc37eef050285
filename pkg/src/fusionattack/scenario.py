"""Synthetic sensing world: device profiles, labels, clean readings.

Each of n devices reports one scalar per round. Conditional on the
round's binary world state, device i's reading is Gaussian with
per-device, per-class parameters drawn once from configured ranges.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "DeviceProfile",
    "ScenarioConfig",
    "Round",
    "generate_profiles",
    "generate_rounds",
    "profile_arrays",
]

# Floor applied to sampled standard deviations so a degenerate
# std_range of [0, 0] yields point-mass readings instead of a
# zero-scale error from the normal sampler.
STD_EPSILON = 1e-9


@dataclass(frozen=True)
class DeviceProfile:
    device_id: int
    mean_per_class: tuple[float, float]
    std_per_class: tuple[float, float]


@dataclass(frozen=True)
class ScenarioConfig:
    n_devices: int = 20
    class_prior: float = 0.5
    mean_range_class0: tuple[float, float] = (-1.5, -0.5)
    mean_range_class1: tuple[float, float] = (0.5, 1.5)
    std_range: tuple[float, float] = (0.5, 1.5)
    n_rounds: int = 10_000
    # None = derive from the run's master seed.
    rng_seed: int | None = None


@dataclass(frozen=True)
class Round:
    round_id: int
    true_label: int
    readings: np.ndarray = field(repr=False)


def _check_interval(name: str, interval: tuple[float, float]) -> None:
    lo, hi = interval
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise ConfigurationError(f"{name}: bounds must be finite, got {interval}")
    if lo > hi:
        raise ConfigurationError(f"{name}: lower bound {lo} exceeds upper bound {hi}")


def validate_scenario(cfg: ScenarioConfig) -> None:
    if cfg.n_devices < 1:
        raise ConfigurationError(f"n_devices must be >= 1, got {cfg.n_devices}")
    if cfg.n_rounds < 1:
        raise ConfigurationError(f"n_rounds must be >= 1, got {cfg.n_rounds}")
    if not 0.0 <= cfg.class_prior <= 1.0:
        raise ConfigurationError(f"class_prior must lie in [0, 1], got {cfg.class_prior}")
    _check_interval("mean_range_class0", cfg.mean_range_class0)
    _check_interval("mean_range_class1", cfg.mean_range_class1)
    _check_interval("std_range", cfg.std_range)
    if cfg.std_range[0] < 0:
        raise ConfigurationError(f"std_range must be non-negative, got {cfg.std_range}")


def generate_profiles(cfg: ScenarioConfig, rng: np.random.Generator) -> list[DeviceProfile]:
    """Draw per-device Gaussian parameters uniformly from the configured ranges."""
    validate_scenario(cfg)
    n = cfg.n_devices
    mean0 = rng.uniform(cfg.mean_range_class0[0], cfg.mean_range_class0[1], n)
    mean1 = rng.uniform(cfg.mean_range_class1[0], cfg.mean_range_class1[1], n)
    std0 = np.maximum(rng.uniform(cfg.std_range[0], cfg.std_range[1], n), STD_EPSILON)
    std1 = np.maximum(rng.uniform(cfg.std_range[0], cfg.std_range[1], n), STD_EPSILON)
    return [
        DeviceProfile(i, (float(mean0[i]), float(mean1[i])), (float(std0[i]), float(std1[i])))
        for i in range(n)
    ]


def profile_arrays(profiles: list[DeviceProfile]) -> tuple[np.ndarray, np.ndarray]:
    """Stack profiles into (means, stds) arrays of shape (2, n) indexed by class."""
    means = np.array([[p.mean_per_class[k] for p in profiles] for k in (0, 1)])
    stds = np.array([[p.std_per_class[k] for p in profiles] for k in (0, 1)])
    return means, stds


def generate_rounds(
    profiles: list[DeviceProfile],
    cfg: ScenarioConfig,
    rng: np.random.Generator,
    n_rounds: int | None = None,
) -> list[Round]:
    """Sample the round sequence: Bernoulli labels, then per-device Gaussians.

    Labels and readings use two independent child streams of `rng`, so
    the label sequence for a given seed does not depend on n_devices.
    """
    if not profiles:
        raise ConfigurationError("generate_rounds requires at least one device profile")
    count = cfg.n_rounds if n_rounds is None else n_rounds
    label_rng, reading_rng = rng.spawn(2)
    labels = (label_rng.random(count) < cfg.class_prior).astype(np.int64)
    means, stds = profile_arrays(profiles)
    noise = reading_rng.standard_normal((count, len(profiles)))
    readings = means[labels] + stds[labels] * noise
    return [Round(i, int(labels[i]), readings[i]) for i in range(count)]
