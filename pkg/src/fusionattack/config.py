"""Strict JSON configuration documents for runs and sweeps.

Every key is optional and defaults to the package defaults; unknown
keys are rejected with their full path so a typo cannot silently
reconfigure an experiment. A parsed document serializes to a canonical
form (all fields explicit, fixed key order) that parses back to an
equal document.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .adversary import AdversaryConfig
from .errors import ConfigurationError
from .fusion import FusionTrainConfig
from .scenario import ScenarioConfig
from .simulator import RunConfig, validate_run

__all__ = ["ConfigDocument", "parse_config", "parse_config_text", "canonical_text"]

DEFAULT_SWEEP_M_VALUES = (2, 4, 6, 8, 10, 12, 14, 16, 18, 20)
DEFAULT_SWEEP_TAU_VALUES = (0.75,)
DEFAULT_SWEEP_SEEDS = tuple(range(10))
DEFAULT_SWEEP_CSV = "sweep.csv"


@dataclass(frozen=True)
class ConfigDocument:
    run: RunConfig
    m_values: tuple[int, ...]
    tau_values: tuple[float, ...]
    seeds: tuple[int, ...]
    rounds_csv: str | None
    sweep_csv: str
    summary_markdown: str | None


class _Section:
    """One mapping level of the document, with strict key accounting."""

    def __init__(self, data: dict, path: str):
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path or 'document'}: expected a JSON object")
        self.data = data
        self.path = path
        self.seen: set[str] = set()

    def _key(self, name: str) -> str:
        return f"{self.path}.{name}" if self.path else name

    def take(self, name: str, default):
        self.seen.add(name)
        return self.data.get(name, default)

    def section(self, name: str) -> "_Section | None":
        self.seen.add(name)
        if name not in self.data:
            return None
        return _Section(self.data[name], self._key(name))

    def finish(self) -> None:
        unknown = sorted(set(self.data) - self.seen)
        if unknown:
            raise ConfigurationError(
                f"unknown key {self._key(unknown[0])!r} (strict parsing; "
                f"known keys here: {sorted(self.seen)})"
            )

    def take_int(self, name: str, default):
        value = self.take(name, default)
        if value is default:
            return default
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{self._key(name)}: expected an integer, got {value!r}")
        return value

    def take_float(self, name: str, default):
        value = self.take(name, default)
        if value is default:
            return default
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{self._key(name)}: expected a number, got {value!r}")
        return float(value)

    def take_bool(self, name: str, default):
        value = self.take(name, default)
        if value is default:
            return default
        if not isinstance(value, bool):
            raise ConfigurationError(f"{self._key(name)}: expected a boolean, got {value!r}")
        return value

    def take_str(self, name: str, default):
        value = self.take(name, default)
        if value is default or value is None:
            return value
        if not isinstance(value, str):
            raise ConfigurationError(f"{self._key(name)}: expected a string, got {value!r}")
        return value

    def take_opt_seed(self, name: str, default):
        value = self.take(name, default)
        if value is default or value is None:
            return value
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(
                f"{self._key(name)}: expected an integer seed or null, got {value!r}"
            )
        return value

    def take_pair(self, name: str, default):
        value = self.take(name, default)
        if value is default:
            return default
        if (
            not isinstance(value, list)
            or len(value) != 2
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value)
        ):
            raise ConfigurationError(
                f"{self._key(name)}: expected a [low, high] pair of numbers, got {value!r}"
            )
        return (float(value[0]), float(value[1]))

    def take_int_list(self, name: str, default):
        value = self.take(name, default)
        if value is default:
            return default
        if not isinstance(value, list) or any(
            isinstance(v, bool) or not isinstance(v, int) for v in value
        ):
            raise ConfigurationError(
                f"{self._key(name)}: expected a list of integers, got {value!r}"
            )
        return tuple(value)

    def take_float_list(self, name: str, default):
        value = self.take(name, default)
        if value is default:
            return default
        if not isinstance(value, list) or any(
            isinstance(v, bool) or not isinstance(v, (int, float)) for v in value
        ):
            raise ConfigurationError(
                f"{self._key(name)}: expected a list of numbers, got {value!r}"
            )
        return tuple(float(v) for v in value)


def _parse_scenario(section: _Section | None) -> ScenarioConfig:
    d = ScenarioConfig()
    if section is None:
        return d
    cfg = ScenarioConfig(
        n_devices=section.take_int("n_devices", d.n_devices),
        class_prior=section.take_float("class_prior", d.class_prior),
        mean_range_class0=section.take_pair("mean_range_class0", d.mean_range_class0),
        mean_range_class1=section.take_pair("mean_range_class1", d.mean_range_class1),
        std_range=section.take_pair("std_range", d.std_range),
        n_rounds=section.take_int("n_rounds", d.n_rounds),
        rng_seed=section.take_opt_seed("rng_seed", d.rng_seed),
    )
    section.finish()
    return cfg


def _parse_fusion_train(section: _Section | None) -> FusionTrainConfig:
    d = FusionTrainConfig()
    if section is None:
        return d
    cfg = FusionTrainConfig(
        regularization=section.take_float("regularization", d.regularization),
        epochs=section.take_int("epochs", d.epochs),
        learning_rate_scale=section.take_float("learning_rate_scale", d.learning_rate_scale),
        rng_seed=section.take_opt_seed("rng_seed", d.rng_seed),
    )
    section.finish()
    return cfg


def _parse_adversary(section: _Section | None) -> AdversaryConfig:
    d = AdversaryConfig()
    if section is None:
        return d
    cfg = AdversaryConfig(
        controlled_ids=section.take_int_list("controlled_ids", d.controlled_ids),
        confidence_threshold=section.take_float("confidence_threshold", d.confidence_threshold),
        craft_step=section.take_float("craft_step", d.craft_step),
        craft_iters=section.take_int("craft_iters", d.craft_iters),
        clip_to_observed_range=section.take_bool(
            "clip_to_observed_range", d.clip_to_observed_range
        ),
        confidence_temperature=section.take_float(
            "confidence_temperature", d.confidence_temperature
        ),
        stop_on_surrogate_flip=section.take_bool(
            "stop_on_surrogate_flip", d.stop_on_surrogate_flip
        ),
        gate_direction=section.take_str("gate_direction", d.gate_direction),
    )
    section.finish()
    return cfg


def parse_config_text(text: str, source: str = "<config>") -> ConfigDocument:
    """Parse and validate a config document from JSON text."""
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{source}: malformed JSON: {exc}") from exc
    root = _Section(raw, "")
    run_defaults = RunConfig()
    run = RunConfig(
        scenario=_parse_scenario(root.section("scenario")),
        fusion_train=_parse_fusion_train(root.section("fusion_train")),
        adversary=_parse_adversary(root.section("adversary")),
        fusion_train_rounds=root.take_int(
            "fusion_train_rounds", run_defaults.fusion_train_rounds
        ),
        observation_rounds=root.take_int(
            "observation_rounds", run_defaults.observation_rounds
        ),
        attack_rounds=root.take_int("attack_rounds", run_defaults.attack_rounds),
        master_seed=root.take_int("master_seed", run_defaults.master_seed),
    )
    sweep_section = root.section("sweep")
    if sweep_section is None:
        m_values = DEFAULT_SWEEP_M_VALUES
        tau_values = DEFAULT_SWEEP_TAU_VALUES
        seeds = DEFAULT_SWEEP_SEEDS
    else:
        m_values = sweep_section.take_int_list("m_values", DEFAULT_SWEEP_M_VALUES)
        tau_values = sweep_section.take_float_list("tau_values", DEFAULT_SWEEP_TAU_VALUES)
        seeds = sweep_section.take_int_list("seeds", DEFAULT_SWEEP_SEEDS)
        sweep_section.finish()
    output_section = root.section("output")
    if output_section is None:
        rounds_csv, sweep_csv, summary_markdown = None, DEFAULT_SWEEP_CSV, None
    else:
        rounds_csv = output_section.take_str("rounds_csv", None)
        sweep_csv = output_section.take_str("sweep_csv", DEFAULT_SWEEP_CSV)
        summary_markdown = output_section.take_str("summary_markdown", None)
        output_section.finish()
        if sweep_csv is None:
            raise ConfigurationError("output.sweep_csv must be a string, not null")
    root.finish()

    try:
        validate_run(run)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{source}: {exc}") from exc
    if not m_values or not tau_values or not seeds:
        raise ConfigurationError(f"{source}: sweep lists must be non-empty")
    n = run.scenario.n_devices
    for m in m_values:
        if not 0 <= m <= n:
            raise ConfigurationError(
                f"{source}: sweep.m_values entries must lie in [0, {n}], got {m}"
            )
    for tau in tau_values:
        if not 0.5 < tau <= 1.0:
            raise ConfigurationError(
                f"{source}: sweep.tau_values entries must lie in (0.5, 1], got {tau}"
            )
    for seed in seeds:
        if not 0 <= seed < 2**64:
            raise ConfigurationError(
                f"{source}: sweep.seeds entries must be u64 values, got {seed}"
            )
    return ConfigDocument(
        run=run,
        m_values=m_values,
        tau_values=tau_values,
        seeds=seeds,
        rounds_csv=rounds_csv,
        sweep_csv=sweep_csv,
        summary_markdown=summary_markdown,
    )


def parse_config(path: str | Path) -> ConfigDocument:
    """Parse a config document from a file (missing file is a config error)."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {p}: {exc}") from exc
    return parse_config_text(text, source=str(p))


def canonical_text(doc: ConfigDocument) -> str:
    """Serialize with every field explicit; parses back to an equal document."""
    run = doc.run
    payload = {
        "scenario": {
            "n_devices": run.scenario.n_devices,
            "class_prior": run.scenario.class_prior,
            "mean_range_class0": list(run.scenario.mean_range_class0),
            "mean_range_class1": list(run.scenario.mean_range_class1),
            "std_range": list(run.scenario.std_range),
            "n_rounds": run.scenario.n_rounds,
            "rng_seed": run.scenario.rng_seed,
        },
        "fusion_train": {
            "regularization": run.fusion_train.regularization,
            "epochs": run.fusion_train.epochs,
            "learning_rate_scale": run.fusion_train.learning_rate_scale,
            "rng_seed": run.fusion_train.rng_seed,
        },
        "adversary": {
            "controlled_ids": list(run.adversary.controlled_ids),
            "confidence_threshold": run.adversary.confidence_threshold,
            "craft_step": run.adversary.craft_step,
            "craft_iters": run.adversary.craft_iters,
            "clip_to_observed_range": run.adversary.clip_to_observed_range,
            "confidence_temperature": run.adversary.confidence_temperature,
            "stop_on_surrogate_flip": run.adversary.stop_on_surrogate_flip,
            "gate_direction": run.adversary.gate_direction,
        },
        "fusion_train_rounds": run.fusion_train_rounds,
        "observation_rounds": run.observation_rounds,
        "attack_rounds": run.attack_rounds,
        "master_seed": run.master_seed,
        "sweep": {
            "m_values": list(doc.m_values),
            "tau_values": list(doc.tau_values),
            "seeds": list(doc.seeds),
        },
        "output": {
            "rounds_csv": doc.rounds_csv,
            "sweep_csv": doc.sweep_csv,
            "summary_markdown": doc.summary_markdown,
        },
    }
    return json.dumps(payload, indent=2) + "\n"
