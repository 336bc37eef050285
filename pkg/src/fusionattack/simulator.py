"""End-to-end timeline: fusion pre-training, observation, attack, metrics.

A run is deterministic given its master seed. All randomness flows
through named substreams derived from that seed, so two runs that
differ only in adversary knobs (m, threshold) share the same world —
profiles, fusion model, and round sequence — and sweeps vary exactly
the factor under study. The sweep engine exploits that sharing by
building each seed's world once and each (seed, m) surrogate once;
per-cell results are identical to independent full runs because
gating confidences do not depend on the threshold and crafting is
independent across rounds.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .adversary import (
    GATE_ABOVE,
    AdversaryConfig,
    SurrogateModel,
    SurrogateTrainConfig,
    craft_batch,
    fit_surrogate,
    gate_batch,
    new_log,
    observe,
    validate_adversary,
)
from .errors import ConfigurationError, TrainingError
from .fusion import FusionModel, FusionTrainConfig, fuse_batch, train_fusion
from .neuralnet import ACTIVATION_TANH, MlpSpec
from .rng import derive_seed, substream
from .scenario import (
    DeviceProfile,
    ScenarioConfig,
    generate_profiles,
    generate_rounds,
    validate_scenario,
)

__all__ = [
    "RunConfig",
    "AttackRecord",
    "RunReport",
    "SweepCell",
    "AggregateRow",
    "run",
    "hit_ratio",
    "sweep",
    "sweep_m",
    "sweep_threshold",
    "aggregate_cells",
]

# The surrogate's architecture and training budget are fixed properties
# of the simulated adversary: a 5-layer tanh network (saturating units
# keep crafting gradients nonzero far from the data, where ReLU paths
# die) trained with a single low-rate pass. One gentle epoch imitates
# the fusion rule at ~0.96+ agreement while leaving the logit gaps
# small, so the confidence gate sweeps over a genuinely graded range
# instead of a saturated one (longer or hotter training drives nearly
# every round past any threshold and the gate stops selecting).
SURROGATE_HIDDEN = (32, 32, 32)
SURROGATE_ACTIVATION = ACTIVATION_TANH
SURROGATE_TRAIN = SurrogateTrainConfig(epochs=1, learning_rate=0.008, batch_size=32)


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    fusion_train: FusionTrainConfig = field(default_factory=FusionTrainConfig)
    adversary: AdversaryConfig = field(default_factory=AdversaryConfig)
    # Size of the independent clean dataset the fusion center is
    # pre-trained on. Small enough that the fusion rule keeps a thin
    # band of genuinely uncertain rounds (the regime the attack's
    # threshold behavior is about) while staying above 0.95 accuracy.
    fusion_train_rounds: int = 300
    observation_rounds: int = 2_000
    attack_rounds: int = 8_000
    master_seed: int = 0


def validate_run(cfg: RunConfig) -> None:
    validate_scenario(cfg.scenario)
    validate_adversary(cfg.adversary, cfg.scenario.n_devices)
    if cfg.fusion_train_rounds < 1:
        raise ConfigurationError(
            f"fusion_train_rounds must be >= 1, got {cfg.fusion_train_rounds}"
        )
    if cfg.observation_rounds < 1:
        raise ConfigurationError(
            f"observation_rounds must be >= 1, got {cfg.observation_rounds}"
        )
    if cfg.attack_rounds < 1:
        raise ConfigurationError(f"attack_rounds must be >= 1, got {cfg.attack_rounds}")
    if cfg.observation_rounds + cfg.attack_rounds != cfg.scenario.n_rounds:
        raise ConfigurationError(
            "observation_rounds + attack_rounds must equal scenario.n_rounds: "
            f"{cfg.observation_rounds} + {cfg.attack_rounds} != {cfg.scenario.n_rounds}"
        )
    if not 0 <= int(cfg.master_seed) < 2**64:
        raise ConfigurationError(f"master_seed must be a u64, got {cfg.master_seed}")


@dataclass(frozen=True)
class AttackRecord:
    round_id: int
    clean_decision: int
    attacked_decision: int
    launched: bool
    inferred_label: int
    confidence: float
    flipped: bool


@dataclass(frozen=True)
class RunReport:
    hit_ratio: float | None
    attacks_launched: int
    attacks_flipped: int
    attack_rate: float
    surrogate_agreement: float | None
    fusion_clean_accuracy: float
    fusion_train_accuracy: float
    config: RunConfig
    records: list[AttackRecord] = field(repr=False)
    # Everything the replay oracle needs: the frozen fusion model plus
    # the full clean/attacked report matrices for the attack phase.
    fusion_model: FusionModel = field(repr=False, default=None)
    true_labels: np.ndarray = field(repr=False, default=None)
    clean_report_vectors: np.ndarray = field(repr=False, default=None)
    attacked_report_vectors: np.ndarray = field(repr=False, default=None)


@dataclass(frozen=True)
class World:
    """Everything shared by runs that differ only in adversary knobs."""

    profiles: list[DeviceProfile]
    fusion_model: FusionModel
    fusion_train_accuracy: float
    labels: np.ndarray  # (n_rounds,)
    readings: np.ndarray  # (n_rounds, n_devices)
    clean_decisions: np.ndarray  # (n_rounds,)
    fusion_clean_accuracy: float
    master_seed: int


def build_world(cfg: RunConfig) -> World:
    """Generate profiles, pre-train the fusion model, lay out the timeline."""
    validate_run(cfg)
    scenario_seed = (
        cfg.scenario.rng_seed
        if cfg.scenario.rng_seed is not None
        else derive_seed(cfg.master_seed, "scenario")
    )
    profiles = generate_profiles(cfg.scenario, substream(scenario_seed, "profiles"))
    fusion_data = generate_rounds(
        profiles,
        cfg.scenario,
        substream(scenario_seed, "fusion-data"),
        n_rounds=cfg.fusion_train_rounds,
    )
    fusion_cfg = cfg.fusion_train
    if fusion_cfg.rng_seed is None:
        fusion_cfg = replace(fusion_cfg, rng_seed=derive_seed(cfg.master_seed, "fusion-train"))
    try:
        model, train_acc = train_fusion(fusion_data, fusion_cfg)
    except TrainingError as exc:
        # A degenerate pre-training draw (e.g. class_prior 0 or 1) is a
        # scenario configuration problem, not a runtime fault.
        raise ConfigurationError(
            f"fusion pre-training data is degenerate for this scenario: {exc}"
        ) from exc
    timeline = generate_rounds(
        profiles, cfg.scenario, substream(scenario_seed, "timeline")
    )
    labels = np.array([r.true_label for r in timeline], dtype=np.int64)
    readings = np.stack([r.readings for r in timeline])
    clean_decisions = fuse_batch(model, readings)
    return World(
        profiles=profiles,
        fusion_model=model,
        fusion_train_accuracy=train_acc,
        labels=labels,
        readings=readings,
        clean_decisions=clean_decisions,
        fusion_clean_accuracy=float(np.mean(clean_decisions == labels)),
        master_seed=cfg.master_seed,
    )


def surrogate_spec(n_controlled: int, master_seed: int) -> MlpSpec:
    return MlpSpec(
        layer_sizes=(n_controlled, *SURROGATE_HIDDEN, 2),
        activation=SURROGATE_ACTIVATION,
        rng_seed=derive_seed(master_seed, "surrogate"),
    )


def build_surrogate(
    world: World, adversary: AdversaryConfig, observation_rounds: int
) -> tuple[SurrogateModel, float]:
    """Replay the observation phase and fit the adversary's surrogate."""
    ids = np.array(adversary.controlled_ids, dtype=np.int64)
    log = new_log(len(ids))
    for i in range(observation_rounds):
        observe(log, world.readings[i, ids], int(world.clean_decisions[i]))
    spec = surrogate_spec(len(ids), world.master_seed)
    return fit_surrogate(log, spec, SURROGATE_TRAIN)


def _attack_phase(
    world: World,
    surrogate: SurrogateModel | None,
    cfg: RunConfig,
) -> tuple[list[AttackRecord], np.ndarray, np.ndarray]:
    """Run the attack rounds; returns (records, clean matrix, attacked matrix)."""
    adv = cfg.adversary
    obs, n_attack = cfg.observation_rounds, cfg.attack_rounds
    clean = world.readings[obs : obs + n_attack]
    clean_dec = world.clean_decisions[obs : obs + n_attack]
    attacked = clean.copy()
    attacked_dec = clean_dec.copy()
    if surrogate is None:
        launched = np.zeros(n_attack, dtype=bool)
        inferred = np.zeros(n_attack, dtype=np.int64)
        conf = np.full(n_attack, 0.5)
    else:
        ids = np.array(adv.controlled_ids, dtype=np.int64)
        launched, inferred, conf = gate_batch(
            surrogate,
            clean[:, ids],
            adv.confidence_threshold,
            temperature=adv.confidence_temperature,
            direction=adv.gate_direction,
        )
        rows = np.flatnonzero(launched)
        if rows.size:
            crafted, _ = craft_batch(
                surrogate, clean[np.ix_(rows, ids)], inferred[rows], adv
            )
            attacked[np.ix_(rows, ids)] = crafted
            attacked_dec[rows] = fuse_batch(world.fusion_model, attacked[rows])
    flipped = launched & (attacked_dec != clean_dec)
    records = [
        AttackRecord(
            round_id=obs + i,
            clean_decision=int(clean_dec[i]),
            attacked_decision=int(attacked_dec[i]),
            launched=bool(launched[i]),
            inferred_label=int(inferred[i]),
            confidence=float(conf[i]),
            flipped=bool(flipped[i]),
        )
        for i in range(n_attack)
    ]
    return records, clean, attacked


def hit_ratio(records: list[AttackRecord]) -> float | None:
    """Flipped / launched over the records; None when nothing launched."""
    launched = sum(1 for r in records if r.launched)
    if launched == 0:
        return None
    flipped = sum(1 for r in records if r.flipped)
    return flipped / launched


def run(cfg: RunConfig) -> RunReport:
    """Execute one full simulation and aggregate its report."""
    world = build_world(cfg)
    if cfg.adversary.n_controlled > 0:
        surrogate, agreement = build_surrogate(
            world, cfg.adversary, cfg.observation_rounds
        )
    else:
        surrogate, agreement = None, None
    records, clean, attacked = _attack_phase(world, surrogate, cfg)
    launched = sum(1 for r in records if r.launched)
    flipped = sum(1 for r in records if r.flipped)
    obs = cfg.observation_rounds
    return RunReport(
        hit_ratio=None if launched == 0 else flipped / launched,
        attacks_launched=launched,
        attacks_flipped=flipped,
        attack_rate=launched / cfg.attack_rounds,
        surrogate_agreement=agreement,
        fusion_clean_accuracy=world.fusion_clean_accuracy,
        fusion_train_accuracy=world.fusion_train_accuracy,
        config=cfg,
        records=records,
        fusion_model=world.fusion_model,
        true_labels=world.labels[obs : obs + cfg.attack_rounds],
        clean_report_vectors=clean,
        attacked_report_vectors=attacked,
    )


@dataclass(frozen=True)
class SweepCell:
    """One (m, tau, seed) run's summary metrics."""

    m: int
    tau: float
    seed: int
    hit_ratio: float | None
    attacks_launched: int
    attacks_flipped: int
    attack_rate: float
    surrogate_agreement: float | None
    fusion_clean_accuracy: float


def _seed_cells(
    base: RunConfig, seed: int, m_values: list[int], tau_values: list[float]
) -> list[SweepCell]:
    """All (m, tau) cells for one seed, reusing the seed's world.

    Confidences and inferred labels do not depend on the threshold, and
    crafting treats every round independently, so one craft pass over
    the rounds launchable at the loosest threshold yields, for each
    tau, exactly the numbers an independent run at that tau produces.
    """
    cfg0 = replace(base, master_seed=seed)
    world = build_world(cfg0)
    adv = base.adversary
    obs, n_attack = base.observation_rounds, base.attack_rounds
    clean = world.readings[obs : obs + n_attack]
    clean_dec = world.clean_decisions[obs : obs + n_attack]
    loosest = min(tau_values) if adv.gate_direction == GATE_ABOVE else max(tau_values)
    cells = []
    for m in m_values:
        if m == 0:
            for tau in tau_values:
                cells.append(
                    SweepCell(
                        m, tau, seed, None, 0, 0, 0.0, None, world.fusion_clean_accuracy
                    )
                )
            continue
        adv_m = replace(adv, controlled_ids=tuple(range(m)))
        surrogate, agreement = build_surrogate(world, adv_m, obs)
        ids = np.array(adv_m.controlled_ids, dtype=np.int64)
        _, inferred, conf = gate_batch(
            surrogate,
            clean[:, ids],
            loosest,
            temperature=adv.confidence_temperature,
            direction=adv.gate_direction,
        )
        if adv.gate_direction == GATE_ABOVE:
            craftable = conf >= loosest
        else:
            craftable = conf <= loosest
        rows = np.flatnonzero(craftable)
        flips_by_row = np.zeros(rows.size, dtype=bool)
        if rows.size:
            crafted, _ = craft_batch(
                surrogate, clean[np.ix_(rows, ids)], inferred[rows], adv_m
            )
            attacked_rows = clean[rows].copy()
            attacked_rows[:, ids] = crafted
            flips_by_row = (
                fuse_batch(world.fusion_model, attacked_rows) != clean_dec[rows]
            )
        conf_rows = conf[rows]
        for tau in tau_values:
            if adv.gate_direction == GATE_ABOVE:
                mask = conf_rows >= tau
            else:
                mask = conf_rows <= tau
            launched = int(mask.sum())
            flipped = int(flips_by_row[mask].sum())
            cells.append(
                SweepCell(
                    m=m,
                    tau=tau,
                    seed=seed,
                    hit_ratio=None if launched == 0 else flipped / launched,
                    attacks_launched=launched,
                    attacks_flipped=flipped,
                    attack_rate=launched / n_attack,
                    surrogate_agreement=agreement,
                    fusion_clean_accuracy=world.fusion_clean_accuracy,
                )
            )
    return cells


def sweep(
    base: RunConfig,
    m_values: list[int],
    tau_values: list[float],
    seeds: list[int],
    jobs: int = 1,
) -> list[SweepCell]:
    """Factorial sweep over (m, tau, seed); rows sorted by (m, tau, seed)."""
    if not m_values or not tau_values or not seeds:
        raise ConfigurationError("sweep requires non-empty m_values, tau_values, seeds")
    n = base.scenario.n_devices
    for m in m_values:
        if not 0 <= m <= n:
            raise ConfigurationError(f"swept m values must lie in [0, {n}], got {m}")
    for tau in tau_values:
        if not 0.5 < tau <= 1.0:
            raise ConfigurationError(
                f"swept tau values must lie in (0.5, 1], got {tau}"
            )
    if jobs < 1:
        raise ConfigurationError(f"jobs must be >= 1, got {jobs}")
    # The base adversary config must itself be valid for the sweep's n.
    validate_run(replace(base, adversary=replace(base.adversary, controlled_ids=())))
    if jobs == 1 or len(seeds) == 1:
        nested = [_seed_cells(base, s, list(m_values), list(tau_values)) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            nested = list(
                pool.map(
                    lambda s: _seed_cells(base, s, list(m_values), list(tau_values)),
                    seeds,
                )
            )
    cells = [cell for group in nested for cell in group]
    cells.sort(key=lambda c: (c.m, c.tau, c.seed))
    return cells


@dataclass(frozen=True)
class AggregateRow:
    """Per-(m, tau) aggregate over seeds; undefined hit ratios are skipped."""

    m: int
    tau: float
    n_seeds: int
    n_defined: int
    mean_hit_ratio: float | None
    std_hit_ratio: float | None
    mean_attack_rate: float


def aggregate_cells(cells: list[SweepCell]) -> list[AggregateRow]:
    groups: dict[tuple[int, float], list[SweepCell]] = {}
    for cell in cells:
        groups.setdefault((cell.m, cell.tau), []).append(cell)
    rows = []
    for (m, tau), group in sorted(groups.items()):
        hits = [c.hit_ratio for c in group if c.hit_ratio is not None]
        rows.append(
            AggregateRow(
                m=m,
                tau=tau,
                n_seeds=len(group),
                n_defined=len(hits),
                mean_hit_ratio=float(np.mean(hits)) if hits else None,
                std_hit_ratio=float(np.std(hits)) if hits else None,
                mean_attack_rate=float(np.mean([c.attack_rate for c in group])),
            )
        )
    return rows


def sweep_m(
    base: RunConfig, m_values: list[int], seeds: list[int], jobs: int = 1
) -> list[AggregateRow]:
    """Hit ratio vs number of controlled devices at the base threshold."""
    tau = base.adversary.confidence_threshold
    return aggregate_cells(sweep(base, m_values, [tau], seeds, jobs=jobs))


def sweep_threshold(
    base: RunConfig,
    tau_values: list[float],
    m_values: list[int],
    seeds: list[int],
    jobs: int = 1,
) -> list[AggregateRow]:
    """Hit ratio across confidence thresholds for each m (full factorial)."""
    return aggregate_cells(sweep(base, m_values, tau_values, seeds, jobs=jobs))
