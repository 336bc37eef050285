"""Deterministic simulator of a partial-control attack on a data-fusion center.

n sensing devices report Gaussian readings each round; a fusion center
fuses them through a trained linear rule into one binary decision. An
adversary holding m of the devices watches those decisions, fits a
small network imitating the rule as seen through its own readings, and
— on rounds where that surrogate is confident enough — substitutes
gradient-crafted readings to flip the fused decision. The headline
metric is the hit ratio: flipped decisions per launched attack.
"""

from .adversary import (
    AdversaryConfig,
    AttackDecision,
    ObservationLog,
    SurrogateModel,
    SurrogateTrainConfig,
    craft,
    fit_surrogate,
    gate,
    new_log,
    observe,
)
from .config import ConfigDocument, canonical_text, parse_config, parse_config_text
from .errors import (
    ConfigurationError,
    FusionAttackError,
    InputError,
    NumericError,
    TrainingError,
    UnsupportedOperationError,
)
from .fusion import (
    FusionModel,
    FusionTrainConfig,
    decision_margin,
    export_model,
    fuse,
    parse_model,
    train_fusion,
)
from .neuralnet import (
    Mlp,
    MlpSpec,
    forward,
    init_mlp,
    input_gradient,
    softmax,
    train,
    weight_gradients,
)
from .scenario import (
    DeviceProfile,
    Round,
    ScenarioConfig,
    generate_profiles,
    generate_rounds,
)
from .simulator import (
    AggregateRow,
    AttackRecord,
    RunConfig,
    RunReport,
    SweepCell,
    hit_ratio,
    run,
    sweep,
    sweep_m,
    sweep_threshold,
)

__version__ = "0.1.0"

__all__ = [
    "AdversaryConfig",
    "AggregateRow",
    "AttackDecision",
    "AttackRecord",
    "ConfigDocument",
    "ConfigurationError",
    "DeviceProfile",
    "FusionAttackError",
    "FusionModel",
    "FusionTrainConfig",
    "InputError",
    "Mlp",
    "MlpSpec",
    "NumericError",
    "ObservationLog",
    "Round",
    "RunConfig",
    "RunReport",
    "ScenarioConfig",
    "SurrogateModel",
    "SurrogateTrainConfig",
    "SweepCell",
    "TrainingError",
    "UnsupportedOperationError",
    "canonical_text",
    "craft",
    "decision_margin",
    "export_model",
    "fit_surrogate",
    "forward",
    "fuse",
    "gate",
    "generate_profiles",
    "generate_rounds",
    "hit_ratio",
    "init_mlp",
    "input_gradient",
    "new_log",
    "observe",
    "parse_config",
    "parse_config_text",
    "parse_model",
    "run",
    "softmax",
    "sweep",
    "sweep_m",
    "sweep_threshold",
    "train",
    "train_fusion",
    "weight_gradients",
    "__version__",
]
