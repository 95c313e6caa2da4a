from churnforge.synth.generator import (
    STATE_CHURNED,
    STATE_ENGAGED,
    STATE_LAPSING,
    STATE_NAMES,
    BehaviorConfig,
    GenerationSummary,
    default_config,
    generate,
    load_ground_truth,
    nonlinear_temporal_config,
)
from churnforge.synth.separability import (
    SeparabilityReport,
    measure_positive_rates,
    oracle_scores,
    skewed_config,
    verify_separability,
)

__all__ = [
    "STATE_CHURNED", "STATE_ENGAGED", "STATE_LAPSING", "STATE_NAMES",
    "BehaviorConfig", "GenerationSummary", "default_config", "generate",
    "load_ground_truth", "nonlinear_temporal_config",
    "SeparabilityReport", "measure_positive_rates", "oracle_scores",
    "skewed_config", "verify_separability",
]
