from churnforge.deep.architectures import (
    ARCHITECTURES,
    PRESETS,
    ArchitectureConfig,
    DeepModel,
    build_model,
    count_parameters,
)
from churnforge.deep.checkpoint import load_checkpoint, save_checkpoint
from churnforge.deep.layers import ForwardContext

__all__ = [
    "ARCHITECTURES",
    "PRESETS",
    "ArchitectureConfig",
    "DeepModel",
    "ForwardContext",
    "build_model",
    "count_parameters",
    "load_checkpoint",
    "save_checkpoint",
]
