from .config import (
    FaNetConfig,
    count_macs,
    count_parameters,
    count_trainable_parameters,
    manifest,
)
from .model import ForwardProbe, FrameOutputs, Model, WeightShapeError, build, forward
from .weights import (
    ContainerError,
    CorruptHeaderError,
    TruncatedPayloadError,
    VersionMismatchError,
    WeightContainer,
    load_weights,
    load_weights_file,
    save_weights,
)

__all__ = [
    "FaNetConfig",
    "Model",
    "FrameOutputs",
    "ForwardProbe",
    "WeightContainer",
    "WeightShapeError",
    "ContainerError",
    "CorruptHeaderError",
    "TruncatedPayloadError",
    "VersionMismatchError",
    "build",
    "forward",
    "manifest",
    "count_macs",
    "count_parameters",
    "count_trainable_parameters",
    "save_weights",
    "load_weights",
    "load_weights_file",
]
