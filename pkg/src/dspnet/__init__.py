"""Dual-vision 3D question answering at desk scale.

Multi-view image features are back-projected onto a point cloud, fused across
views with question-dependent weights, gated against point features and
reasoned over together with the question by cross-modal attention layers.
Everything runs on a small numpy autodiff engine over synthetic box-world scenes.
"""

from .config import RunConfig, smoke_config
from .errors import ArgumentError, ConfigError, DimensionError, DSPNetError, FormatError, NumericError, ShapeError
from .model import forward, init_params

__all__ = [
    "ArgumentError",
    "ConfigError",
    "DSPNetError",
    "DimensionError",
    "FormatError",
    "NumericError",
    "RunConfig",
    "ShapeError",
    "forward",
    "init_params",
    "smoke_config",
]
