"""Glass-aware curvature estimation and optimization at desk scale."""

__version__ = "0.1.0"

from .netkit import Batch, ConfigError, ModelSpec, NumericsError, build_model, gradient, loss

__all__ = [
    "__version__",
    "Batch",
    "ConfigError",
    "ModelSpec",
    "NumericsError",
    "build_model",
    "gradient",
    "loss",
]
