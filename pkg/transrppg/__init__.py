"""
transrppg - rPPG-based 3D mask presentation attack detection.

Multi-scale spatio-temporal maps from region color traces, a two-branch
transformer on a small reverse-mode autodiff core, training, PAD metrics
and evaluation protocols.
"""
from .__version__ import __version__
from .core.conf import RunConfig, load_config
from .exceptions import TransRPPGError

__all__ = [
    "__version__",
    "RunConfig",
    "TransRPPGError",
    "load_config",
]
