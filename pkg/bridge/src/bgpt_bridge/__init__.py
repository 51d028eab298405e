"""Adapter that serves a pre-trained byte-model checkpoint over the carving
host's predictor wire protocol."""

from .model import BridgeConfig, BridgeError, ByteGenerator, load_model
from .wire import serve

__version__ = "0.1.0"

__all__ = [
    "BridgeConfig",
    "BridgeError",
    "ByteGenerator",
    "load_model",
    "serve",
    "__version__",
]
