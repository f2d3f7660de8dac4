"""Wraps an attention encoder-decoder phoneme recognizer as a file-protocol backend."""

from lasadapter.errors import AdapterError
from lasadapter.serve import AdapterConfig, serve_batch

__all__ = ["AdapterError", "AdapterConfig", "serve_batch"]
__version__ = "0.1.0"
