"""Pause and semantic-coherence features for rating disorganized speech."""

from .errors import DerailError, InputError

__version__ = "0.1.0"

__all__ = ["DerailError", "InputError", "__version__"]
