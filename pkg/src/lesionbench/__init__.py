"""Synthetic-lesion MRI benchmark generation and heat-map scoring."""

from ._backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
