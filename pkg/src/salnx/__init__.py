"""Safe active learning of time-series Gaussian-process models."""

__version__ = "0.1.0"
