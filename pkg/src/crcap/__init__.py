"""Common-randomness capacity over Gaussian channels."""

__version__ = "0.1.0"
