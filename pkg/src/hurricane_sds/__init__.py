"""Spatially dependent hurricane failure scenarios and preventive unit commitment."""

__version__ = "0.1.0"
