"""Volumetric regression of articulated bodies from a single image."""

__version__ = "0.1.0"
