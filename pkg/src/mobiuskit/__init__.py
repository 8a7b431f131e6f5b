"""Flat-model conformal geometry toolkit: Möbius group, cones, Kleinian limit sets,
parallelism metrics and normal-domain distance checks."""

__version__ = "0.1.0"
