"""Solvers, samplers, and entropy estimators for feedback control under
continuous measurement with a finite-bandwidth detector."""

__version__ = "0.1.0"
