"""Capacity lab: capacity, quasi-local mass and inequality checks on asymptotically flat 3-manifolds."""

__all__ = ["__version__"]
__version__ = "0.1.0"
