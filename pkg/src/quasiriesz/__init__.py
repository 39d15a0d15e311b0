"""Quasicrystal exponential systems on multiband sets under irrational rotation."""
__version__ = "0.1.0"

from .diophantine import IrrationalAlpha, QuadNumber, TorusPoint, golden, silver
from .torus_sets import MultibandSet, TorusInterval

__all__ = ["IrrationalAlpha", "MultibandSet", "QuadNumber", "TorusInterval", "TorusPoint",
           "golden", "silver", "__version__"]
