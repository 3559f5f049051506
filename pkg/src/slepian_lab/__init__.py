"""Simulation and exact computation for the Slepian process and first level bridges."""
from .kernels import BACKEND
from .paths import GridPath, SeedSpec

__version__ = "0.1.0"

__all__ = ["BACKEND", "GridPath", "SeedSpec", "__version__"]
