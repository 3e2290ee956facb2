"""Pseudo-spectral helicoidal Euler flows with Littlewood-Paley diagnostics."""

from .grid import GridSpec
from .helicoidal import HarmonicTerm, HelicoidalProfile, HelicoidalState, generate_initial_data
from .littlewood_paley import BesovParams, DyadicProfile
from .evolve import SolverConfig, run

__all__ = [
    "GridSpec", "HarmonicTerm", "HelicoidalProfile", "HelicoidalState", "generate_initial_data",
    "BesovParams", "DyadicProfile", "SolverConfig", "run",
]
__version__ = "0.1.0"
