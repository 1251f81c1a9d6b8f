"""Simulation and spectroscopy of NV-centre 13C detection by phase-modulated Hartmann-Hahn double resonance."""

from .model import (
    KHZ, HyperfineVector, NuclearSpinSpec, PhysicalConstants, SpinSystemError, SpinSystemSpec,
    build_rotating_frame_hamiltonian, build_static_hamiltonian, make_system,
)
from .propagator import DensityState, initial_state, measure_dressed_population, propagate_program
from .sequences import ControlProgram, PmParams, compile_hhdr, compile_pm_hhdr, compile_xyn

__version__ = "0.1.0"

__all__ = [
    "KHZ", "ControlProgram", "DensityState", "HyperfineVector", "NuclearSpinSpec", "PhysicalConstants",
    "PmParams", "SpinSystemError", "SpinSystemSpec", "build_rotating_frame_hamiltonian",
    "build_static_hamiltonian", "compile_hhdr", "compile_pm_hhdr", "compile_xyn", "initial_state",
    "make_system", "measure_dressed_population", "propagate_program",
]
