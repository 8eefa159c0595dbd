"""Quantum Turing machine and programmable gate array testbed."""
from __future__ import annotations

__version__ = "0.1.0"

from .machine import MachineDef, MachineError, build_global_step, make_machine, run, step, validate, validate_local
from .state import Config, DensityMatrix, SparseState, distance_sq, fidelity_pure, reduced_density, von_neumann_entropy

__all__ = [
    "Config",
    "DensityMatrix",
    "MachineDef",
    "MachineError",
    "SparseState",
    "__version__",
    "build_global_step",
    "distance_sq",
    "fidelity_pure",
    "make_machine",
    "reduced_density",
    "run",
    "step",
    "validate",
    "validate_local",
    "von_neumann_entropy",
]
