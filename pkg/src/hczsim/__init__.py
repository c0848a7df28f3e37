"""Simulation and characterisation toolkit for a heralded linear-optics controlled-Z gate."""

from .circuit import CircuitParams, InternalPhases, build_circuit, build_compositional, hcz_target, ideal_params
from .errors import ContractViolation, DataError, FitError
from .fock import evolve, permanent, transition_amplitude
from .metrics import fidelities, jamiolkowski_state, mode_fidelity, process_fidelity, rate_estimate

__version__ = "0.1.0"

__all__ = [
    "CircuitParams",
    "InternalPhases",
    "build_circuit",
    "build_compositional",
    "hcz_target",
    "ideal_params",
    "ContractViolation",
    "DataError",
    "FitError",
    "evolve",
    "permanent",
    "transition_amplitude",
    "fidelities",
    "jamiolkowski_state",
    "mode_fidelity",
    "process_fidelity",
    "rate_estimate",
]
