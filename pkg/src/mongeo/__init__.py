"""Geodesics and energies of the H1 right-invariant metric on monotone maps of [0, 1]."""

from .core import (EnergyBreakdown, JumpRecord, MonotoneMap, PathGrid, SpaceGrid, TimeGrid,
                   VelocityField, eval_map, generalized_inverse, identity_map, map_from_function,
                   validate_monotone)
from .energy import (FisherRaoOptions, e_sh_closed, eulerian_energy, fr_integrand, jump_energy,
                     lagrangian_energy, relaxed_energy, sqrt_lift, sqrt_lift_energy)
from .errors import (BlowupDetected, BoundaryViolation, DegenerateDensity, DomainError,
                     MongeoError, MonotonicityViolation, StepRejected, ValidationError)

__version__ = "0.1.0"

__all__ = [
    "BlowupDetected", "BoundaryViolation", "DegenerateDensity", "DomainError", "EnergyBreakdown",
    "FisherRaoOptions", "JumpRecord", "MongeoError", "MonotoneMap", "MonotonicityViolation",
    "PathGrid", "SpaceGrid", "StepRejected", "TimeGrid", "ValidationError", "VelocityField",
    "e_sh_closed", "eulerian_energy", "eval_map", "fr_integrand", "generalized_inverse",
    "identity_map", "jump_energy", "lagrangian_energy", "map_from_function", "relaxed_energy",
    "sqrt_lift", "sqrt_lift_energy", "validate_monotone",
]
