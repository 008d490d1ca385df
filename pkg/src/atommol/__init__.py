"""Nonclassicality witnesses for a two-mode atom-molecule condensate.

Two backends evaluate the same witnesses: third-order closed forms
(:mod:`atommol.perturbative`) and exact propagation in a truncated Fock
space (:mod:`atommol.fock`).  :mod:`atommol.engine` sweeps and compares them.
"""

from .model import (PRESETS, SystemParams, TimeGrid, ValidationError, ValidationReport,
                    WitnessKind, parse_kinds, rescale, validate)
from .perturbative import CoefficientSet, NotDerivedError, coefficients, evaluate
from .fock import (CutoffError, FockSpace, Hamiltonian, NumericalError, StateVector, build_space,
                   coherent_state, evolve, moment, propagate, witness_exact)
from .engine import (ComparisonReport, DegenerateLadderError, ExactOnlyWitnessError, ExactOptions,
                     NonclassicalRegion, WitnessSeries, compare, compare_many, regions, sweep)
from .config import ConfigError, ExperimentConfig

__all__ = [
    "PRESETS", "SystemParams", "TimeGrid", "ValidationError", "ValidationReport", "WitnessKind",
    "parse_kinds", "rescale", "validate",
    "CoefficientSet", "NotDerivedError", "coefficients", "evaluate",
    "CutoffError", "FockSpace", "Hamiltonian", "NumericalError", "StateVector", "build_space",
    "coherent_state", "evolve", "moment", "propagate", "witness_exact",
    "ComparisonReport", "DegenerateLadderError", "ExactOnlyWitnessError", "ExactOptions",
    "NonclassicalRegion", "WitnessSeries", "compare", "compare_many", "regions", "sweep",
    "ConfigError", "ExperimentConfig",
]
