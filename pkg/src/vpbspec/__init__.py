"""Spectral analysis of the linearized Vlasov-Poisson-Boltzmann system.

Hermite-Galerkin collision matrices, Fourier symbols, dispersion branches,
low-frequency expansions and semigroup decay harnesses.
"""
__version__ = "0.1.0"

from .asymptotics import (boltzmann_coefficients, lambda_second_formula,
                          relaxation_closed_forms, vpb_coefficients)
from .collision import (CollisionMatrix, ConditioningError, HardSphereQuadrature,
                        RelaxationSpectrum, assemble_bgk, assemble_hard_sphere, assemble_model,
                        assemble_spectral_relaxation)
from .config import ConfigError, RunConfig, load_config
from .dispersion import BranchError, continue_all, continue_branch, empirical_r0
from .semigroup import (InitialDataFamily, ModePropagator, QualityGateError,
                        assemble_physical_norms, fit_exponent)
from .symbols import assemble_A, assemble_B, assemble_E, assemble_symbol
from .velocity import BasisError, HermiteBasis, build_basis

__all__ = [
    "__version__", "build_basis", "HermiteBasis", "BasisError", "CollisionMatrix",
    "ConditioningError", "HardSphereQuadrature", "RelaxationSpectrum", "assemble_bgk",
    "assemble_spectral_relaxation", "assemble_hard_sphere", "assemble_model", "assemble_A",
    "assemble_B", "assemble_E", "assemble_symbol", "BranchError", "continue_branch",
    "continue_all", "empirical_r0", "vpb_coefficients", "boltzmann_coefficients",
    "lambda_second_formula", "relaxation_closed_forms", "ModePropagator", "InitialDataFamily",
    "QualityGateError", "assemble_physical_norms", "fit_exponent", "RunConfig", "ConfigError",
    "load_config",
]
