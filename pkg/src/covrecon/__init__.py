"""Reconstruction of Gaussian random field covariances from finite samples.

Modules
-------
fem_space
    P1 finite element spaces on the unit interval and square.
field_models
    Brownian motion and Brownian sheet spectra, Karhunen-Loeve sampling.
cov_estimators
    Sample and tapering covariance estimators.
spectral_solver
    Generalized eigenproblems and perturbation diagnostics.
error_analysis
    Kernel distances, error decomposition and spectral functionals.
planner
    Choice of truncation level, sample size and mesh size for a target accuracy.
experiments, cli
    Seeded experiment harness and the ``covrecon`` command.
"""
from .fem_space import FemSpace, MassMatrix, assemble_mass_matrix, build_space, moments, project_l2
from .field_models import (
    BrownianMotion1D, BrownianSheet, SampleMatrix, brownian_spectrum_1d, brownian_spectrum_tensor,
    sample_field, true_coefficient_covariance,
)
from .cov_estimators import CovarianceEstimate, optimal_taper, sample_covariance, taper_estimate
from .spectral_solver import EigenSystem, generalized_eigendecomposition
from .error_analysis import ErrorReport, error_decomposition, kernel_l2_distance, mercer_truncate
from .planner import Plan, PlanInputs, brownian_plan, lambert_w, plan_parameters

__version__ = "0.1.0"

__all__ = [
    "FemSpace", "MassMatrix", "assemble_mass_matrix", "build_space", "moments", "project_l2",
    "BrownianMotion1D", "BrownianSheet", "SampleMatrix", "brownian_spectrum_1d", "brownian_spectrum_tensor",
    "sample_field", "true_coefficient_covariance",
    "CovarianceEstimate", "optimal_taper", "sample_covariance", "taper_estimate",
    "EigenSystem", "generalized_eigendecomposition",
    "ErrorReport", "error_decomposition", "kernel_l2_distance", "mercer_truncate",
    "Plan", "PlanInputs", "brownian_plan", "lambert_w", "plan_parameters",
]
