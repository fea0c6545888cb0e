"""Numerical laboratory for the viscous energy-shell lattice.

Bessel-kernel flows, five stochastic forcings, exact and empirical
Wasserstein distances and cutoff (abrupt thermalization) experiments.
"""

from ._kernels import BACKEND
from .bessel import BesselEvalPolicy, bessel_identity_defect, bessel_j, kernel_h, kernel_laplace_closed_form
from .drivers import AlphaStable, Brownian, CompoundPoisson, GaussOU, PathGrid, StableOU, sample_path
from .lattice import LatticeParams, deterministic_solution, deterministic_solution_expm, lyapunov_defect
from .stochastic import CovarianceMatrix, StableScales, covariance_matrix, stable_scale
from .thermalization import BoundReport, CutoffConfig, bound_report, cutoff_time
from .wasserstein import ProductCost, SampleCloud, empirical_wp, gaussian_w2

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BesselEvalPolicy", "bessel_j", "bessel_identity_defect", "kernel_h",
    "kernel_laplace_closed_form", "Brownian", "AlphaStable", "GaussOU", "StableOU",
    "CompoundPoisson", "PathGrid", "sample_path", "LatticeParams", "deterministic_solution",
    "deterministic_solution_expm", "lyapunov_defect", "CovarianceMatrix", "StableScales",
    "covariance_matrix", "stable_scale", "CutoffConfig", "BoundReport", "bound_report",
    "cutoff_time", "SampleCloud", "ProductCost", "empirical_wp", "gaussian_w2",
]
