"""Free additive convolution with semicircle noise and its singular points.

Submodules:
    measure     spectral measures, quadrature primitives, equilibrium checks
    freeconv    Biane subordination: boundary curve, F_tau, densities
    singular    critical-case classification and local power laws
    finite_n    orthonormal polynomials and determinantal kernels
    montecarlo  GUE / unitary-ensemble / nonintersecting-bridge sampling
    cli         TOML-configured command-line front end
"""

from .measure import (Atom, MeasureSpec, PotentialSpec, Segment,
                      SingularPointSpec, cauchy_transform, check_equilibrium,
                      integrate, moment_g, principal_value_h,
                      v_derivative_identity)
from .freeconv import (DensityProfile, SubordinationSolver,
                       rightmost_flat_check, tau_crit, x_star_tau)
from .singular import (CriticalData, PowerLaw, classify, fit_power_law,
                       predicted_local_law)
from .finite_n import GaugeData, GaugeMachine, KernelEngine, OrthoBasis, build_basis
from .montecarlo import (PathEnsemble, RngStream, empirical_density,
                         sample_gue, sample_nibm, sample_perturbed,
                         sample_ue_eigs, sample_ue_eigs_batch)

__version__ = "0.1.0"

__all__ = [
    "Atom", "MeasureSpec", "PotentialSpec", "Segment", "SingularPointSpec",
    "cauchy_transform", "check_equilibrium", "integrate", "moment_g",
    "principal_value_h", "v_derivative_identity",
    "DensityProfile", "SubordinationSolver", "rightmost_flat_check",
    "tau_crit", "x_star_tau",
    "CriticalData", "PowerLaw", "classify", "fit_power_law",
    "predicted_local_law",
    "GaugeData", "GaugeMachine", "KernelEngine", "OrthoBasis", "build_basis",
    "PathEnsemble", "RngStream", "empirical_density", "sample_gue",
    "sample_nibm", "sample_perturbed", "sample_ue_eigs",
    "sample_ue_eigs_batch",
    "__version__",
]
