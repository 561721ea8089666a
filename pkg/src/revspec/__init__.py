"""Spectral geometry of simple symmetric surfaces of revolution.

Clairaut integrals and the global action variable, the periodized
bicharacteristic flow, oscillatory-integral bounds, the separated
Laplace-Beltrami spectrum and spectral-projector experiments.
"""

__version__ = "0.1.0"

from .errors import NumericError, RevspecError, ValidationError
from .surface import Profile, make_ellipsoid, make_profile, make_sphere, validate
from .clairaut import clairaut_table, omega, tau, twist_classify
from .action import big_G, convexity_check, gamma_curve, little_g
from .flow import CotangentState, bicharacteristic_length, geodesic_flow, q1_flow
from .oscint import dmu_hat, mixed_bound_verify, osc_integral_1d, vdc_bound, vdc_detect
from .spectrum import SpectralTable, joint_lattice_check, solve_modes, spectrum_table, weyl_pointwise
from .projector import norm_scan, sharp_kernel, smoothed_kernel

__all__ = [
    "__version__",
    "RevspecError",
    "ValidationError",
    "NumericError",
    "Profile",
    "make_sphere",
    "make_ellipsoid",
    "make_profile",
    "validate",
    "tau",
    "omega",
    "clairaut_table",
    "twist_classify",
    "big_G",
    "little_g",
    "gamma_curve",
    "convexity_check",
    "CotangentState",
    "geodesic_flow",
    "q1_flow",
    "bicharacteristic_length",
    "osc_integral_1d",
    "vdc_detect",
    "vdc_bound",
    "dmu_hat",
    "mixed_bound_verify",
    "SpectralTable",
    "solve_modes",
    "spectrum_table",
    "weyl_pointwise",
    "joint_lattice_check",
    "sharp_kernel",
    "smoothed_kernel",
    "norm_scan",
]
