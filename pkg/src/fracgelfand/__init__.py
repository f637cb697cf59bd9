"""Solver and verifier for the 1D fractional Gelfand equation (-Δ)^s u = K e^u."""

__version__ = "0.1.0"

from .params import FractionalOrder, UnsupportedOrderError, make_order
from .grid import (
    EvenProfile,
    HalfGrid,
    OddProfile,
    XAlphaNorm,
    integrate,
    interp,
    make_grid,
    make_mapped_grid,
    xalpha_norm,
)
from .riesz import KernelMoments, build_moments, conj_riesz, consistency_gap, exponent_integral
from .weight import AssumptionViolation, Weight, slow_decay_class, validate_assumption_a
from .fixedpoint import (
    GridPolicyExhausted,
    NonConvergenceError,
    ShootingParams,
    Solution,
    SolveOptions,
    apply_T,
    frechet_apply,
    newton_refine,
    picard_solve,
    recover_u,
    rescale_solution,
    solution_from_profile,
    solve,
)
from .continuation import BranchPath, BranchPoint, ProbeInconclusive, continue_lambda, continue_sigma, uniqueness_probe
from .verify import VerificationReport, laplace_positivity, pohozaev_residual, verify_solution
from .spectral import SpectralReport, birman_schwinger_odd, kernel_residual_even, morse_index, spectral_report


__all__ = [
    "AssumptionViolation",
    "BranchPath",
    "BranchPoint",
    "GridPolicyExhausted",
    "ProbeInconclusive",
    "SpectralReport",
    "VerificationReport",
    "birman_schwinger_odd",
    "continue_lambda",
    "continue_sigma",
    "kernel_residual_even",
    "laplace_positivity",
    "morse_index",
    "pohozaev_residual",
    "slow_decay_class",
    "solution_from_profile",
    "spectral_report",
    "uniqueness_probe",
    "validate_assumption_a",
    "verify_solution",
    "EvenProfile",
    "FractionalOrder",
    "HalfGrid",
    "KernelMoments",
    "NonConvergenceError",
    "OddProfile",
    "ShootingParams",
    "Solution",
    "SolveOptions",
    "UnsupportedOrderError",
    "Weight",
    "XAlphaNorm",
    "apply_T",
    "build_moments",
    "conj_riesz",
    "consistency_gap",
    "exponent_integral",
    "frechet_apply",
    "integrate",
    "interp",
    "make_grid",
    "make_mapped_grid",
    "make_order",
    "newton_refine",
    "picard_solve",
    "recover_u",
    "rescale_solution",
    "solve",
    "xalpha_norm",
]
