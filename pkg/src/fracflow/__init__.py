"""Singular fractional p-Laplacian diffusion: simulation and estimate verification."""

__version__ = "0.1.0"

from .grid import BallWindow, Domain, GridFunction, ball_indices, build_domain, windowed_lr_norm
from .kernel import ExteriorProfile, KernelSpec, Multiplier, assemble_weights, exterior_coefficients
from .operator import OperatorContext, build_context, reference_apply
from .stepper import NewtonParams, SteppingPolicy, Trajectory, simulate, detect_extinction
from .config import InitialDatum, ProblemSpec, load_config, parse_config

__all__ = [
    "BallWindow", "Domain", "GridFunction", "ball_indices", "build_domain", "windowed_lr_norm",
    "ExteriorProfile", "KernelSpec", "Multiplier", "assemble_weights", "exterior_coefficients",
    "OperatorContext", "build_context", "reference_apply",
    "NewtonParams", "SteppingPolicy", "Trajectory", "simulate", "detect_extinction",
    "InitialDatum", "ProblemSpec", "load_config", "parse_config",
]
