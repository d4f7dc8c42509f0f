"""Surrogate models: Gaussian process regression and polynomial chaos."""

from .gpr import GprModel, default_bounds, gpr_fit, log_marginal_likelihood
from .kernels import Kernel
from .pce import (
    Lars,
    LeastSquares,
    PceBasis,
    PceModel,
    Ridge,
    build_basis,
    lars_order,
    pce_fit,
)
from .polynomials import evaluate_all, polynomial_eval

__all__ = [
    "GprModel",
    "Kernel",
    "Lars",
    "LeastSquares",
    "PceBasis",
    "PceModel",
    "Ridge",
    "build_basis",
    "default_bounds",
    "evaluate_all",
    "gpr_fit",
    "lars_order",
    "log_marginal_likelihood",
    "pce_fit",
    "polynomial_eval",
]
