"""Shared numerical infrastructure."""

from .errors import (BlowupError, BracketError, ConvergenceError, NumericalError,
                     SingularMatrixError, StiffnessError)
from .integrators import euler_maruyama_step, integrate_adaptive, rk4_step
from .linalg import (characteristic_polynomial, eigenvalues_small, find_root_bisect,
                     polynomial_roots, solve_linear)
from .rng import RngStream, child_seeds, rng_stream
from .series import TimeSeries

__all__ = [
    "BlowupError", "BracketError", "ConvergenceError", "NumericalError",
    "SingularMatrixError", "StiffnessError", "TimeSeries", "RngStream",
    "characteristic_polynomial", "child_seeds", "eigenvalues_small",
    "euler_maruyama_step", "find_root_bisect", "integrate_adaptive",
    "polynomial_roots", "rk4_step", "rng_stream", "solve_linear",
]
