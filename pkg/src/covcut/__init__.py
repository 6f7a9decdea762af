"""Certifiably optimal sparse precision matrix estimation.

Solves the cardinality-constrained Gaussian maximum-likelihood problem
over precision matrices with an outer-approximation / cutting-plane scheme
on binary support variables; covariance-selection subproblems are handled
by closed-form greedy coordinate descent with dual certificates.
"""

from .covsel import BigM, CovSelSolution, Ridge, Support, solve_covsel
from .cutplane import SolveResult, solve, solve_path
from .errors import (
    CovcutError,
    DegenerateInstance,
    Infeasible,
    InvalidInput,
    NotPositiveDefinite,
    SingularUpdate,
    Unconverged,
)

__version__ = "0.1.0"

__all__ = [
    "BigM",
    "CovSelSolution",
    "CovcutError",
    "DegenerateInstance",
    "Infeasible",
    "InvalidInput",
    "NotPositiveDefinite",
    "Ridge",
    "SingularUpdate",
    "SolveResult",
    "Support",
    "Unconverged",
    "solve",
    "solve_covsel",
    "solve_path",
    "__version__",
]
