"""Polynomials with restricted coefficients and many certified roots near 1.

The pipeline: a balanced coefficient family, a simultaneous series decomposition
of 1/x - 1 at target points, controlled fixed-point dynamics that choose the
coefficients, and exact sign-change brackets certifying the roots.
"""

from .bounds import DampingPolynomial, build_damping, upper_bound
from .cli import RunConfig, construct
from .coeff_model import CoefficientModel, builtin_model, load_model, make_model
from .errors import NewmanError
from .newman import NewmanDecomposition, compute_decomposition, verify_decomposition
from .params import BuildParameters, TargetPoints, select_parameters, target_points
from .trap import TrapResult, TrapState
from .verify import PolynomialCertificate, assemble_polynomial, certify, check_q_smallness, count_sign_changes

__version__ = "0.1.0"

__all__ = [
    "BuildParameters",
    "CoefficientModel",
    "DampingPolynomial",
    "NewmanDecomposition",
    "NewmanError",
    "PolynomialCertificate",
    "RunConfig",
    "TargetPoints",
    "TrapResult",
    "TrapState",
    "assemble_polynomial",
    "build_damping",
    "builtin_model",
    "certify",
    "check_q_smallness",
    "compute_decomposition",
    "construct",
    "count_sign_changes",
    "load_model",
    "make_model",
    "select_parameters",
    "target_points",
    "upper_bound",
    "verify_decomposition",
]
