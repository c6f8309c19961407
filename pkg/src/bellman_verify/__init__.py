"""Explicit Bellman function for the weighted L^2 martingale-transform bound, with numerical certification."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    BellmanEval,
    BellmanPoint,
    Direction,
    MaxPoint,
    Region,
    classify_region,
    directional_second_derivative,
    eval_B,
    eval_B_maximal,
    eval_b,
    eval_G,
    eval_U,
    fd_check,
)
from .errors import BellmanError, DomainError, ParameterError, PreconditionError  # noqa: E402
from .kernels import DomainParams, eval_phi, eval_phi_derivatives, eval_psi_family  # noqa: E402

__all__ = [
    "BellmanError",
    "BellmanEval",
    "BellmanPoint",
    "Direction",
    "DomainError",
    "DomainParams",
    "MaxPoint",
    "ParameterError",
    "PreconditionError",
    "Region",
    "classify_region",
    "directional_second_derivative",
    "eval_B",
    "eval_B_maximal",
    "eval_G",
    "eval_U",
    "eval_b",
    "eval_phi",
    "eval_phi_derivatives",
    "eval_psi_family",
    "fd_check",
]
