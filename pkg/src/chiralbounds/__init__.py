"""Exact and numerical checks of energy bounds for Virasoro, W3 and U(1) current modules."""

from .algebra import (
    AlgebraKind,
    AlgebraSpec,
    DomainError,
    FieldSpec,
    Gen,
    ModePolynomial,
    commutator,
    heisenberg,
    lambda_modes,
    normal_order,
    virasoro,
    w3,
    wick_square_L,
)
from .exact import QI, NegativeForm
from .lowest_weight import GradedModule, LevelBlockOperator, LevelRangeError, PBWMonomial, enumerate_basis

__version__ = "0.1.0"

__all__ = [
    "AlgebraKind",
    "AlgebraSpec",
    "DomainError",
    "FieldSpec",
    "Gen",
    "GradedModule",
    "LevelBlockOperator",
    "LevelRangeError",
    "ModePolynomial",
    "NegativeForm",
    "PBWMonomial",
    "QI",
    "commutator",
    "enumerate_basis",
    "heisenberg",
    "lambda_modes",
    "normal_order",
    "virasoro",
    "w3",
    "wick_square_L",
]
