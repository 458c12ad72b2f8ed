"""Potential expression language: parsing, evaluation and differentiation."""

from .expr import BinOp, Call, Const, Expr, Neg, Num, Var, parse, to_string
from .spec import (
    CARTESIAN,
    LAYERED,
    RADIAL,
    ExprProfile,
    GradResult,
    PotentialSpec,
    Profile,
    SampledProfile,
    antiderivative_profile,
    as_profile,
)

__all__ = [
    "BinOp", "Call", "Const", "Expr", "Neg", "Num", "Var", "parse", "to_string",
    "CARTESIAN", "LAYERED", "RADIAL", "ExprProfile", "GradResult", "PotentialSpec",
    "Profile", "SampledProfile", "antiderivative_profile", "as_profile",
]
