"""sosreg: constructive sum-of-squares decompositions of smooth nonnegative
functions, with the calculus that supports and stress-tests them."""

from .exprlang import (
    Expr,
    FunctionDef,
    catalog_function,
    catalog_names,
    differentiate,
    evaluate,
    parse_expression,
    to_source,
)
from .geometry import Ball

__all__ = [
    "Ball",
    "Expr",
    "FunctionDef",
    "catalog_function",
    "catalog_names",
    "differentiate",
    "evaluate",
    "parse_expression",
    "to_source",
]

__version__ = "0.1.0"
