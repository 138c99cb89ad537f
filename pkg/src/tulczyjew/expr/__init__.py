"""Exact symbolic expressions with rational coefficients."""
from .core import (
    ONE,
    ZERO,
    Atom,
    EvaluationError,
    Expr,
    Func,
    Inverse,
    Sqrt,
    Var,
    atom_expr,
    const,
    dependencies,
    derive,
    diff,
    equal,
    evaluate,
    func,
    sqrt,
    substitute,
    var,
)
from .names import join_name, normalize_identifier, split_name
from .numeric import lambdify
from .parse import ParseError, parse
from .printing import to_latex, to_text

__all__ = [
    "ONE", "ZERO", "Atom", "EvaluationError", "Expr", "Func", "Inverse", "Sqrt", "Var",
    "atom_expr", "const", "dependencies", "derive", "diff", "equal", "evaluate", "func", "sqrt",
    "substitute", "var", "join_name", "normalize_identifier", "split_name", "lambdify",
    "ParseError", "parse", "to_latex", "to_text",
]
