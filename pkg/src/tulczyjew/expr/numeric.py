"""Compile expressions to vectorised numpy callables."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import Expr, Func, Inverse, Sqrt, Var


def lambdify(exprs, leaves: Sequence):
    """Return ``f(*arrays)`` evaluating ``exprs`` (one Expr or a list).

    ``leaves`` lists the variable names (or Var/Func atoms) in argument order.
    """
    single = isinstance(exprs, Expr)
    items = [exprs] if single else list(exprs)
    index = {}
    for i, leaf in enumerate(leaves):
        index[Var(leaf) if isinstance(leaf, str) else leaf] = f"a{i}"
    lines: list[str] = []
    names: dict = {}

    def atom_code(a):
        got = names.get(a)
        if got is not None:
            return got
        if type(a) in (Var, Func):
            if a not in index:
                raise KeyError(f"no argument for {a!r}")
            return index[a]
        inner = expr_code(a.arg)
        name = f"t{len(names)}"
        if type(a) is Sqrt:
            lines.append(f"    {name} = np.sqrt({inner})")
        else:
            lines.append(f"    {name} = 1.0 / ({inner})")
        names[a] = name
        return name

    def expr_code(e: Expr) -> str:
        if e.is_zero():
            return "zero"
        parts = []
        for mono, c in e.terms.items():
            factors = [repr(float(c))]
            for a, k in mono:
                factors.append(f"{atom_code(a)} ** {k}" if k != 1 else atom_code(a))
            parts.append(" * ".join(factors))
        return "(" + " + ".join(parts) + ")"

    outs = [expr_code(e) for e in items]
    args = ", ".join(f"a{i}" for i in range(len(leaves)))
    src = [f"def _f({args}):", "    zero = 0.0 * np.asarray(a0)" if leaves else "    zero = 0.0"]
    src += lines
    if single:
        src.append(f"    return {outs[0]} + zero")
    else:
        src.append("    return [" + ", ".join(f"{o} + zero" for o in outs) + "]")
    ns = {"np": np}
    exec("\n".join(src), ns)
    return ns["_f"]
