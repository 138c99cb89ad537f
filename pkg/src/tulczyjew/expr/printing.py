"""Text and LaTeX printers.  ``parse(to_text(e)) == e`` for every Expr."""
from __future__ import annotations

from fractions import Fraction

from .names import absorbs_upper, latex_name, split_name


def atom_text(a) -> str:
    from .core import Func, Inverse, Sqrt, Var

    if type(a) is Var:
        return a.name
    if type(a) is Func:
        inner = f"{a.name}({','.join(a.args)})"
        if a.derivs:
            return f"D({inner},{','.join(a.derivs)})"
        return f"D({inner})"
    if type(a) is Sqrt:
        return f"sqrt({to_text(a.arg)})"
    if type(a) is Inverse:
        return f"({to_text(a.arg)})"
    raise TypeError(a)


def _needs_parens(name: str, k: int) -> bool:
    # "y^12" would re-read as an indexed identifier
    if "^" in name or "(" in name:
        return False
    family, lower, _ = split_name(name)
    return absorbs_upper(family, lower, str(k))


def _power_text(a, k: int) -> str:
    s = atom_text(a)
    if k == 1:
        return s
    if _needs_parens(s, k):
        s = f"({s})"
    return f"{s}^{k}"


def _term_text(mono, c: Fraction) -> tuple[str, bool]:
    """Return (text of |term|, negative?)."""
    from .core import Inverse, Sqrt

    neg = c < 0
    c = abs(c)
    num, den = [], []
    for a, k in mono:
        if type(a) is Inverse:
            den.append(_power_text(a, k))
        elif k < 0 and type(a) is not Sqrt:
            den.append(_power_text(a, -k))
        elif k < 0:
            num.append(f"{atom_text(a)}^{k}")
        else:
            num.append(_power_text(a, k))
    if c.numerator != 1 or not num:
        num.insert(0, str(c.numerator))
    if c.denominator != 1:
        den.insert(0, str(c.denominator))
    out = "*".join(num)
    if den:
        out += "/" + (den[0] if len(den) == 1 else "(" + "*".join(den) + ")")
    return out, neg


def to_text(e) -> str:
    terms = e.sorted_terms()
    if not terms:
        return "0"
    parts = []
    for i, (mono, c) in enumerate(terms):
        s, neg = _term_text(mono, c)
        if i == 0:
            parts.append("-" + s if neg else s)
        else:
            parts.append((" - " if neg else " + ") + s)
    return "".join(parts)


# --------------------------------------------------------------------------
# LaTeX


def _atom_latex(a) -> str:
    from .core import Func, Inverse, Sqrt, Var

    if type(a) is Var:
        return latex_name(a.name)
    if type(a) is Func:
        base = latex_name(a.name)
        if not a.derivs:
            return base
        return r"\partial_{%s} %s" % (" ".join(latex_name(v) for v in a.derivs), base)
    if type(a) is Sqrt:
        return r"\sqrt{%s}" % to_latex(a.arg)
    if type(a) is Inverse:
        return r"\left(%s\right)" % to_latex(a.arg)
    raise TypeError(a)


def _pow_latex(a, k: int) -> str:
    from .core import Func, Var

    s = _atom_latex(a)
    if k == 1:
        return s
    if type(a) in (Var, Func) and ("^" in s or "_" in s or "partial" in s):
        s = r"\left(%s\right)" % s
    return "%s^{%d}" % (s, k)


def to_latex(e) -> str:
    from .core import Inverse

    terms = e.sorted_terms()
    if not terms:
        return "0"
    parts = []
    for i, (mono, c) in enumerate(terms):
        neg = c < 0
        c = abs(c)
        num, den = [], []
        for a, k in mono:
            if type(a) is Inverse:
                den.append(_pow_latex(a, k))
            elif k < 0:
                den.append(_pow_latex(a, -k))
            else:
                num.append(_pow_latex(a, k))
        if c.numerator != 1 or not num:
            num.insert(0, str(c.numerator))
        if c.denominator != 1:
            den.insert(0, str(c.denominator))
        body = " ".join(num)
        if den:
            body = r"\frac{%s}{%s}" % (body, " ".join(den))
        sign = "-" if neg else ("+" if i else "")
        parts.append((" " if i else "") + sign + (" " if i else "") + body)
    return "".join(parts)
