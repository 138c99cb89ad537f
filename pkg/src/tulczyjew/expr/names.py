"""Indexed identifiers: ``xd^12``, ``p_12``, ``y_12^3``, ``pd_1234``, ``g_11``.

An identifier is ``family[_lower][^upper]`` where the index strings are
runs of single-digit indices.  Antisymmetric families are normalised to
increasing index order with the permutation sign; ``g`` is symmetric.
"""
from __future__ import annotations

import re

# ``^digits`` is absorbed into the identifier (rather than read as a power)
# for these families.
_UPPER_FAMILIES = {"xd", "xp", "xdp", "e", "ed", "f", "fd", "q", "w", "yf", "yfa", "efd", "phi"}
# absorbed for y/z only with a lower part or at least two upper digits
SHORT_FAMILIES = frozenset({"y", "z"})

ANTISYMMETRIC_UPPER = frozenset({"xd", "xp", "xdp", "z", "q", "ed", "fd"})
ANTISYMMETRIC_LOWER = frozenset({"p", "f", "pd"})
# y_{ab}^c is antisymmetric in its lower pair only
PAIR_LOWER = frozenset({"y"})
SYMMETRIC_LOWER = frozenset({"g"})

IDENT_RE = re.compile(r"([A-Za-z][A-Za-z0-9]*)(?:_([A-Za-z0-9]+))?")


def register_upper_family(family: str) -> None:
    """Make ``family^digits`` read as an indexed identifier from now on.

    Charts call this for the coordinate families they generate.
    """
    if family not in SHORT_FAMILIES:
        _UPPER_FAMILIES.add(family)


def absorbs_upper(family: str, lower: str | None, digits: str) -> bool:
    if family in _UPPER_FAMILIES:
        return True
    if family in SHORT_FAMILIES:
        return lower is not None or len(digits) >= 2
    return False


def split_name(name: str):
    """Return (family, lower, upper) with lower/upper index strings or None."""
    upper = None
    if "^" in name:
        name, upper = name.split("^", 1)
    lower = None
    if "_" in name:
        name, lower = name.split("_", 1)
    return name, lower, upper


def join_name(family: str, lower=None, upper=None) -> str:
    out = family
    if lower:
        out += "_" + "".join(str(i) for i in lower)
    if upper:
        out += "^" + "".join(str(i) for i in upper)
    return out


def _perm_sign(seq) -> int:
    """Sign of the permutation sorting ``seq``; 0 if an entry repeats."""
    if len(set(seq)) != len(seq):
        return 0
    s = list(seq)
    sign = 1
    for i in range(len(s)):
        for j in range(len(s) - 1 - i):
            if s[j] > s[j + 1]:
                s[j], s[j + 1] = s[j + 1], s[j]
                sign = -sign
    return sign


def normalize_pd(idx: str):
    """Canonical form of the four-index ``pd`` block.

    Antisymmetric within (12) and (34), antisymmetric under swapping the
    two blocks; the lexicographically smaller sorted block comes first.
    """
    a, b = idx[:2], idx[2:]
    sa, sb = _perm_sign(a), _perm_sign(b)
    if sa == 0 or sb == 0:
        return 0, idx
    a, b = "".join(sorted(a)), "".join(sorted(b))
    sign = sa * sb
    if a == b:
        return 0, idx
    if b < a:
        a, b = b, a
        sign = -sign
    return sign, a + b


def normalize_identifier(name: str):
    """Return ``(sign, canonical_name)``; sign 0 means the symbol vanishes."""
    family, lower, upper = split_name(name)
    sign = 1
    if lower is not None and lower.isdigit():
        if family == "pd" and len(lower) == 4:
            s, lower = normalize_pd(lower)
            sign *= s
        elif (family in ANTISYMMETRIC_LOWER and len(lower) >= 2 and (family != "pd" or len(lower) == 2)) or (
            family in PAIR_LOWER and len(lower) == 2
        ):
            s = _perm_sign(lower)
            sign *= s
            lower = "".join(sorted(lower))
        elif family in SYMMETRIC_LOWER and len(lower) >= 2:
            lower = "".join(sorted(lower))
    if upper is not None and upper.isdigit():
        if family in ANTISYMMETRIC_UPPER and len(upper) >= 2:
            s = _perm_sign(upper)
            sign *= s
            upper = "".join(sorted(upper))
    if sign == 0:
        return 0, name
    out = family
    if lower is not None:
        out += "_" + lower
    if upper is not None:
        out += "^" + upper
    return sign, out


LATEX_FAMILIES = {
    "xd": r"\dot{x}",
    "xp": r"x'",
    "xdp": r"\dot{x}'",
    "pd": r"\dot{p}",
    "ed": r"\dot{e}",
    "fd": r"\dot{f}",
    "pi": r"\pi",
    "phi": r"\varphi",
    "rho": r"\rho",
    "xi": r"\xi",
}


def latex_name(name: str) -> str:
    family, lower, upper = split_name(name)
    out = LATEX_FAMILIES.get(family, family if len(family) == 1 else r"\mathrm{%s}" % family)
    if upper is not None:
        out += "^{%s}" % upper
    if lower is not None:
        out += "_{%s}" % lower
    return out
