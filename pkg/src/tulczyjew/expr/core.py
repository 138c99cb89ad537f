"""Exact symbolic scalar expressions.

An :class:`Expr` is a finite sum ``sum_k c_k * m_k`` where ``c_k`` is a
:class:`fractions.Fraction` and ``m_k`` is a monomial: a sorted tuple of
``(atom, exponent)`` pairs.  Atoms are variables, unknown-function nodes,
square roots of expressions, and reciprocals of multi-term sums.  Every
constructor returns the canonical form, so structural equality is
canonical equality.
"""
from __future__ import annotations

import math
import random
from fractions import Fraction
from numbers import Rational
from typing import Callable, Iterable, Mapping, Union

Number = Union[int, Fraction, float]

__all__ = [
    "Atom",
    "Var",
    "Func",
    "Sqrt",
    "Inverse",
    "Expr",
    "EvaluationError",
    "const",
    "var",
    "func",
    "sqrt",
    "atom_expr",
    "derive",
    "diff",
    "dependencies",
    "evaluate",
    "equal",
    "substitute",
    "ZERO",
    "ONE",
]


class EvaluationError(ValueError):
    """Raised when an expression cannot be evaluated at an assignment."""


# --------------------------------------------------------------------------
# atoms


class Atom:
    __slots__ = ("_hash", "sort_key")

    def leaves(self) -> frozenset:
        raise NotImplementedError


class Var(Atom):
    """A named free variable."""

    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self.sort_key = (0, name)
        self._hash = hash(("v", name))

    def __eq__(self, other):
        return type(other) is Var and other.name == self.name

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Var({self.name!r})"

    def leaves(self):
        return frozenset((self,))


class Func(Atom):
    """Partial derivative of an unknown function ``name(args)``.

    ``derivs`` is the sorted tuple of argument names differentiated by;
    the empty tuple stands for the function value itself.
    """

    __slots__ = ("name", "args", "derivs")

    def __init__(self, name: str, args: tuple, derivs: tuple = ()):
        self.name = name
        self.args = tuple(args)
        self.derivs = tuple(sorted(derivs))
        self.sort_key = (1, name, self.args, self.derivs)
        self._hash = hash(("f", name, self.args, self.derivs))

    def __eq__(self, other):
        return (
            type(other) is Func
            and other.name == self.name
            and other.args == self.args
            and other.derivs == self.derivs
        )

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Func({self.name!r}, {self.args!r}, {self.derivs!r})"

    def leaves(self):
        return frozenset((self,))

    def differentiated(self, v: str) -> "Func":
        return Func(self.name, self.args, self.derivs + (v,))


class Sqrt(Atom):
    __slots__ = ("arg", "_leaves")

    def __init__(self, arg: "Expr"):
        self.arg = arg
        self.sort_key = (2, arg.key())
        self._hash = hash(("s", arg))
        self._leaves = None

    def __eq__(self, other):
        return type(other) is Sqrt and other.arg == self.arg

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Sqrt({self.arg})"

    def leaves(self):
        if self._leaves is None:
            self._leaves = self.arg.leaves()
        return self._leaves


class Inverse(Atom):
    """``1/arg`` for a multi-term ``arg`` whose leading coefficient is 1."""

    __slots__ = ("arg", "_leaves")

    def __init__(self, arg: "Expr"):
        self.arg = arg
        self.sort_key = (3, arg.key())
        self._hash = hash(("i", arg))
        self._leaves = None

    def __eq__(self, other):
        return type(other) is Inverse and other.arg == self.arg

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Inverse({self.arg})"

    def leaves(self):
        if self._leaves is None:
            self._leaves = self.arg.leaves()
        return self._leaves


# --------------------------------------------------------------------------
# monomials


def _mono_key(mono):
    return tuple((a.sort_key, e) for a, e in mono)


def _normalize(powers: dict, coef: Fraction) -> "Expr":
    """Build the canonical expression ``coef * prod(atom**exp)``."""
    extra = None
    for atom in [a for a, e in powers.items() if type(a) is Sqrt and e >= 2]:
        e = powers[atom]
        half, rest = divmod(e, 2)
        if rest:
            powers[atom] = 1
        else:
            del powers[atom]
        factor = atom.arg ** half
        extra = factor if extra is None else extra * factor
    for atom in [a for a, e in powers.items() if type(a) is Inverse and e < 0]:
        # 1/(1/S)^k = S^k
        e = powers.pop(atom)
        factor = atom.arg ** (-e)
        extra = factor if extra is None else extra * factor
    mono = tuple(sorted(((a, e) for a, e in powers.items() if e != 0), key=lambda t: t[0].sort_key))
    base = Expr._raw({mono: coef}) if coef else ZERO
    if extra is not None:
        return base * extra
    return base


def _mono_mul(m1, m2):
    """Return (monomial, needs_normalization) for the product of two monomials."""
    if not m1:
        return m2, False
    if not m2:
        return m1, False
    powers = dict(m1)
    for a, e in m2:
        powers[a] = powers.get(a, 0) + e
    needs = False
    for a, e in powers.items():
        if type(a) is Sqrt and e >= 2:
            needs = True
            break
    if needs:
        return powers, True
    mono = tuple(sorted(((a, e) for a, e in powers.items() if e != 0), key=lambda t: t[0].sort_key))
    return mono, False


# --------------------------------------------------------------------------
# expressions


class Expr:
    """Immutable canonical expression.  Use the module-level constructors."""

    __slots__ = ("_terms", "_hash", "_key", "_leaves")

    def __init__(self, *_):
        raise TypeError("use const(), var(), or the parser to build expressions")

    @classmethod
    def _raw(cls, terms: dict) -> "Expr":
        obj = object.__new__(cls)
        obj._terms = terms
        obj._hash = None
        obj._key = None
        obj._leaves = None
        return obj

    # -- inspection -------------------------------------------------------

    @property
    def terms(self) -> dict:
        return self._terms

    def sorted_terms(self):
        return sorted(self._terms.items(), key=lambda t: (_mono_key(t[0]), len(t[0])))

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return not self._terms or (len(self._terms) == 1 and () in self._terms)

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError(f"{self} is not constant")
        return self._terms.get((), Fraction(0))

    def is_single_term(self) -> bool:
        return len(self._terms) == 1

    def single_atom(self):
        """Return the atom if this expression is exactly ``1*atom``, else None."""
        if len(self._terms) != 1:
            return None
        (mono, c), = self._terms.items()
        if c == 1 and len(mono) == 1 and mono[0][1] == 1:
            return mono[0][0]
        return None

    def leaves(self) -> frozenset:
        """Variables and function nodes occurring anywhere in the expression."""
        if self._leaves is None:
            out = set()
            for mono in self._terms:
                for a, _ in mono:
                    out |= a.leaves()
            self._leaves = frozenset(out)
        return self._leaves

    def free_names(self) -> set:
        return {a.name for a in self.leaves() if type(a) is Var}

    def depends_on(self, v) -> bool:
        return _as_leaf(v) in self.leaves()

    def key(self) -> str:
        if self._key is None:
            from .printing import to_text

            self._key = to_text(self)
        return self._key

    def polynomial_degree(self, variables: Iterable) -> set:
        """Set of total degrees of the terms in ``variables`` (plain atoms only)."""
        vs = {_as_leaf(v) for v in variables}
        return {sum(e for a, e in mono if a in vs) for mono in self._terms}

    # -- dunder -----------------------------------------------------------

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __eq__(self, other):
        if isinstance(other, Expr):
            return self._terms == other._terms
        if isinstance(other, (int, Fraction)):
            return self._terms == const(other)._terms
        return NotImplemented

    def __ne__(self, other):
        r = self.__eq__(other)
        return r if r is NotImplemented else not r

    def __bool__(self):
        return bool(self._terms)

    def __repr__(self):
        return f"Expr({self.key()!r})"

    def __str__(self):
        return self.key()

    def __neg__(self):
        return Expr._raw({m: -c for m, c in self._terms.items()})

    def __pos__(self):
        return self

    def __add__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        if not other._terms:
            return self
        if not self._terms:
            return other
        terms = dict(self._terms)
        for m, c in other._terms.items():
            s = terms.get(m)
            if s is None:
                terms[m] = c
            else:
                s += c
                if s:
                    terms[m] = s
                else:
                    del terms[m]
        return Expr._raw(terms)

    __radd__ = __add__

    def __sub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        if not self._terms or not other._terms:
            return ZERO
        a, b = self._terms, other._terms
        if len(b) == 1 and () in b:
            c = b[()]
            if c == 1:
                return self
            return Expr._raw({m: v * c for m, v in a.items()})
        if len(a) == 1 and () in a:
            c = a[()]
            if c == 1:
                return other
            return Expr._raw({m: v * c for m, v in b.items()})
        terms: dict = {}
        extras = []
        for m1, c1 in a.items():
            for m2, c2 in b.items():
                mono, needs = _mono_mul(m1, m2)
                c = c1 * c2
                if needs:
                    extras.append(_normalize(mono, c))
                    continue
                s = terms.get(mono)
                if s is None:
                    terms[mono] = c
                else:
                    s += c
                    if s:
                        terms[mono] = s
                    else:
                        del terms[mono]
        out = Expr._raw(terms)
        for e in extras:
            out = out + e
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return other * self.reciprocal()

    def __pow__(self, k):
        if not isinstance(k, int):
            raise TypeError("only integer powers are supported; use sqrt()")
        if k == 0:
            return ONE
        if k < 0:
            return self.reciprocal() ** (-k)
        if len(self._terms) == 1:
            (mono, c), = self._terms.items()
            powers = {a: e * k for a, e in mono}
            return _normalize(powers, c ** k)
        result = ONE
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def reciprocal(self) -> "Expr":
        if not self._terms:
            raise ZeroDivisionError("division by zero expression")
        if len(self._terms) == 1:
            (mono, c), = self._terms.items()
            return _normalize({a: -e for a, e in mono}, 1 / c)
        lead_mono, lead = self.sorted_terms()[0]
        normed = self * const(1 / lead) if lead != 1 else self
        return Expr._raw({((_intern_inverse(normed), 1),): 1 / lead})

    # -- convenience ------------------------------------------------------

    def diff(self, v) -> "Expr":
        return diff(self, v)

    def subs(self, mapping) -> "Expr":
        return substitute(self, mapping)

    def evaluate(self, assignment):
        return evaluate(self, assignment)


def _coerce(x):
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction)):
        return const(x)
    if isinstance(x, Rational):
        return const(Fraction(x))
    return NotImplemented


_INVERSE_CACHE: dict = {}
_SQRT_CACHE: dict = {}


def _intern_inverse(e: Expr) -> Inverse:
    a = _INVERSE_CACHE.get(e)
    if a is None:
        a = _INVERSE_CACHE[e] = Inverse(e)
    return a


def _intern_sqrt(e: Expr) -> Sqrt:
    a = _SQRT_CACHE.get(e)
    if a is None:
        a = _SQRT_CACHE[e] = Sqrt(e)
    return a


# --------------------------------------------------------------------------
# constructors

ZERO = Expr._raw({})
ONE = Expr._raw({(): Fraction(1)})


def const(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, float):
        value = Fraction(value).limit_denominator() if value != int(value) else Fraction(int(value))
    v = Fraction(value)
    if not v:
        return ZERO
    return Expr._raw({(): v})


def var(name: str) -> Expr:
    return Expr._raw({((Var(name), 1),): Fraction(1)})


def func(name: str, args: Iterable[str], derivs: Iterable[str] = ()) -> Expr:
    return Expr._raw({((Func(name, tuple(args), tuple(derivs)), 1),): Fraction(1)})


def atom_expr(a: Atom, exp: int = 1) -> Expr:
    return _normalize({a: exp}, Fraction(1))


def _exact_sqrt(q: Fraction):
    if q < 0:
        return None
    n, d = q.numerator, q.denominator
    rn, rd = math.isqrt(n), math.isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Fraction(rn, rd)
    return None


def sqrt(e) -> Expr:
    e = _coerce(e)
    if e is NotImplemented:
        raise TypeError("sqrt expects an expression or rational")
    if e.is_zero():
        return ZERO
    if e.is_constant():
        r = _exact_sqrt(e.constant_value())
        if r is not None:
            return const(r)
    return Expr._raw({((_intern_sqrt(e), 1),): Fraction(1)})


# --------------------------------------------------------------------------
# differentiation


def _as_leaf(v):
    if isinstance(v, str):
        return Var(v)
    if isinstance(v, Expr):
        a = v.single_atom()
        if a is None or type(a) not in (Var, Func):
            raise ValueError(f"cannot differentiate with respect to {v}")
        return a
    if isinstance(v, (Var, Func)):
        return v
    raise TypeError(f"not a differentiation variable: {v!r}")


def derive(e: Expr, leaf_rule: Callable[[Atom], Expr], relevant: Callable[[Atom], bool]) -> Expr:
    """Chain-rule derivation: ``leaf_rule`` gives the derivative of each leaf.

    ``relevant(atom)`` must be False only when the atom's derivative is 0;
    it lets whole terms be skipped cheaply.
    """
    memo: dict = {}

    def d_atom(a):
        r = memo.get(a)
        if r is None:
            if type(a) in (Var, Func):
                r = leaf_rule(a)
            else:
                r = rec(a.arg)
            memo[a] = r
        return r

    def rec(expr: Expr) -> Expr:
        out = ZERO
        for mono, c in expr._terms.items():
            for i, (a, e) in enumerate(mono):
                if not relevant(a):
                    continue
                da = d_atom(a)
                if da.is_zero():
                    continue
                powers = dict(mono)
                if type(a) is Sqrt:
                    # d sqrt(S)^e = e/2 * S' * sqrt(S)^(e-2)
                    powers[a] = e - 2
                    out = out + _normalize(powers, c * Fraction(e, 2)) * da
                elif type(a) is Inverse:
                    # (1/S)^e -> -e * S' * (1/S)^(e+1)
                    powers[a] = e + 1
                    out = out + _normalize(powers, -c * e) * da
                else:
                    powers[a] = e - 1
                    out = out + _normalize(powers, c * e) * da
        return out

    return rec(e)


def diff(e, v) -> Expr:
    """Exact partial derivative of ``e`` with respect to the leaf ``v``.

    Function nodes depend on their arguments: d/dx f(x,y) = D(f(x,y),x).
    """
    e = _coerce(e)
    leaf = _as_leaf(v)
    if type(leaf) is Var:
        name = leaf.name

        def hit(a):
            return a == leaf or (type(a) is Func and name in a.args)

        if not any(hit(a) for a in e.leaves()):
            return ZERO

        def rule(a):
            if a == leaf:
                return ONE
            if type(a) is Func and name in a.args:
                return atom_expr(a.differentiated(name))
            return ZERO

        return derive(e, rule, lambda a: any(hit(b) for b in a.leaves()))
    if leaf not in e.leaves():
        return ZERO
    return derive(
        e,
        lambda a: ONE if a == leaf else ZERO,
        lambda a: leaf in a.leaves(),
    )


def dependencies(e) -> set:
    """Names of the variables ``e`` depends on, including function arguments."""
    out = set()
    for a in _coerce(e).leaves():
        if type(a) is Var:
            out.add(a.name)
        else:
            out.update(a.args)
    return out


# --------------------------------------------------------------------------
# substitution


def substitute(e, mapping: Mapping) -> Expr:
    """Replace leaves by expressions.

    Keys may be variable names, :class:`Var`/:class:`Func` atoms, or
    single-atom expressions.  A callable ``mapping`` is invoked on every
    leaf and returns an Expr or None (meaning "leave alone").
    """
    e = _coerce(e)
    if callable(mapping) and not isinstance(mapping, Mapping):
        rule = mapping
    else:
        table = {_as_leaf(k): _coerce(v) for k, v in mapping.items()}
        if not table:
            return e
        rule = table.get
    memo: dict = {}

    def sub_atom(a):
        r = memo.get(a)
        if r is None:
            if type(a) in (Var, Func):
                r = rule(a)
                if r is None:
                    r = atom_expr(a)
            elif type(a) is Sqrt:
                inner = rec(a.arg)
                r = atom_expr(a) if inner is a.arg else sqrt(inner)
            else:
                inner = rec(a.arg)
                r = atom_expr(a) if inner is a.arg else inner.reciprocal()
            memo[a] = r
        return r

    def rec(expr: Expr) -> Expr:
        if not any(_touches(a, rule, memo) for mono in expr._terms for a, _ in mono):
            return expr
        out = ZERO
        for mono, c in expr._terms.items():
            t = const(c)
            for a, k in mono:
                t = t * (sub_atom(a) ** k)
            out = out + t
        return out

    return rec(e)


def _touches(a, rule, memo):
    if a in memo:
        return True
    for leaf in a.leaves():
        if rule(leaf) is not None:
            return True
    return False


# --------------------------------------------------------------------------
# evaluation


def _leaf_value(a, assignment):
    if type(a) is Var:
        key = a.name
    else:
        from .printing import atom_text

        key = atom_text(a)
    if key in assignment:
        return assignment[key]
    if a in assignment:
        return assignment[a]
    raise EvaluationError(f"no value for {key}")


def evaluate(e, assignment: Mapping):
    """Evaluate at an assignment of rationals (or floats).

    Returns a Fraction unless a square root is evaluated or a float input
    is used, in which case a float is returned.
    """
    e = _coerce(e)
    memo: dict = {}

    def val_atom(a):
        r = memo.get(a)
        if r is None:
            if type(a) in (Var, Func):
                r = _leaf_value(a, assignment)
                if isinstance(r, int):
                    r = Fraction(r)
            elif type(a) is Sqrt:
                x = rec(a.arg)
                if x < 0:
                    raise EvaluationError(f"negative argument {x} under sqrt")
                r = math.sqrt(x)
            else:
                x = rec(a.arg)
                if x == 0:
                    raise EvaluationError("division by zero")
                r = 1 / x
            memo[a] = r
        return r

    def rec(expr):
        total = Fraction(0)
        for mono, c in expr._terms.items():
            t = c
            for a, k in mono:
                x = val_atom(a)
                if k < 0 and x == 0:
                    raise EvaluationError("division by zero")
                t = t * x ** k
            total = total + t
        return total

    return rec(e)


# --------------------------------------------------------------------------
# equality with numeric fallback


def _domain_safe_value(rng: random.Random) -> Fraction:
    return Fraction(rng.randint(1, 997), rng.randint(1, 97)) * rng.choice((1, 1, -1))


def equal(a, b, *, points: int = 32, tol: float = 1e-10, seed: int = 0) -> bool:
    """True iff canonical forms coincide, or ``a`` and ``b`` agree to relative
    ``tol`` at ``points`` random rational points (points that violate the
    sqrt domain are redrawn)."""
    a, b = _coerce(a), _coerce(b)
    if a == b:
        return True
    d = a - b
    leaves = sorted(d.leaves(), key=lambda x: x.sort_key)
    rng = random.Random(seed)
    good = 0
    attempts = 0
    while good < points:
        attempts += 1
        if attempts > 50 * points:
            return False
        assignment = {leaf: _domain_safe_value(rng) for leaf in leaves}
        try:
            va, vb = evaluate(a, assignment), evaluate(b, assignment)
        except (EvaluationError, ZeroDivisionError, OverflowError):
            continue
        if isinstance(va, Fraction) and isinstance(vb, Fraction):
            if va != vb:
                return False
        elif abs(float(va) - float(vb)) > tol * max(1.0, abs(float(va)), abs(float(vb))):
            return False
        good += 1
    return True
