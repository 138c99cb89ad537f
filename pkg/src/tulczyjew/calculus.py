"""Exterior calculus on a chart.

Forms and multivector fields store one coefficient per strictly increasing
tuple of coordinate positions.  ``Form(chart, 2, {(0, 1): c})`` is
``c dx0^dx1``; the all-pairs sum ``1/2 p_{mn} dx^m ^ dx^n`` is therefore the
single stored coefficient ``p_12`` on ``(x1, x2)``.

Contraction pairs ``d/dx ^ d/dy`` with ``dx ^ dy`` to +1 and inserts the
multivector into the leading slots: ``i_{v1^...^vq} a = a(v1, ..., vq, .)``.
"""
from __future__ import annotations

import json
from typing import Callable, Iterable, Mapping

from .charts import Chart
from .expr import ONE, ZERO, Expr, const, dependencies, diff, equal, parse, substitute, to_latex, to_text, var
from .expr.names import latex_name

__all__ = [
    "Form",
    "PolyField",
    "CoordMap",
    "CalculusError",
    "coordinate_differential",
    "coordinate_vector",
    "wedge",
    "exterior_d",
    "contract",
    "lie_bracket",
    "pullback",
    "pushforward_field",
]


class CalculusError(ValueError):
    pass


def _sort_sign(seq) -> tuple[int, tuple]:
    """Sign of the sorting permutation and the sorted tuple (0 on repeats)."""
    s = list(seq)
    if len(set(s)) != len(s):
        return 0, ()
    sign = 1
    for i in range(1, len(s)):
        j = i
        while j > 0 and s[j - 1] > s[j]:
            s[j - 1], s[j] = s[j], s[j - 1]
            sign = -sign
            j -= 1
    return sign, tuple(s)


def _add_into(table: dict, key, value: Expr):
    if value.is_zero():
        return
    old = table.get(key)
    if old is None:
        table[key] = value
    else:
        new = old + value
        if new.is_zero():
            del table[key]
        else:
            table[key] = new


class _Graded:
    """Shared storage for forms and multivector fields."""

    kind = ""

    def __init__(self, chart: Chart, degree: int, coeffs: Mapping | None = None):
        self.chart = chart
        self.degree = degree
        table: dict = {}
        for key, c in (coeffs or {}).items():
            key = tuple(chart.index(k) if isinstance(k, str) else k for k in key)
            if len(key) != degree:
                raise CalculusError(f"index tuple {key} does not have length {degree}")
            sign, skey = _sort_sign(key)
            if sign == 0:
                continue
            c = const(c) if not isinstance(c, Expr) else c
            _add_into(table, skey, c if sign == 1 else -c)
        self.coeffs = table

    @classmethod
    def _new(cls, chart, degree, table):
        obj = cls.__new__(cls)
        obj.chart = chart
        obj.degree = degree
        obj.coeffs = table
        return obj

    # -- access ----------------------------------------------------------

    def __getitem__(self, names) -> Expr:
        if isinstance(names, (str, int)):
            names = (names,)
        key = tuple(self.chart.index(k) if isinstance(k, str) else k for k in names)
        sign, skey = _sort_sign(key)
        if sign == 0:
            return ZERO
        c = self.coeffs.get(skey, ZERO)
        return c if sign == 1 else -c

    def items(self):
        """(coordinate-name tuple, coefficient) pairs in index order."""
        names = self.chart.names
        for key in sorted(self.coeffs):
            yield tuple(names[i] for i in key), self.coeffs[key]

    def is_zero(self) -> bool:
        return not self.coeffs

    def _check(self, other):
        if type(other) is not type(self):
            raise CalculusError(f"cannot combine {type(self).__name__} with {type(other).__name__}")
        if other.chart != self.chart:
            raise CalculusError("chart mismatch")

    # -- arithmetic ------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, int) and other == 0:
            return self
        self._check(other)
        if other.degree != self.degree:
            raise CalculusError("cannot add objects of different degree")
        table = dict(self.coeffs)
        for k, c in other.coeffs.items():
            _add_into(table, k, c)
        return self._new(self.chart, self.degree, table)

    __radd__ = __add__

    def __neg__(self):
        return self._new(self.chart, self.degree, {k: -c for k, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, f) -> "_Graded":
        f = f if isinstance(f, Expr) else const(f)
        table = {}
        for k, c in self.coeffs.items():
            _add_into(table, k, c * f)
        return self._new(self.chart, self.degree, table)

    def __mul__(self, f):
        if isinstance(f, _Graded):
            return NotImplemented
        return self.scale(f)

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, int) and other == 0:
            return self.is_zero()
        if type(other) is not type(self):
            return NotImplemented
        return self.chart == other.chart and self.degree == other.degree and self.coeffs == other.coeffs

    __hash__ = None

    def map_coefficients(self, fn: Callable[[Expr], Expr]):
        table = {}
        for k, c in self.coeffs.items():
            _add_into(table, k, fn(c))
        return self._new(self.chart, self.degree, table)

    def subs(self, mapping):
        return self.map_coefficients(lambda c: substitute(c, mapping))

    def equals(self, other, **kw) -> bool:
        """Coefficient-wise :func:`expr.equal` (numeric fallback allowed)."""
        self._check(other)
        if self.degree != other.degree:
            return False
        for k in set(self.coeffs) | set(other.coeffs):
            if not equal(self.coeffs.get(k, ZERO), other.coeffs.get(k, ZERO), **kw):
                return False
        return True

    def differences(self, other) -> list[tuple]:
        """(index names, left, right) for every coefficient that differs."""
        names = self.chart.names
        out = []
        for k in sorted(set(self.coeffs) | set(other.coeffs)):
            a, b = self.coeffs.get(k, ZERO), other.coeffs.get(k, ZERO)
            if not equal(a, b):
                out.append((tuple(names[i] for i in k), a, b))
        return out

    def depends_on_any(self, names: Iterable[str]) -> bool:
        names = set(names)
        return any(dependencies(c) & names for c in self.coeffs.values())

    def uses_directions(self) -> set:
        """Coordinate names appearing in a stored index tuple."""
        names = self.chart.names
        return {names[i] for k in self.coeffs for i in k}

    # -- output ----------------------------------------------------------

    _symbol = ""
    _joiner = "^"

    def __str__(self):
        if not self.coeffs:
            return "0"
        parts = []
        for names, c in self.items():
            basis = self._joiner.join(self._symbol + n for n in names)
            text = to_text(c)
            if not basis:
                parts.append(text)
            elif text == "1":
                parts.append(basis)
            elif text == "-1":
                parts.append("-" + basis)
            else:
                parts.append(f"({text})*{basis}")
        return " + ".join(parts)

    __repr__ = __str__

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "degree": self.degree,
            "terms": [{"indices": list(n), "coefficient": to_text(c)} for n, c in self.items()],
        }

    @classmethod
    def from_dict(cls, chart: Chart, doc) -> "_Graded":
        if isinstance(doc, str):
            doc = json.loads(doc)
        coeffs = {tuple(t["indices"]): parse(t["coefficient"]) for t in doc["terms"]}
        return cls(chart, int(doc["degree"]), coeffs)


class Form(_Graded):
    """Exterior form of degree ``degree`` on ``chart``."""

    kind = "form"
    _symbol = "d"

    def scalar(self) -> Expr:
        if self.degree != 0:
            raise CalculusError("not a 0-form")
        return self.coeffs.get((), ZERO)

    def to_latex(self) -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for names, c in self.items():
            basis = r" \wedge ".join(r"\mathrm{d}" + latex_name(n) for n in names)
            coef = to_latex(c)
            if len(c.terms) > 1:
                coef = r"\left(%s\right)" % coef
            parts.append(f"{coef}\\, {basis}" if basis else coef)
        return " + ".join(parts)

    def __xor__(self, other):
        return wedge(self, other)


class PolyField(_Graded):
    """Multivector field of degree ``degree`` on ``chart``."""

    kind = "polyfield"
    _symbol = "D"

    def __init__(self, chart, degree, coeffs=None):
        if degree < 1:
            raise CalculusError("multivector fields have degree >= 1")
        super().__init__(chart, degree, coeffs)

    def apply(self, f: Expr) -> Expr:
        """Vector field acting on a function."""
        if self.degree != 1:
            raise CalculusError("only vector fields act on functions")
        names = self.chart.names
        out = ZERO
        for (i,), c in self.coeffs.items():
            out = out + c * diff(f, names[i])
        return out

    def to_latex(self) -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for names, c in self.items():
            basis = r" \wedge ".join(r"\partial_{%s}" % latex_name(n) for n in names)
            coef = to_latex(c)
            if len(c.terms) > 1:
                coef = r"\left(%s\right)" % coef
            parts.append(f"{coef}\\, {basis}")
        return " + ".join(parts)

    def __xor__(self, other):
        return wedge(self, other)


def as_form(chart: Chart, a) -> Form:
    """Promote an Expr/number to a 0-form."""
    if isinstance(a, Form):
        return a
    return Form(chart, 0, {(): a if isinstance(a, Expr) else const(a)})


def coordinate_differential(chart: Chart, name: str) -> Form:
    return Form(chart, 1, {(name,): ONE})


def coordinate_vector(chart: Chart, name: str) -> PolyField:
    return PolyField(chart, 1, {(name,): ONE})


# --------------------------------------------------------------------------
# algebra


def wedge(a, b):
    """Exterior product of two forms or two multivector fields."""
    if isinstance(a, Expr) and isinstance(b, _Graded):
        return b.scale(a)
    if isinstance(b, Expr) and isinstance(a, _Graded):
        return a.scale(b)
    if type(a) is not type(b):
        raise CalculusError("wedge needs two forms or two multivector fields")
    if a.chart != b.chart:
        raise CalculusError("chart mismatch")
    table: dict = {}
    for ka, ca in a.coeffs.items():
        sa = set(ka)
        for kb, cb in b.coeffs.items():
            if sa.intersection(kb):
                continue
            sign, key = _sort_sign(ka + kb)
            prod = ca * cb
            _add_into(table, key, prod if sign == 1 else -prod)
    return type(a)._new(a.chart, a.degree + b.degree, table)


def _dependency_indices(e: Expr, chart: Chart) -> list[int]:
    return sorted(chart.index(n) for n in dependencies(e) if n in chart)


def exterior_d(a) -> Form:
    """Exterior derivative; coefficients may contain function nodes of chart
    coordinates, which are differentiated by the chain rule."""
    if not isinstance(a, Form):
        raise CalculusError("exterior_d expects a Form")
    chart = a.chart
    names = chart.names
    table: dict = {}
    for key, c in a.coeffs.items():
        for j in _dependency_indices(c, chart):
            if j in key:
                continue
            dc = diff(c, names[j])
            if dc.is_zero():
                continue
            pos = sum(1 for i in key if i < j)
            new_key = tuple(sorted(key + (j,)))
            _add_into(table, new_key, dc if pos % 2 == 0 else -dc)
    return Form._new(chart, a.degree + 1, table)


def split_sign(I: tuple, J: tuple) -> int:
    """Sign of the shuffle reordering increasing ``I`` into ``(J, I minus J)``."""
    sign = 1
    jset = set(J)
    rest_before = 0
    # count inversions: pairs (r, j) with r in I\\J, j in J, r < j
    for i in I:
        if i in jset:
            if rest_before % 2:
                sign = -sign
        else:
            rest_before += 1
    return sign


def contract(u: PolyField, a: Form) -> Form:
    """``i_u a = a(u, .)`` with the multivector filling the leading slots."""
    if not isinstance(u, PolyField) or not isinstance(a, Form):
        raise CalculusError("contract expects (PolyField, Form)")
    if a.degree < u.degree:
        raise CalculusError(f"cannot contract a {u.degree}-vector with a {a.degree}-form")
    if a.chart != u.chart:
        raise CalculusError("chart mismatch")
    table: dict = {}
    for kj, cu in u.coeffs.items():
        jset = set(kj)
        for ki, ca in a.coeffs.items():
            if not jset.issubset(ki):
                continue
            rest = tuple(i for i in ki if i not in jset)
            prod = cu * ca
            _add_into(table, rest, prod if split_sign(ki, kj) == 1 else -prod)
    return Form._new(a.chart, a.degree - u.degree, table)


def lie_bracket(X: PolyField, Y: PolyField) -> PolyField:
    if X.degree != 1 or Y.degree != 1:
        raise CalculusError("lie_bracket is defined for vector fields")
    if X.chart != Y.chart:
        raise CalculusError("chart mismatch")
    chart = X.chart
    names = chart.names
    table: dict = {}
    for (j,), cy in Y.coeffs.items():
        _add_into(table, (j,), X.apply(cy))
    for (j,), cx in X.coeffs.items():
        _add_into(table, (j,), -Y.apply(cx))
    return PolyField._new(chart, 1, table)


# --------------------------------------------------------------------------
# maps


class CoordMap:
    """Bundle morphism in coordinates: target coordinate -> Expr on source."""

    def __init__(self, source: Chart, target: Chart, mapping: Mapping[str, Expr], name: str = ""):
        self.source = source
        self.target = target
        self.name = name
        m = {}
        for k, v in mapping.items():
            if k not in target:
                raise CalculusError(f"{k!r} is not a coordinate of the target chart")
            m[k] = v if isinstance(v, Expr) else const(v)
        missing = [n for n in target.names if n not in m]
        if missing:
            raise CalculusError(f"no assignment for target coordinates {missing}")
        self.mapping = {n: m[n] for n in target.names}
        self._dcache: dict = {}

    def __getitem__(self, name) -> Expr:
        return self.mapping[name]

    def __call__(self, e: Expr) -> Expr:
        """Pull a function on the target back to the source."""
        return substitute(e, self.mapping)

    def items(self):
        return self.mapping.items()

    def compose(self, inner: "CoordMap") -> "CoordMap":
        """``self o inner``."""
        if inner.target != self.source:
            raise CalculusError("composition needs matching charts")
        return CoordMap(inner.source, self.target, {k: inner(v) for k, v in self.mapping.items()})

    def differential(self, name: str) -> Form:
        """d(phi^name) as a 1-form on the source."""
        got = self._dcache.get(name)
        if got is None:
            got = self._dcache[name] = exterior_d(as_form(self.source, self.mapping[name]))
        return got

    def jacobian(self) -> dict:
        """{(target name, source name): partial derivative}, nonzero entries."""
        out = {}
        for t, e in self.mapping.items():
            for s in dependencies(e):
                if s in self.source:
                    d = diff(e, s)
                    if not d.is_zero():
                        out[(t, s)] = d
        return out

    def equals(self, other: "CoordMap") -> bool:
        return self.target == other.target and all(
            equal(self.mapping[k], other.mapping[k]) for k in self.mapping
        )

    def __eq__(self, other):
        if not isinstance(other, CoordMap):
            return NotImplemented
        return self.source == other.source and self.target == other.target and self.mapping == other.mapping

    __hash__ = None

    def __str__(self):
        return "\n".join(f"{k} = {to_text(v)}" for k, v in self.mapping.items())

    def to_dict(self) -> dict:
        return {"name": self.name, "source": self.source.descriptor(), "target": self.target.descriptor(),
                "map": {k: to_text(v) for k, v in self.mapping.items()}}


def identity_map(chart: Chart) -> CoordMap:
    return CoordMap(chart, chart, {n: var(n) for n in chart.names}, "id")


def pullback(phi: CoordMap, a) -> Form:
    """Pull a form on ``phi.target`` back to ``phi.source``."""
    if isinstance(a, Expr):
        return as_form(phi.source, phi(a))
    if a.chart != phi.target:
        raise CalculusError("form does not live on the map's target chart")
    src = phi.source
    tnames = phi.target.names
    out = Form(src, a.degree)
    for key, c in a.coeffs.items():
        term = as_form(src, phi(c))
        for i in key:
            term = wedge(term, phi.differential(tnames[i]))
            if term.is_zero():
                break
        else:
            out = out + term
    return out


def pushforward_field(phi: CoordMap, X: PolyField) -> PolyField:
    """Push a multivector along ``phi`` multilinearly by the Jacobian.

    The result is a field along the map: its coefficients are expressed in
    source coordinates.
    """
    if X.chart != phi.source:
        raise CalculusError("field does not live on the map's source chart")
    snames = phi.source.names
    images: dict = {}

    def image(j):
        v = images.get(j)
        if v is None:
            coeffs = {}
            for t, e in phi.mapping.items():
                d = diff(e, snames[j])
                if not d.is_zero():
                    coeffs[(t,)] = d
            v = images[j] = PolyField(phi.target, 1, coeffs)
        return v

    out = PolyField(phi.target, X.degree)
    for key, c in X.coeffs.items():
        term = image(key[0])
        for j in key[1:]:
            term = wedge(term, image(j))
        out = out + term.scale(c)
    return out
