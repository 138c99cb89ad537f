"""Coordinate charts for a base manifold and the bundles built over it.

A chart is an ordered tuple of :class:`Coordinate` objects.  Antisymmetric
coordinates are stored once per increasing index tuple; :meth:`Chart.lookup`
and :meth:`Chart.velocity` return the stored coordinate together with the
permutation sign.

Lifted coordinates are named by their constituents::

    WedgeT(2) of M           x1..xm, xd^12, ...
    WedgeT(2) of TM          ..., y^12 (x, xd), z^12 (xd, xd)
    WedgeT(2) of WedgeT*(2)  ..., y^1_23 (x, p), pd_1234 (p, p)
    T of WedgeT(2)M          x, xd^12, xp^1, xdp^12
    Tstar of WedgeT(2)M      x, xd^12, p_1, f_12
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from itertools import combinations
from typing import Iterable, Sequence

from .expr import Expr, var
from .expr.names import join_name, normalize_identifier, register_upper_family, split_name

__all__ = [
    "Coordinate",
    "Chart",
    "Functor",
    "ChartError",
    "base_chart",
    "vector_bundle",
    "fibred_product",
    "apply_functor",
    "build_chart",
    "weight_field",
    "truncate_degree",
    "chart_from_json",
]


class ChartError(ValueError):
    pass


@dataclass(frozen=True)
class Coordinate:
    name: str
    family: str
    upper: tuple = ()
    lower: tuple = ()
    bidegree: tuple = (0, 0)
    role: str = "base"  # base | fibre | velocity | momentum
    origin: tuple = ()  # constituent coordinate names in the parent chart

    @property
    def antisymmetry(self) -> str:
        sign, _ = normalize_identifier(join_name(self.family, self.lower[::-1], self.upper[::-1]))
        return "antisymmetric" if len(self.upper) + len(self.lower) > 1 and sign == -1 else "none"


@dataclass(frozen=True)
class Functor:
    kind: str  # "T" or "Tstar"
    order: int = 1

    @classmethod
    def parse(cls, text) -> "Functor":
        if isinstance(text, Functor):
            return text
        s = str(text).replace(" ", "")
        m = re.fullmatch(r"(WedgeTstar|WedgeT\*|WedgeT|Tstar|T\*|T)(?:\((\d+)\))?", s)
        if not m:
            raise ChartError(f"unknown functor {text!r}")
        kind = "Tstar" if "star" in m.group(1) or "*" in m.group(1) else "T"
        order = int(m.group(2)) if m.group(2) else 1
        if m.group(1) in ("T", "Tstar", "T*") and m.group(2) and order != 1:
            raise ChartError(f"use WedgeT(n)/WedgeTstar(n) for order {order}")
        if order < 1:
            raise ChartError("functor order must be >= 1")
        return cls(kind, order)

    def __str__(self):
        if self.order == 1:
            return self.kind
        return f"Wedge{self.kind}({self.order})"


class Chart:
    """Immutable ordered coordinate list."""

    def __init__(self, name: str, coords: Sequence[Coordinate], base_dim: int,
                 functors: tuple = (), parent: "Chart | None" = None,
                 fibres: tuple = (), base_names: tuple = ()):
        self.name = name
        self.coords = tuple(coords)
        self.base_dim = base_dim
        self.functors = tuple(functors)
        self.parent = parent
        self.fibres = tuple(fibres)
        self.base_names = tuple(base_names)
        self._index = {}
        for i, c in enumerate(self.coords):
            if c.name in self._index:
                raise ChartError(f"duplicate coordinate name {c.name!r} in {name}")
            self._index[c.name] = i
        # origins refer to the parent chart, so only this level's lifts count
        inherited = set(parent.names) if parent is not None else set()
        self._origins = {c.origin: c for c in self.coords if c.origin and c.name not in inherited}

    # -- container protocol ------------------------------------------------

    def __len__(self):
        return len(self.coords)

    def __iter__(self):
        return iter(self.coords)

    def __contains__(self, name):
        return name in self._index

    def __getitem__(self, name) -> Coordinate:
        if isinstance(name, int):
            return self.coords[name]
        try:
            return self.coords[self._index[name]]
        except KeyError:
            raise KeyError(f"{name!r} is not a coordinate of {self.name}") from None

    def __eq__(self, other):
        return isinstance(other, Chart) and self.coords == other.coords

    def __hash__(self):
        return hash(self.coords)

    def __repr__(self):
        return f"Chart({self.name}, {len(self)} coordinates)"

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.coords]

    @property
    def families(self) -> set:
        return {c.family for c in self.coords}

    @property
    def graded(self) -> bool:
        return bool(self.functors) or bool(self.fibres)

    def index(self, name: str) -> int:
        return self._index[name]

    def var(self, name: str) -> Expr:
        if name not in self._index:
            raise KeyError(f"{name!r} is not a coordinate of {self.name}")
        return var(name)

    def vars(self) -> list[Expr]:
        return [var(n) for n in self.names]

    def by_role(self, role: str) -> list[Coordinate]:
        return [c for c in self.coords if c.role == role]

    def by_bidegree(self, bideg) -> list[Coordinate]:
        return [c for c in self.coords if c.bidegree == tuple(bideg)]

    def base_coordinates(self) -> list[Coordinate]:
        return [c for c in self.coords if c.role == "base"]

    def family(self, family: str) -> list[Coordinate]:
        return [c for c in self.coords if c.family == family]

    # -- signed lookups ------------------------------------------------------

    def lookup(self, family: str, lower=(), upper=()):
        """Return ``(sign, Coordinate)`` for possibly permuted indices.

        ``(0, None)`` if the indices force the coordinate to vanish or no
        such coordinate exists.
        """
        raw = join_name(family, tuple(lower), tuple(upper))
        sign, name = normalize_identifier(raw)
        if sign == 0 or name not in self._index:
            return 0, None
        return sign, self[name]

    def lifted(self, *origin: str):
        """Return ``(sign, Coordinate)`` of the lifted coordinate built from
        the parent-chart coordinates ``origin`` (in any order)."""
        if self.parent is None:
            raise ChartError(f"{self.name} is not a lifted chart")
        if len(set(origin)) != len(origin):
            return 0, None
        pos = [self.parent.index(o) for o in origin]
        order = sorted(range(len(pos)), key=lambda i: pos[i])
        sign = _perm_parity(order)
        key = tuple(origin[i] for i in order)
        c = self._origins.get(key)
        if c is None:
            return 0, None
        return sign, c

    velocity = lifted
    momentum = lifted

    def lifted_expr(self, *origin: str) -> Expr:
        sign, c = self.lifted(*origin)
        if c is None:
            return Expr._raw({})
        return var(c.name) * sign

    # -- serialisation -------------------------------------------------------

    def descriptor(self) -> dict:
        root = self
        while root.parent is not None:
            root = root.parent
        doc = {"base_dim": self.base_dim, "names": list(self.base_names),
               "functors": [str(f) for f in self.functors]}
        if root.fibres:
            doc["fibres"] = list(root.fibres)
        return doc

    def to_json(self) -> str:
        return json.dumps(self.descriptor())

    def table(self) -> list[dict]:
        return [
            {"name": c.name, "bidegree": list(c.bidegree), "role": c.role,
             "antisymmetry": c.antisymmetry, "origin": list(c.origin)}
            for c in self.coords
        ]


def _perm_parity(order) -> int:
    sign = 1
    seen = list(order)
    for i in range(len(seen)):
        for j in range(i + 1, len(seen)):
            if seen[i] > seen[j]:
                sign = -sign
    return sign


def _digits(s):
    return tuple(int(ch) for ch in s) if s else ()


# --------------------------------------------------------------------------
# base charts and vector bundles


def base_chart(dim: int, names: Iterable[str] | None = None) -> Chart:
    """Chart on the base manifold M with coordinates of bi-degree (0,0)."""
    names = [f"x{i + 1}" for i in range(dim)] if names is None else list(names)
    if dim < 1:
        raise ChartError("base dimension must be positive")
    if dim > 9:
        raise ChartError("index strings use single digits, so dim <= 9")
    if len(names) != dim:
        raise ChartError(f"expected {dim} names, got {len(names)}")
    if len(set(names)) != dim:
        raise ChartError("duplicate coordinate names")
    for n in names:
        if not re.fullmatch(r"[A-Za-z][A-Za-z0-9]*", n):
            raise ChartError(f"invalid base coordinate name {n!r}")
    coords = [Coordinate(n, "x", (i + 1,), (), (0, 0), "base") for i, n in enumerate(names)]
    return Chart("M", coords, dim, base_names=tuple(names))


def vector_bundle(base: Chart, fibres: Iterable[str], name: str = "E") -> Chart:
    """Vector bundle over ``base`` with the given linear fibre coordinates.

    Fibre names follow the identifier syntax (``e^1``, ``xi_2``, ``fa_13``);
    they get bi-degree (1, 0).
    """
    if base.functors or base.fibres:
        raise ChartError("vector bundles are built over a base chart")
    coords = list(base.coords)
    for fname in fibres:
        family, lower, upper = split_name(fname)
        sign, canon = normalize_identifier(fname)
        if sign != 1 or canon != fname:
            raise ChartError(f"fibre coordinate {fname!r} is not in canonical form")
        if upper:
            register_upper_family(family)
        coords.append(Coordinate(fname, family, _digits(upper), _digits(lower), (1, 0), "fibre"))
    return Chart(name, coords, base.base_dim, fibres=tuple(fibres), base_names=base.base_names)


def fibred_product(a: Chart, b: Chart, name: str | None = None) -> Chart:
    """Fibred product over M of two linear bundles (fibre coordinates keep
    their names and become degree (1, 0))."""
    if a.base_names != b.base_names:
        raise ChartError("fibred product needs a common base")
    for c in (a, b):
        if c.functors and (len(c.functors) > 1 or c.parent.graded):
            raise ChartError(f"{c.name} is not a vector bundle over the base")
    fib = [c.name for c in a.coords if c.role != "base"] + [c.name for c in b.coords if c.role != "base"]
    base = base_chart(a.base_dim, a.base_names)
    return vector_bundle(base, fib, name or f"{a.name} x_M {b.name}")


# --------------------------------------------------------------------------
# functors

_DOT = {"x": "xd", "p": "pd", "e": "ed", "f": "fd", "xi": "xid"}
_PRIME = {"x": "xp", "xd": "xdp"}
_DUAL = {"x": ["p", "f"], "xd": ["f", "fx"], "p": ["q", "qs"], "e": ["pi"], "xi": ["phi"]}
_Y_PARTNERS = {"xd", "p", "e", "xi", "f"}


def _velocity_candidates(fams: tuple, parent_families: set) -> list[str]:
    if len(fams) == 1:
        F = fams[0]
        if "xd" in parent_families:
            return [_PRIME.get(F, F + "p"), F + "pp"]
        return [_DOT.get(F, F + "d"), F + "p"]
    others = [f for f in fams if f != "x"]
    nx = len(fams) - len(others)
    if not others:
        return ["xd", "xp", "xdp"]
    if nx == 0 and len(set(others)) == 1:
        F = others[0]
        return ["z" if F == "xd" else F + "d", F + "d", F + "dd"]
    if len(set(others)) == 1 and len(others) == 1:
        G = others[0]
        return (["y"] if G in _Y_PARTNERS else []) + ["y" + G]
    if nx and len(set(others)) == 1 and len(others) == 2:
        G = others[0]
        return ["w", "w" + G]
    return ["v" + "".join(others)]


def _momentum_candidates(fams: tuple, parent_families: set) -> list[str]:
    if len(fams) == 1:
        F = fams[0]
        cands = [c for c in _DUAL.get(F, []) if c not in parent_families]
        return cands + [F + "s"]
    if all(f == "x" for f in fams):
        return [c for c in ("p", "f") if c not in parent_families] + ["ps"]
    return ["m" + "".join(fams)]


def apply_functor(chart: Chart, functor) -> Chart:
    """Apply T, Tstar, WedgeT(n) or WedgeTstar(n) to ``chart``."""
    f = Functor.parse(functor)
    if len(chart.functors) >= 2:
        raise ChartError("descriptor nesting beyond depth 2 is not supported")
    n = f.order
    graded = chart.graded
    old = [replace(c, bidegree=(0, c.bidegree[0])) for c in chart.coords]
    groups: dict = {}
    for tup in combinations(chart.coords, n):
        fams = tuple(c.family for c in tup)
        groups.setdefault(fams, []).append(tup)

    taken = set(chart.names)
    new: list[Coordinate] = []
    for fams, tuples in groups.items():
        if f.kind == "T":
            cands = _velocity_candidates(fams, chart.families)
        else:
            cands = _momentum_candidates(fams, chart.families)
        chosen = None
        for fam in cands + [f"{cands[-1]}{k}" for k in range(2, 10)]:
            built = [_lifted_coordinate(fam, tup, f, graded) for tup in tuples]
            names = {c.name for c in built}
            if len(names) == len(built) and not names & taken and all(
                normalize_identifier(c.name) == (1, c.name) for c in built
            ):
                chosen = built
                break
        if chosen is None:
            raise ChartError(f"cannot name lifted coordinates for {fams}")
        for c in chosen:
            if c.upper:
                register_upper_family(c.family)
        taken |= {c.name for c in chosen}
        new.extend(chosen)
    # group by family (in order of first appearance), then by tuple order
    order = {tup: i for i, tup in enumerate(combinations([c.name for c in chart.coords], n))}
    first: dict = {}
    for c in sorted(new, key=lambda c: order[c.origin]):
        first.setdefault(c.family, len(first))
    new.sort(key=lambda c: (first[c.family], order[c.origin]))
    name = f"{f}({chart.name})"
    return Chart(name, old + new, chart.base_dim, chart.functors + (f,), chart, base_names=chart.base_names)


def _lifted_coordinate(fam: str, tup, f: Functor, graded: bool) -> Coordinate:
    upper, lower = (), ()
    for c in tup:
        upper += c.upper
        lower += c.lower
    if f.kind == "Tstar":
        upper, lower = lower, upper
        d1 = sum(c.bidegree[0] for c in tup)
        bideg = (1, max(0, f.order - d1)) if graded else (1, 0)
        role = "momentum"
    else:
        bideg = (1, sum(c.bidegree[0] for c in tup))
        role = "velocity"
    name = join_name(fam, lower, upper)
    return Coordinate(name, fam, upper, lower, bideg, role, tuple(c.name for c in tup))


def build_chart(dim: int, functors: Iterable = (), names=None, fibres=None) -> Chart:
    c = base_chart(dim, names)
    if fibres:
        c = vector_bundle(c, fibres)
    for f in functors:
        c = apply_functor(c, f)
    return c


def chart_from_json(doc) -> Chart:
    if isinstance(doc, str):
        doc = json.loads(doc)
    try:
        dim = int(doc["base_dim"])
    except (KeyError, TypeError, ValueError):
        raise ChartError("chart descriptor needs an integer 'base_dim'") from None
    names = doc.get("names") or None
    return build_chart(dim, doc.get("functors", []), names, doc.get("fibres"))


# --------------------------------------------------------------------------
# gradings


def weight_field(chart: Chart, selector: str = "first"):
    """Diagonal weight vector field sum_c deg(c) * c * d/dc."""
    from .calculus import PolyField

    slot = {"first": 0, "second": 1}.get(selector)
    if slot is None:
        raise ChartError("selector must be 'first' or 'second'")
    coeffs = {}
    for i, c in enumerate(chart.coords):
        w = c.bidegree[slot]
        if w:
            coeffs[(i,)] = var(c.name) * w
    return PolyField(chart, 1, coeffs)


def truncate_degree(chart: Chart, maxdeg: int):
    """Drop coordinates whose second degree exceeds ``maxdeg``.

    Returns the truncated chart and the projection CoordMap.
    """
    from .calculus import CoordMap

    if maxdeg < 0:
        raise ChartError("maxdeg must be non-negative")
    kept = [c for c in chart.coords if c.bidegree[1] <= maxdeg]
    if len(kept) == len(chart.coords):
        target = chart
    else:
        target = Chart(f"{chart.name}<={maxdeg}", kept, chart.base_dim, chart.functors,
                       chart.parent, chart.fibres, chart.base_names)
    proj = CoordMap(chart, target, {c.name: var(c.name) for c in kept})
    return target, proj
