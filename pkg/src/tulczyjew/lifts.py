"""Lift operators ``iota_n`` and ``dT_n`` and the canonical forms they act on."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

from .calculus import CalculusError, CoordMap, Form, as_form, exterior_d, split_sign
from .charts import Chart, apply_functor, base_chart, fibred_product
from .expr import ZERO, Expr, dependencies, var

__all__ = [
    "LiftContext",
    "iota_n",
    "dT_n",
    "liouville_form",
    "multisymplectic_form",
    "canonical_form",
    "delta_pairing",
    "PairingResult",
    "vertical_quotient_pairing",
    "contraction_map",
]


class LiftContext:
    """The fibration ``WedgeT(n) N -> N`` used by the lift operators."""

    def __init__(self, base: Chart, n: int):
        if n < 1:
            raise ValueError("lift order must be >= 1")
        self.base = base
        self.n = n
        self.lifted = apply_functor(base, f"WedgeT({n})" if n > 1 else "T")
        self.projection = CoordMap(self.lifted, base, {c: var(c) for c in base.names}, "tau")
        names = base.names
        # velocity coordinate of every increasing n-tuple of base positions
        self._velocity = {}
        for tup in combinations(range(len(base)), n):
            sign, c = self.lifted.lifted(*(names[i] for i in tup))
            self._velocity[tup] = var(c.name)
        self._index_map = [self.lifted.index(nm) for nm in names]

    def velocity(self, tup) -> Expr:
        return self._velocity[tuple(tup)]

    def tautological(self):
        """The tautological n-vector u = sum_J v_J d_J, as a field on N."""
        from .calculus import PolyField

        return PolyField(self.base, self.n, dict(self._velocity))

    def lift_form(self, a: Form) -> Form:
        """Pull a form on N back along the projection."""
        table = {tuple(self._index_map[i] for i in k): c for k, c in a.coeffs.items()}
        return Form._new(self.lifted, a.degree, table)

    def __repr__(self):
        return f"LiftContext(n={self.n}, {self.lifted!r})"


def _zero_function(chart: Chart) -> Form:
    return Form(chart, 0)


def iota_n(ctx: LiftContext, phi: Form) -> Form:
    """``(iota^n phi)(v1, ...) = phi(u, T tau v1, ...)``; zero when deg < n."""
    if phi.chart != ctx.base:
        raise CalculusError("form does not live on the context's base chart")
    n = ctx.n
    if phi.degree < n:
        return _zero_function(ctx.lifted)
    table: dict = {}
    imap = ctx._index_map
    for key, c in phi.coeffs.items():
        for J in combinations(key, n):
            rest = tuple(imap[i] for i in key if i not in J)
            term = ctx.velocity(J) * c
            if split_sign(key, J) == -1:
                term = -term
            old = table.get(rest)
            new = term if old is None else old + term
            if new.is_zero():
                table.pop(rest, None)
            else:
                table[rest] = new
    return Form._new(ctx.lifted, phi.degree - n, table)


def dT_n(ctx: LiftContext, phi: Form) -> Form:
    """Graded commutator ``[d, iota^n] = d iota^n - (-1)^n iota^n d``."""
    n, p = ctx.n, phi.degree
    if p + 1 < n:
        return _zero_function(ctx.lifted)
    second = iota_n(ctx, exterior_d(phi))
    if n % 2 == 0:
        second = -second
    if p < n:
        return second
    return exterior_d(iota_n(ctx, phi)) + second


def canonical_form(chart: Chart) -> Form:
    """Liouville form of a chart built by ``Tstar``/``WedgeTstar(k)``:
    sum over momenta P of ``P dz^(origin of P)``."""
    if not chart.functors or chart.functors[-1].kind != "Tstar":
        raise CalculusError(f"{chart.name} is not a cotangent-type chart")
    k = chart.functors[-1].order
    coeffs = {}
    parent_names = set(chart.parent.names)
    for c in chart.coords:
        if c.name in parent_names or not c.origin:
            continue
        coeffs[c.origin] = var(c.name)
    return Form(chart, k, coeffs)


def liouville_form(base: Chart, k: int) -> Form:
    """Liouville k-form on ``WedgeTstar(k)`` of ``base``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return canonical_form(apply_functor(base, f"WedgeTstar({k})" if k > 1 else "Tstar"))


def multisymplectic_form(base: Chart, k: int) -> Form:
    return exterior_d(liouville_form(base, k))


# --------------------------------------------------------------------------
# pairings


def delta_pairing(base: Chart, n: int = 2):
    """``Delta^n = sum_I p_I i_xdot dx^I`` on ``TM x_M WedgeT*(n) M``.

    Returns ``(chart, form)``.
    """
    tm = apply_functor(base, "T")
    tsm = apply_functor(base, f"WedgeTstar({n})" if n > 1 else "Tstar")
    chart = fibred_product(tm, tsm, f"TM x_M W{n}T*M")
    names = base.names
    coeffs: dict = {}
    for I in combinations(range(len(names)), n):
        _, pc = tsm.lifted(*(names[i] for i in I))
        p = var(pc.name)
        for pos, i in enumerate(I):
            _, xd = tm.lifted(names[i])
            rest = tuple(names[j] for j in I if j != i)
            term = p * var(xd.name)
            term = term if pos % 2 == 0 else -term
            coeffs.setdefault(rest, ZERO)
            coeffs[rest] = coeffs[rest] + term
    return chart, Form(chart, n - 1, coeffs)


@dataclass
class PairingResult:
    value: Expr
    chart: Chart
    double_vertical: list = field(default_factory=list)

    @property
    def projects(self) -> bool:
        """True when no double-vertical coordinate occurs."""
        return not self.double_vertical


def vertical_quotient_pairing(delta: Form, E: Chart, F: Chart) -> PairingResult:
    """``dT_2 delta`` for a semibasic 1-form on ``E x_M F``, bilinear in the
    fibre coordinates, with a scan for double-vertical coordinates."""
    product = fibred_product(E, F)
    if delta.chart.names != product.names:
        raise CalculusError("delta must live on the fibred product of E and F")
    if delta.degree != 1:
        raise CalculusError("delta must be a 1-form")
    chart = delta.chart
    base = {c.name for c in chart.coords if c.role == "base"}
    e_fib = [c.name for c in E.coords if c.role != "base"]
    f_fib = [c.name for c in F.coords if c.role != "base"]
    for names, c in delta.items():
        if names[0] not in base:
            raise CalculusError(f"delta is not semibasic: it contains d{names[0]}")
        if c.polynomial_degree(e_fib) != {1} or c.polynomial_degree(f_fib) != {1}:
            raise CalculusError("delta is not bilinear in the fibre coordinates")
    ctx = LiftContext(chart, 2)
    value = dT_n(ctx, delta).scalar()
    fibres = set(e_fib) | set(f_fib)
    dv = [c.name for c in ctx.lifted.coords
          if c.origin and all(o in fibres for o in c.origin) and c.name not in chart]
    used = sorted(set(dv) & dependencies(value))
    return PairingResult(value, ctx.lifted, used)


def contraction_map(ctx: LiftContext, alpha: Form) -> CoordMap:
    """``v -> alpha(v, .)`` as a map ``WedgeT(n) N -> WedgeT*(p-n) N``."""
    p, n = alpha.degree, ctx.n
    k = p - n
    if k < 1:
        raise CalculusError("need deg(alpha) > n")
    target = apply_functor(ctx.base, f"WedgeTstar({k})" if k > 1 else "Tstar")
    image = iota_n(ctx, alpha)
    mapping = {nm: var(nm) for nm in ctx.base.names}
    lnames = ctx.lifted.names
    for c in target.coords:
        if c.name in ctx.base:
            continue
        mapping[c.name] = image[tuple(ctx.lifted.index(o) for o in c.origin)]
    return CoordMap(ctx.lifted, target, mapping)
