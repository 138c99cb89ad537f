"""Phase dynamics, Legendre maps and field equations for string Lagrangians.

Momenta and fibre derivatives use the all-pairs convention: a function of
the stored bivector coordinates ``xd^{kl}`` (k < l) is differentiated as if
every ordered pair were independent, which is half of the derivative in
the stored coordinate.  The Euler-Lagrange emitter is the exception: it is
derived from the action and uses the stored-coordinate derivative.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from .calculus import CalculusError, CoordMap
from .charts import Chart, apply_functor
from .expr import (
    ONE,
    ZERO,
    Expr,
    Func,
    atom_expr,
    const,
    dependencies,
    diff,
    evaluate,
    func,
    lambdify,
    parse,
    sqrt,
    substitute,
    to_latex,
    to_text,
    var,
)

__all__ = [
    "DynamicsError",
    "metric_matrix",
    "Lagrangian",
    "Hamiltonian",
    "MorseFamily",
    "PhaseDynamics",
    "SurfaceSystem",
    "lagrange_phase",
    "legendre_map",
    "legendre_hamiltonian",
    "hamilton_phase",
    "morse_family_phase",
    "euler_lagrange_residual",
    "hamilton_surface_equations",
    "graph_substitution",
    "minimal_surface_residual",
    "el_vs_minimal_surface_consistency",
    "ConsistencyReport",
    "plucker_relations",
    "is_decomposable",
    "y_trace",
]

HALF = Fraction(1, 2)


class DynamicsError(ValueError):
    pass


# --------------------------------------------------------------------------
# metrics


def metric_matrix(base: Chart, metric="euclidean") -> list:
    """Symmetric matrix of Exprs for a named metric or an explicit matrix.

    ``"general"`` gives unknown functions ``g_{ij}(x)`` with ``g_{ij} = g_{ji}``.
    """
    m = base.base_dim
    names = base.names[:m]
    if isinstance(metric, str):
        key = metric.lower()
        if key == "euclidean":
            return [[ONE if i == j else ZERO for j in range(m)] for i in range(m)]
        if key in ("minkowski", "minkowski(+---)", "lorentz"):
            return [[(ONE if i == 0 else -ONE) if i == j else ZERO for j in range(m)] for i in range(m)]
        if key == "general":
            return [[func(f"g_{min(i, j) + 1}{max(i, j) + 1}", names) for j in range(m)] for i in range(m)]
        raise DynamicsError(f"unknown metric {metric!r}")
    g = [[e if isinstance(e, Expr) else (parse(e) if isinstance(e, str) else const(e)) for e in row]
         for row in metric]
    if len(g) != m or any(len(r) != m for r in g):
        raise DynamicsError(f"metric must be {m}x{m}")
    for i in range(m):
        for j in range(i):
            if g[i][j] != g[j][i]:
                raise DynamicsError("metric is not symmetric")
    return g


def _bivector_metric(g):
    def h(mu, nu, ka, la):
        return (g[mu][ka] * g[nu][la] - g[mu][la] * g[nu][ka]) * HALF

    return h


def _bivector_chart(base: Chart) -> Chart:
    return apply_functor(base, "WedgeT(2)")


def _covector_chart(base: Chart) -> Chart:
    return apply_functor(base, "WedgeTstar(2)")


def _phase_chart(base: Chart) -> Chart:
    return apply_functor(_covector_chart(base), "WedgeT(2)")


def _pair(chart: Chart, a: str, b: str) -> Expr:
    """Antisymmetrically extended bivector (or 2-form) coordinate."""
    return chart.lifted_expr(a, b)


def _pair_sign(chart: Chart, a: str, b: str):
    sign, c = chart.lifted(a, b)
    return sign, (c.name if c is not None else None)


def _all_pairs_derivative(e: Expr, chart: Chart, a: str, b: str) -> Expr:
    sign, name = _pair_sign(chart, a, b)
    if name is None:
        return ZERO
    return diff(e, name) * (HALF * sign)


def y_trace(base: Chart, rho: int, chart: Chart | None = None) -> Expr:
    """``y^eta_{eta rho}`` in the chart of ``WedgeT(2) WedgeT*(2) M``."""
    chart = chart or _phase_chart(base)
    cov = chart.parent
    names = base.names
    out = ZERO
    for eta in range(len(names)):
        sign, p = _pair_sign(cov, names[eta], names[rho])
        if p is None:
            continue
        out = out + chart.lifted_expr(names[eta], p) * sign
    return out


# --------------------------------------------------------------------------
# generating objects


def _check_vars(e: Expr, allowed, what: str):
    extra = dependencies(e) - set(allowed)
    if extra:
        raise DynamicsError(f"{what} references variables outside its chart: {sorted(extra)}")


@dataclass
class Lagrangian:
    """A function on ``WedgeT(2) M``, optionally built from a metric."""

    base: Chart
    expr: Expr
    metric: list | None = None
    name: str = "L"

    def __post_init__(self):
        if isinstance(self.expr, str):
            self.expr = parse(self.expr)
        _check_vars(self.expr, self.chart.names, "Lagrangian")

    @property
    def chart(self) -> Chart:
        return _bivector_chart(self.base)

    @property
    def velocity_names(self) -> list:
        return [c.name for c in self.chart.coords if c.role == "velocity"]

    def h(self, mu, nu, ka, la) -> Expr:
        if self.metric is None:
            raise DynamicsError("Lagrangian has no metric")
        return _bivector_metric(self.metric)(mu, nu, ka, la)

    @classmethod
    def nambu_goto(cls, base: Chart, metric="euclidean") -> "Lagrangian":
        g = metric_matrix(base, metric)
        return cls(base, sqrt(_quadratic_form(base, g)), g, "nambu-goto")

    @classmethod
    def quadratic(cls, base: Chart, metric="euclidean") -> "Lagrangian":
        g = metric_matrix(base, metric)
        return cls(base, _quadratic_form(base, g) * HALF, g, "quadratic")


def _quadratic_form(base: Chart, g, chart: Chart | None = None) -> Expr:
    """``(w|w) = h_{mu nu ka la} w^{mu nu} w^{ka la}`` summed over all indices."""
    chart = chart or _bivector_chart(base)
    h = _bivector_metric(g)
    names = base.names
    m = len(names)
    out = ZERO
    for mu in range(m):
        for nu in range(m):
            a = _pair(chart, names[mu], names[nu])
            if a.is_zero():
                continue
            for ka in range(m):
                for la in range(m):
                    b = _pair(chart, names[ka], names[la])
                    if b.is_zero():
                        continue
                    c = h(mu, nu, ka, la)
                    if not c.is_zero():
                        out = out + c * a * b
    return out


def _inverse_metric(g):
    """Inverse of a small matrix of Exprs by Gauss-Jordan elimination."""
    m = len(g)
    a = [list(row) + [ONE if i == j else ZERO for j in range(m)] for i, row in enumerate(g)]
    for col in range(m):
        piv = next((r for r in range(col, m) if not a[r][col].is_zero()), None)
        if piv is None:
            raise DynamicsError("metric is singular")
        a[col], a[piv] = a[piv], a[col]
        inv = ONE / a[col][col]
        a[col] = [x * inv for x in a[col]]
        for r in range(m):
            if r != col and not a[r][col].is_zero():
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [row[m:] for row in a]


@dataclass
class Hamiltonian:
    """A function on ``WedgeT*(2) M``."""

    base: Chart
    expr: Expr
    name: str = "H"

    def __post_init__(self):
        if isinstance(self.expr, str):
            self.expr = parse(self.expr)
        _check_vars(self.expr, self.chart.names, "Hamiltonian")

    @property
    def chart(self) -> Chart:
        return _covector_chart(self.base)

    @classmethod
    def quadratic(cls, base: Chart, metric="euclidean", scale=HALF) -> "Hamiltonian":
        g = _inverse_metric(metric_matrix(base, metric))
        return cls(base, _quadratic_form(base, g, _covector_chart(base)) * scale, "quadratic")


@dataclass
class MorseFamily:
    """A function on ``WedgeT*(2) M x R^k`` with auxiliary parameters."""

    base: Chart
    expr: Expr
    params: tuple
    name: str = "F"

    def __post_init__(self):
        if isinstance(self.expr, str):
            self.expr = parse(self.expr)
        self.params = tuple(self.params)
        if not self.params:
            raise DynamicsError("a Morse family needs at least one parameter")
        clash = set(self.params) & set(self.chart.names)
        if clash:
            raise DynamicsError(f"parameters clash with chart coordinates: {sorted(clash)}")
        _check_vars(self.expr, list(self.chart.names) + list(self.params), "Morse family")

    @property
    def chart(self) -> Chart:
        return _covector_chart(self.base)

    @classmethod
    def nambu_goto(cls, base: Chart, metric="euclidean", param: str = "r") -> "MorseFamily":
        """``(p, r) -> r (sqrt((p|p)) - 1)``."""
        g = _inverse_metric(metric_matrix(base, metric))
        pp = _quadratic_form(base, g, _covector_chart(base))
        return cls(base, var(param) * (sqrt(pp) - 1), (param,), "nambu-goto")


# --------------------------------------------------------------------------
# phase dynamics


@dataclass
class PhaseDynamics:
    """Zero set of ``residuals`` in the chart of ``WedgeT(2) WedgeT*(2) M``."""

    kind: str
    base: Chart
    residuals: dict
    params: tuple = ()
    source: object = None

    @property
    def chart(self) -> Chart:
        return _phase_chart(self.base)

    def labels(self):
        return list(self.residuals)

    def __getitem__(self, label) -> Expr:
        return self.residuals[label]

    def evaluate(self, point) -> dict:
        return {k: evaluate(e, point) for k, e in self.residuals.items()}

    def max_abs(self, point) -> float:
        return max(abs(float(v)) for v in self.evaluate(point).values())

    def uses_top_block(self) -> list:
        """Coordinates of bi-degree (1, 2) that occur (there should be none)."""
        top = {c.name for c in self.chart.coords if c.bidegree[1] >= 2}
        out = set()
        for e in self.residuals.values():
            out |= dependencies(e) & top
        return sorted(out)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "dim": self.base.base_dim,
            "base": self.base.names,
            "params": list(self.params),
            "residuals": {k: to_text(v) for k, v in self.residuals.items()},
        }

    @classmethod
    def from_dict(cls, doc) -> "PhaseDynamics":
        from .charts import base_chart

        base = base_chart(doc["dim"], doc.get("base"))
        res = {k: parse(v) for k, v in doc["residuals"].items()}
        return cls(doc["kind"], base, res, tuple(doc.get("params", ())))

    def text_lines(self):
        return [f"{k}: {to_text(v)} = 0" for k, v in self.residuals.items()]

    def latex_lines(self):
        return [f"{to_latex(v)} = 0" for v in self.residuals.values()]


def _pairs(base: Chart):
    names = base.names
    return list(combinations(range(len(names)), 2))


def lagrange_phase(L: Lagrangian) -> PhaseDynamics:
    """``y^eta_{eta rho} + dL/dx^rho = 0`` and ``p_{lk} + dL/dxd^{lk} = 0``."""
    base = L.base
    chart = _phase_chart(base)
    names = base.names
    vel = L.chart
    res = {}
    for rho in range(len(names)):
        res[f"trace_{rho + 1}"] = y_trace(base, rho, chart) + diff(L.expr, names[rho])
    for a, b in _pairs(base):
        p = _pair(chart.parent, names[a], names[b])
        res[f"momentum_{a + 1}{b + 1}"] = p + _all_pairs_derivative(L.expr, vel, names[a], names[b])
    return PhaseDynamics("lagrangian", base, res, source=L)


def legendre_map(L: Lagrangian, contraction_sign: int = 1) -> CoordMap:
    """``(x, xd) -> (x, -dL/dxd)``.  ``contraction_sign=-1`` selects the
    opposite contraction convention, which flips the momenta."""
    base = L.base
    cov = _covector_chart(base)
    names = base.names
    mapping = {n: var(n) for n in names}
    for a, b in _pairs(base):
        _, p = _pair_sign(cov, names[a], names[b])
        mapping[p] = -_all_pairs_derivative(L.expr, L.chart, names[a], names[b]) * contraction_sign
    return CoordMap(L.chart, cov, mapping, "Legendre")


def _hamilton_residuals(base: Chart, H: Expr) -> dict:
    chart = _phase_chart(base)
    cov = chart.parent
    names = base.names
    res = {}
    for rho in range(len(names)):
        res[f"trace_{rho + 1}"] = y_trace(base, rho, chart) + diff(H, names[rho])
    for a, b in _pairs(base):
        xd = _pair(chart, names[a], names[b])
        res[f"velocity_{a + 1}{b + 1}"] = xd - _all_pairs_derivative(H, cov, names[a], names[b])
    return res


def hamilton_phase(H: Hamiltonian) -> PhaseDynamics:
    """``y^eta_{eta rho} + dH/dx^rho = 0`` and ``xd^{ns} - dH/dp_{ns} = 0``."""
    if isinstance(H, MorseFamily):
        raise DynamicsError("use morse_family_phase for Morse families")
    return PhaseDynamics("hamiltonian", H.base, _hamilton_residuals(H.base, H.expr), source=H)


def morse_family_phase(F: MorseFamily) -> PhaseDynamics:
    """Hamilton residuals of ``F`` plus stationarity in the parameters."""
    res = _hamilton_residuals(F.base, F.expr)
    stationary = {}
    for r in F.params:
        d = diff(F.expr, r)
        if d.is_zero():
            raise DynamicsError("stationarity eliminates nothing")
        stationary[f"stationary_{r}"] = d
    res.update(stationary)
    return PhaseDynamics("morse", F.base, res, F.params, source=F)


def _solve_linear(rows, rhs):
    """Solve ``rows @ u = rhs`` over Exprs by Gauss-Jordan elimination,
    preferring constant pivots."""
    n = len(rows)
    a = [list(r) + [b] for r, b in zip(rows, rhs)]
    for col in range(n):
        cands = [r for r in range(col, n) if not a[r][col].is_zero()]
        if not cands:
            raise DynamicsError("Legendre map is not invertible")
        piv = next((r for r in cands if a[r][col].is_constant()), cands[0])
        a[col], a[piv] = a[piv], a[col]
        inv = ONE / a[col][col]
        a[col] = [x * inv for x in a[col]]
        for r in range(n):
            if r != col and not a[r][col].is_zero():
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return [row[n] for row in a]


def legendre_hamiltonian(L: Lagrangian) -> Hamiltonian:
    """``H(x, p) = <p, xd> + L`` on the graph of the Legendre map, for a
    Lagrangian at most quadratic in the velocities."""
    vel = L.velocity_names
    # at most quadratic: second velocity derivatives must be velocity-free
    for v in vel:
        for w in vel:
            if dependencies(diff(diff(L.expr, v), w)) & set(vel):
                raise DynamicsError("legendre_hamiltonian needs a Lagrangian of degree <= 2 in the velocities")
    base = L.base
    cov = _covector_chart(base)
    leg = legendre_map(L)
    names = base.names
    # p_I = -dL/dxd^I is affine in xd: split into matrix and offset
    rows, rhs, moms = [], [], []
    zero_vel = {v: ZERO for v in vel}
    for a, b in _pairs(base):
        _, p = _pair_sign(cov, names[a], names[b])
        e = leg[p]
        rows.append([diff(e, v) for v in vel])
        rhs.append(var(p) - substitute(e, zero_vel))
        moms.append(p)
    sol = dict(zip(vel, _solve_linear(rows, rhs)))
    pairing = ZERO
    for p, v in zip(moms, vel):
        pairing = pairing + var(p) * var(v) * 2
    H = substitute(pairing + L.expr, sol)
    return Hamiltonian(base, H, f"legendre({L.name})")


# --------------------------------------------------------------------------
# surface equations


@dataclass
class SurfaceSystem:
    """PDE residuals for unknown fields over the parameters ``(t, s)``.

    Plain field names stand for the field values on the surface; ``D(f(t,s),
    t)`` and friends are partial derivatives.
    """

    base: Chart
    fields: tuple
    params: tuple
    definitions: dict
    residuals: dict
    kind: str = "euler-lagrange"

    def jet(self, name: str, *derivs: str) -> Expr:
        return atom_expr(Func(name, self.params, derivs))

    def text_lines(self):
        out = [f"{k} = {to_text(v)}" for k, v in self.definitions.items()]
        out += [f"{k}: {to_text(v)} = 0" for k, v in self.residuals.items()]
        return out

    def latex_lines(self):
        out = [f"{k} = {to_latex(v)}" for k, v in self.definitions.items()]
        out += [f"{to_latex(v)} = 0" for v in self.residuals.values()]
        return out

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "dim": self.base.base_dim,
            "base": self.base.names,
            "fields": list(self.fields),
            "params": list(self.params),
            "definitions": {k: to_text(v) for k, v in self.definitions.items()},
            "residuals": {k: to_text(v) for k, v in self.residuals.items()},
        }

    @classmethod
    def from_dict(cls, doc) -> "SurfaceSystem":
        from .charts import base_chart

        base = base_chart(doc["dim"], doc.get("base"))
        return cls(base, tuple(doc["fields"]), tuple(doc["params"]),
                   {k: parse(v) for k, v in doc["definitions"].items()},
                   {k: parse(v) for k, v in doc["residuals"].items()}, doc["kind"])


def _total_derivative(e: Expr, fields, params, wrt: str) -> Expr:
    """Derivative along the surface: fields are functions of ``params``."""
    out = ZERO
    for f in fields:
        d = diff(e, f)
        if not d.is_zero():
            out = out + d * atom_expr(Func(f, params, (wrt,)))
    for a in e.leaves():
        if type(a) is Func and a.args == params and a.name in fields:
            d = diff(e, atom_expr(a))
            if not d.is_zero():
                out = out + d * atom_expr(a.differentiated(wrt))
    return out


def _velocity_jets(base: Chart, params):
    chart = _bivector_chart(base)
    names = base.names
    t, s = params
    defs = {}
    for a, b in _pairs(base):
        _, xd = _pair_sign(chart, names[a], names[b])
        xa_t, xa_s = (atom_expr(Func(names[a], params, (d,))) for d in (t, s))
        xb_t, xb_s = (atom_expr(Func(names[b], params, (d,))) for d in (t, s))
        defs[xd] = xa_t * xb_s - xa_s * xb_t
    return defs


def _check_params(base: Chart, params):
    if len(params) != 2 or len(set(params)) != 2:
        raise DynamicsError("need two distinct surface parameters")
    if set(params) & set(base.names):
        raise DynamicsError("surface parameters clash with coordinate names")


def euler_lagrange_residual(L: Lagrangian, params=("t", "s")) -> SurfaceSystem:
    """Euler-Lagrange residual per coordinate for a surface ``(t, s) -> x(t, s)``:

        dL/dx^s - (x^m_t d_s P_{ms} - x^m_s d_t P_{ms}),

    with ``P_{ms} = dL/dxd^{ms}`` taken in the stored coordinate and
    extended antisymmetrically.
    """
    base = L.base
    params = tuple(params)
    _check_params(base, params)
    names = tuple(base.names)
    t, s = params
    defs = _velocity_jets(base, params)
    chart = L.chart
    res = {}
    for sig in range(len(names)):
        lhs = substitute(diff(L.expr, names[sig]), defs)
        rhs = ZERO
        for mu in range(len(names)):
            sign, xd = _pair_sign(chart, names[mu], names[sig])
            if xd is None:
                continue
            P = substitute(diff(L.expr, xd), defs) * sign
            if P.is_zero():
                continue
            x_t = atom_expr(Func(names[mu], params, (t,)))
            x_s = atom_expr(Func(names[mu], params, (s,)))
            rhs = rhs + x_t * _total_derivative(P, names, params, s) - x_s * _total_derivative(P, names, params, t)
        res[f"EL_{sig + 1}"] = lhs - rhs
    return SurfaceSystem(base, names, params, defs, res)


def hamilton_surface_equations(H: Hamiltonian, params=("t", "s")) -> SurfaceSystem:
    """Hamilton equations for a surface ``(t, s) -> (x(t, s), p(t, s))``."""
    base = H.base
    params = tuple(params)
    _check_params(base, params)
    names = tuple(base.names)
    cov = H.chart
    t, s = params
    moms = tuple(c.name for c in cov.coords if c.role == "momentum")
    fields = names + moms
    res = {}
    for a, b in _pairs(base):
        xa_t, xa_s = (atom_expr(Func(names[a], params, (d,))) for d in (t, s))
        xb_t, xb_s = (atom_expr(Func(names[b], params, (d,))) for d in (t, s))
        res[f"velocity_{a + 1}{b + 1}"] = (
            _all_pairs_derivative(H.expr, cov, names[a], names[b]) - (xa_t * xb_s - xa_s * xb_t)
        )
    for sig in range(len(names)):
        rhs = ZERO
        for mu in range(len(names)):
            sign, p = _pair_sign(cov, names[mu], names[sig])
            if p is None:
                continue
            x_t = atom_expr(Func(names[mu], params, (t,)))
            x_s = atom_expr(Func(names[mu], params, (s,)))
            p_t = atom_expr(Func(p, params, (t,)))
            p_s = atom_expr(Func(p, params, (s,)))
            rhs = rhs + (x_t * p_s - x_s * p_t) * sign
        res[f"trace_{sig + 1}"] = -diff(H.expr, names[sig]) - rhs
    return SurfaceSystem(base, fields, params, {}, res, "hamilton")


def graph_substitution(system: SurfaceSystem, height: str = "z") -> dict:
    """Specialise to graphs ``(x, y) -> (x, y, z(x, y))`` over the first two
    coordinates.  Jets of the heights become variables ``z_x, z_y, z_xx,
    z_xy, z_yy`` (``z3_x`` ... when there are several heights)."""
    base = system.base
    names = base.names
    if len(names) < 3:
        raise DynamicsError("graph substitution needs at least 3 coordinates")
    t, s = system.params
    label = {t: "x", s: "y"}
    heights = names[2:]
    table = {}
    for k, f in enumerate(names):
        prefix = height if len(heights) == 1 else f"{height}{k + 1}"
        for derivs in [(t,), (s,), (t, t), (t, s), (s, s)]:
            atom = Func(f, system.params, derivs)
            if k < 2:
                value = ONE if derivs == ((t,), (s,))[k] else ZERO
            else:
                suffix = "".join(sorted(label[d] for d in derivs))
                value = var(f"{prefix}_{suffix}")
            table[atom] = value
    return {k: substitute(v, table) for k, v in system.residuals.items()}


def minimal_surface_residual(zx, zy, zxx, zxy, zyy):
    return (1 + zx**2) * zyy - 2 * zx * zy * zxy + (1 + zy**2) * zxx


@dataclass
class ConsistencyReport:
    samples: int
    tol: float
    ratio: float
    ratio_spread: float
    plane_max: float
    constrained_max: dict = field(default_factory=dict)
    passed: bool = False

    def __str__(self):
        lines = [f"samples={self.samples} tol={self.tol:g}",
                 f"  E3 * rho^3 / MS = {self.ratio:.12g} (spread {self.ratio_spread:.2e})",
                 f"  plane jets: max residual {self.plane_max:.2e}"]
        for k, v in self.constrained_max.items():
            lines.append(f"  on MS = 0: max |{k}| = {v:.2e}")
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines)


def el_vs_minimal_surface_consistency(samples: int = 1000, seed: int = 0, tol: float = 1e-9,
                                      bound: float = 2.0) -> ConsistencyReport:
    """Graph Euler-Lagrange residuals of Euclidean Nambu-Goto in R^3 against
    the expanded minimal-surface operator on random 2-jets."""
    from .charts import base_chart

    base = base_chart(3)
    system = euler_lagrange_residual(Lagrangian.nambu_goto(base, "euclidean"))
    graph = graph_substitution(system)
    jets = ["z_x", "z_y", "z_xx", "z_xy", "z_yy"]
    fns = {k: lambdify(e, jets) for k, e in graph.items()}
    e3 = f"EL_{3}"

    rng = np.random.default_rng(seed)
    zx, zy, zxx, zxy, zyy = rng.uniform(-bound, bound, size=(5, samples))
    rho = np.sqrt(1 + zx**2 + zy**2)
    ms = minimal_surface_residual(zx, zy, zxx, zxy, zyy)
    scaled = fns[e3](zx, zy, zxx, zxy, zyy) * rho**3
    keep = np.abs(ms) > 1e-3
    ratios = scaled[keep] / ms[keep]
    ratio = float(np.median(ratios))
    spread = float(np.max(np.abs(ratios - ratio)))
    proportional = np.max(np.abs(scaled - ratio * ms) / (1 + np.abs(ms))) <= tol

    z0 = np.zeros(samples)
    plane = max(float(np.max(np.abs(f(zx, zy, z0, z0, z0)))) for f in fns.values())

    zyy_c = (2 * zx * zy * zxy - (1 + zy**2) * zxx) / (1 + zx**2)
    constrained = {k: float(np.max(np.abs(f(zx, zy, zxx, zxy, zyy_c)))) for k, f in fns.items()}

    ok = bool(proportional and ratio != 0 and plane <= tol and all(v <= tol for v in constrained.values()))
    return ConsistencyReport(samples, tol, ratio, spread, plane, constrained, ok)


# --------------------------------------------------------------------------
# decomposability


def plucker_relations(base: Chart) -> list:
    """Quadratic relations cutting out decomposable bivectors."""
    chart = _bivector_chart(base)
    n = base.names
    out = []
    for i, j, k, l in combinations(range(len(n)), 4):
        def w(a, b):
            return _pair(chart, n[a], n[b])

        out.append(w(i, j) * w(k, l) - w(i, k) * w(j, l) + w(i, l) * w(j, k))
    return out


def is_decomposable(base: Chart, point, tol: float = 1e-12) -> bool:
    """Diagnostic only: whether a bivector satisfies the Plucker relations."""
    return all(abs(float(evaluate(r, point))) <= tol for r in plucker_relations(base))
