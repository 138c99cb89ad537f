"""The morphisms kappa^n, alpha^n and beta^n and the identities they satisfy."""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

from .calculus import CalculusError, CoordMap, Form, PolyField, exterior_d, pullback, pushforward_field
from .charts import Chart, apply_functor
from .expr import ONE, ZERO, Expr, const, dependencies, diff, evaluate, substitute, var
from .lifts import LiftContext, canonical_form, delta_pairing, dT_n, iota_n

__all__ = [
    "wedge_functor",
    "kappa_n",
    "alpha_n",
    "beta_n",
    "compose_relation",
    "level_sets_coincide",
    "verify_theorem",
    "TheoremReport",
    "kernel_witness_kappa",
    "bidegree_preserved",
    "respects_fibrations",
    "tangent_lift_field",
]


def wedge_functor(n: int) -> str:
    return "T" if n == 1 else f"WedgeT({n})"


def _star(n: int) -> str:
    return "Tstar" if n == 1 else f"WedgeTstar({n})"


def _det(rows) -> Expr:
    """Determinant of a small square matrix of Exprs (Laplace expansion)."""
    k = len(rows)
    if k == 1:
        return rows[0][0]
    if k == 2:
        return rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
    out = ZERO
    for j in range(k):
        if rows[0][j].is_zero():
            continue
        minor = [r[:j] + r[j + 1:] for r in rows[1:]]
        term = rows[0][j] * _det(minor)
        out = out + term if j % 2 == 0 else out - term
    return out


# --------------------------------------------------------------------------
# kappa


def kappa_n(base: Chart, n: int) -> CoordMap:
    """``kappa^n : WedgeT(n) T N -> T WedgeT(n) N``.

    Built from its defining construction: for vectors v_1..v_n tangent to
    TN at one point, ``v_1^...^v_n`` is sent to the tangent vector of
    ``t -> (dx_1 + t dxdot_1)^...^(dx_n + t dxdot_n)``.  Both sides are
    expanded for generic vectors and the target coordinates are solved as
    linear combinations of the source coordinates.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    tn = apply_functor(base, "T")
    source = apply_functor(tn, wedge_functor(n))
    wn = apply_functor(base, wedge_functor(n))
    target = apply_functor(wn, "T")

    bnames = base.names
    # generic vectors: rows a (base directions) and b (fibre directions)
    a = [{c: var(f"_a{i}_{c}") for c in bnames} for i in range(n)]
    b = [{c: var(f"_b{i}_{c}") for c in bnames} for i in range(n)]
    comp = []
    for i in range(n):
        row = dict(a[i])
        for c in bnames:
            row[tn.lifted(c)[1].name] = b[i][c]
        comp.append(row)

    # source coordinates at this level and their values on v_1^...^v_n
    inherited = set(tn.names)
    basis = {}
    for c in source.coords:
        if c.name in inherited:
            continue
        value = _det([[comp[i][o] for o in c.origin] for i in range(n)])
        basis[c.name] = (c.origin, value)

    def solve(poly: Expr) -> Expr:
        # each det has its own set of column names, so read the coefficient
        # off the diagonal monomial and check the reconstruction
        out = ZERO
        for name, (origin, value) in basis.items():
            mono = tuple(sorted(((comp[i][o].single_atom(), 1) for i, o in enumerate(origin)),
                                key=lambda t: t[0].sort_key))
            c = poly.terms.get(mono)
            if c:
                out = out + var(name) * c
        check = substitute(out, {k: v for k, (_, v) in basis.items()})
        if check != poly:
            raise CalculusError("kappa construction is not linear in the source coordinates")
        return out

    mapping = {}
    for c in target.coords:
        if c.name in base:
            mapping[c.name] = var(c.name)
        elif c.name in wn and c.role == "velocity" and c.name not in base:
            mapping[c.name] = solve(_det([[a[i][o] for o in c.origin] for i in range(n)]))
    for c in target.coords:
        if c.name in mapping:
            continue
        (o,) = c.origin
        if o in base:
            # x'^c is the base point of the vectors in TN
            mapping[c.name] = var(tn.lifted(o)[1].name)
        else:
            cols = wn[o].origin
            total = ZERO
            for k in range(n):
                rows = [[(b[i] if i == k else a[i])[col] for col in cols] for i in range(n)]
                total = total + _det(rows)
            mapping[c.name] = solve(total)
    return CoordMap(source, target, mapping, f"kappa^{n}")


def kappa_closed_form(base: Chart, n: int) -> CoordMap:
    """Index formula ``xdot'^I = sum_k (-1)^(n-k) y^(I minus i_k ; i_k)``."""
    tn = apply_functor(base, "T")
    source = apply_functor(tn, wedge_functor(n))
    wn = apply_functor(base, wedge_functor(n))
    target = apply_functor(wn, "T")
    mapping = {}
    for c in target.coords:
        if c.name in base:
            mapping[c.name] = var(c.name)
        elif c.name in wn:
            mapping[c.name] = source.lifted_expr(*c.origin) if n > 1 else source.lifted_expr(c.origin[0])
    for c in target.coords:
        if c.name in mapping:
            continue
        (o,) = c.origin
        if o in base:
            mapping[c.name] = var(tn.lifted(o)[1].name)
            continue
        I = wn[o].origin
        total = ZERO
        for k in range(n):
            rest = [x for j, x in enumerate(I) if j != k]
            term = source.lifted_expr(*rest, tn.lifted(I[k])[1].name)
            total = total + term if (n - 1 - k) % 2 == 0 else total - term
        mapping[c.name] = total
    return CoordMap(source, target, mapping, f"kappa^{n}")


# --------------------------------------------------------------------------
# alpha and beta


def _origin_renaming(chart_from: Chart, chart_to: Chart) -> dict:
    """Map coordinates of ``chart_from`` to those of ``chart_to`` with equal
    origin tuples (and equal names for unlifted coordinates)."""
    out = {}
    inherited = set(chart_from.parent.names)
    for c in chart_from.coords:
        if c.name in inherited:
            if c.name in chart_to:
                out[c.name] = c.name
            continue
        if all(o in chart_to.parent for o in c.origin):
            sign, d = chart_to.lifted(*c.origin)
            if d is not None:
                out[c.name] = (sign, d.name)
    return out


def alpha_n(base: Chart, n: int, *, return_details: bool = False):
    """``alpha^n : WedgeT(n) WedgeT*(n) M -> T* WedgeT(n) M``.

    Solved from the duality ``<P, kappa^n(w)> = dT_n Delta^n (v, w)`` on
    ``WedgeT(n)(TM x_M WedgeT*(n) M)``: the coefficients of the w-variables
    (the TM fibre and the one-velocity block) determine P.
    """
    sm = apply_functor(base, _star(n))
    ctx_s = LiftContext(sm, n)
    source = ctx_s.lifted
    wn = apply_functor(base, wedge_functor(n))
    target = apply_functor(wn, "Tstar")
    kap = kappa_n(base, n)

    comb, delta = delta_pairing(base, n)
    ctx_c = LiftContext(comb, n)
    pairing = dT_n(ctx_c, delta).scalar()
    lifted = ctx_c.lifted

    tn = apply_functor(base, "T")
    tm_fibre = [c.name for c in tn.coords if c.name not in base]
    # kappa's source chart and the combined chart share the TM-side coordinates
    k_source = kap.source
    k_to_comb = {}
    for c in k_source.coords:
        if c.name in base or c.name in tm_fibre:
            k_to_comb[c.name] = c.name
        else:
            sign, d = lifted.lifted(*c.origin)
            if d is not None:
                k_to_comb[c.name] = (sign, d.name)
    w_vars = set(tm_fibre)
    for c in lifted.coords:
        if c.name in comb:
            continue
        n_tm = sum(1 for o in c.origin if o in tm_fibre)
        n_x = sum(1 for o in c.origin if o in base)
        if n_tm == 1 and n_x == n - 1:
            w_vars.add(c.name)

    problems = []
    forbidden = [c.name for c in lifted.coords if c.name not in comb and c.name not in w_vars
                 and any(o in tm_fibre for o in c.origin)]
    bad = sorted(dependencies(pairing) & set(forbidden))
    if bad:
        problems.append(f"pairing depends on non-w vertical coordinates {bad}")

    coeff = {w: diff(pairing, w) for w in w_vars}
    remainder = pairing
    for w in w_vars:
        remainder = substitute(remainder, {w: ZERO})
    if not remainder.is_zero():
        problems.append("pairing has terms without w-variables")
    for w, c in coeff.items():
        if dependencies(c) & w_vars:
            problems.append(f"pairing is not linear in {w}")

    def in_comb(expr_on_k: Expr) -> Expr:
        table = {}
        for name, v in k_to_comb.items():
            if isinstance(v, tuple):
                table[name] = var(v[1]) * v[0]
        return substitute(expr_on_k, table)

    # unknown momentum components: one per target momentum coordinate
    solution: dict = {}
    for t in target.coords:
        if t.role != "momentum":
            continue
        (o,) = t.origin
        image = in_comb(kap.mapping[kap.target.lifted(o)[1].name])
        pivot = None
        for w in sorted(dependencies(image) & w_vars):
            cw = diff(image, w)
            if cw.is_constant() and not cw.is_zero():
                pivot = (w, cw.constant_value())
                break
        if pivot is None:
            problems.append(f"no w-variable determines {t.name}")
            continue
        solution[t.name] = coeff.get(pivot[0], ZERO) * (Fraction(1) / pivot[1])

    # consistency: reconstruct the pairing
    recon = ZERO
    for t in target.coords:
        if t.role == "momentum" and t.name in solution:
            (o,) = t.origin
            recon = recon + solution[t.name] * in_comb(kap.mapping[kap.target.lifted(o)[1].name])
    if recon != pairing:
        problems.append("duality equation is not solved consistently")

    # rename combined-chart coordinates into the source chart
    ren = _origin_renaming(lifted, source)
    table = {}
    for k, v in ren.items():
        if isinstance(v, tuple):
            table[k] = var(v[1]) * v[0]
        elif k != v:
            table[k] = var(v)
    mapping = {}
    for t in target.coords:
        if t.name in source and t.role != "momentum":
            mapping[t.name] = var(t.name)
        elif t.role == "velocity" or (t.name not in source and t.role != "momentum"):
            mapping[t.name] = source.lifted_expr(*t.origin)
        else:
            mapping[t.name] = substitute(solution.get(t.name, ZERO), table)
    for t, e in mapping.items():
        left = dependencies(e) - set(source.names)
        if left:
            problems.append(f"{t} depends on coordinates outside the source chart: {sorted(left)}")
    if problems:
        raise CalculusError("; ".join(problems))
    alpha = CoordMap(source, target, mapping, f"alpha^{n}")
    if return_details:
        return alpha, {"pairing": pairing, "kappa": kap, "combined_chart": lifted}
    return alpha


def beta_n(base: Chart, n: int) -> CoordMap:
    """``beta^n : u -> i_u omega^n``, read in cotangent coordinates."""
    sm = apply_functor(base, _star(n))
    ctx = LiftContext(sm, n)
    omega = exterior_d(canonical_form(sm))
    one_form = iota_n(ctx, omega)
    target = apply_functor(sm, "Tstar")
    mapping = {}
    for t in target.coords:
        if t.name in sm:
            mapping[t.name] = var(t.name)
        else:
            (o,) = t.origin
            mapping[t.name] = one_form[(o,)]
    return CoordMap(ctx.lifted, target, mapping, f"beta^{n}")


# --------------------------------------------------------------------------
# relations


def compose_relation(beta: CoordMap, alpha: CoordMap) -> CoordMap:
    """``beta o alpha^{-1}`` as a map ``alpha.target -> beta.target``.

    The graph of alpha is solved for source coordinates by linear
    elimination; beta must then be independent of the unsolved ones.
    """
    if beta.source != alpha.source:
        raise CalculusError("alpha and beta need a common source")
    src = set(alpha.source.names)
    tag = "_A_"
    subs: dict = {}
    for t, e in alpha.mapping.items():
        expr = substitute(e, subs) if subs else e
        pivot = None
        for s in sorted(dependencies(expr) & src - set(subs)):
            c = diff(expr, s)
            if c.is_constant() and not c.is_zero():
                pivot = (s, c.constant_value())
                break
        if pivot is None:
            if dependencies(expr) & src - set(subs):
                raise CalculusError(f"cannot eliminate along {t}")
            continue
        s, c = pivot
        rest = expr - var(s) * c
        value = (var(tag + t) - rest) * (Fraction(1) / c)
        subs = {k: substitute(v, {s: value}) for k, v in subs.items()}
        subs[s] = value
    free = src - set(subs)
    back = {tag + t: var(t) for t in alpha.target.names}
    mapping = {}
    for t, e in beta.mapping.items():
        img = substitute(e, subs)
        if dependencies(img) & free:
            raise CalculusError(f"beta o alpha^-1 is not single-valued in {t}")
        mapping[t] = substitute(img, back)
    return CoordMap(alpha.target, beta.target, mapping, f"{beta.name} o {alpha.name}^-1")


def _rank(rows) -> int:
    m = [list(r) for r in rows]
    rank = 0
    ncols = len(m[0]) if m else 0
    for col in range(ncols):
        piv = next((r for r in range(rank, len(m)) if m[r][col] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        for r in range(len(m)):
            if r != rank and m[r][col] != 0:
                f = m[r][col] / m[rank][col]
                m[r] = [x - f * y for x, y in zip(m[r], m[rank])]
        rank += 1
    return rank


def level_sets_coincide(a: CoordMap, b: CoordMap, points: int = 3, seed: int = 0) -> bool:
    """Compare the fibres of two maps on a common source by exact Jacobian
    ranks at random rational points."""
    if a.source != b.source:
        raise CalculusError("maps need a common source")
    names = a.source.names
    ja, jb = a.jacobian(), b.jacobian()
    rng = random.Random(seed)
    for _ in range(points):
        pt = {n: Fraction(rng.randint(-9, 9), rng.randint(1, 5)) for n in names}

        def rows(j, m):
            return [[Fraction(evaluate(j[(t, s)], pt)) if (t, s) in j else Fraction(0) for s in names]
                    for t in m.target.names]

        ra, rb = rows(ja, a), rows(jb, b)
        r1, r2, r12 = _rank(ra), _rank(rb), _rank(ra + rb)
        if not (r1 == r2 == r12):
            return False
    return True


# --------------------------------------------------------------------------
# theorem checks


@dataclass
class TheoremReport:
    n: int
    dim: int
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(ok for ok, _ in self.checks.values())

    def rows(self):
        for name, (ok, diffs) in self.checks.items():
            yield name, ok, diffs

    def __str__(self):
        lines = [f"n={self.n} dim={self.dim}"]
        for name, ok, diffs in self.rows():
            lines.append(f"  {'PASS' if ok else 'FAIL'}  {name}")
            for idx, left, right in diffs[:5]:
                lines.append(f"        {idx}: {left}  !=  {right}")
        return "\n".join(lines)


def _compare(a: Form, b: Form):
    if a == b:
        return True, []
    return False, a.differences(b)


def verify_theorem(base: Chart, n: int, *, alpha=None, beta=None) -> TheoremReport:
    """Check the pullback identities for alpha^n and beta^n."""
    alpha = alpha or alpha_n(base, n)
    beta = beta or beta_n(base, n)
    sm = apply_functor(base, _star(n))
    ctx = LiftContext(sm, n)
    theta_n = canonical_form(sm)
    omega_n = exterior_d(theta_n)
    dT_omega = dT_n(ctx, omega_n)

    theta_a = canonical_form(alpha.target)
    theta_b = canonical_form(beta.target)
    rep = TheoremReport(n, base.base_dim)
    rep.checks["alpha* omega = dT omega^n"] = _compare(pullback(alpha, exterior_d(theta_a)), dT_omega)
    rep.checks["beta* omega = dT omega^n"] = _compare(pullback(beta, exterior_d(theta_b)), dT_omega)
    sign = 1 if n % 2 == 1 else -1
    lhs = pullback(alpha, theta_a)
    rhs = dT_n(ctx, theta_n)
    rep.checks["alpha* theta = (-1)^(n+1) dT theta^n"] = _compare(lhs, rhs if sign == 1 else -rhs)
    rep.checks["beta* theta = iota omega^n"] = _compare(pullback(beta, theta_b), iota_n(ctx, omega_n))
    closed = exterior_d(dT_omega)
    rep.checks["d(dT omega^n) = 0"] = (closed.is_zero(), [])
    return rep


def kernel_witness_kappa(base: Chart, samples: int = 5, seed: int = 0) -> dict:
    """Structural and numeric checks of the kernel of kappa^2."""
    kap = kappa_n(base, 2)
    src = kap.source
    tn = src.parent
    tm_fibre = {c.name for c in tn.coords if c.name not in base}
    z_names = [c.name for c in src.coords if c.origin and all(o in tm_fibre for o in c.origin)
               and c.name not in tn]
    y_coords = [c for c in src.coords if c.name not in tn and len(c.origin) == 2
                and c.origin[0] in base and c.origin[1] in tm_fibre]
    used = set()
    for e in kap.mapping.values():
        used |= dependencies(e)
    report = {"independent_of_z": not (used & set(z_names)), "z_coordinates": z_names}

    vel = [c.name for c in kap.target.coords if c.bidegree == (1, 1)]
    rng = random.Random(seed)
    sym_ok = anti_ok = pert_ok = True
    ykey = {}
    for c in y_coords:
        mu = base.index(c.origin[0])
        nu = base.index(tn[c.origin[1]].origin[0])
        ykey[(mu, nu)] = c.name
    for _ in range(samples):
        pt = {nm: Fraction(rng.randint(-9, 9), rng.randint(1, 4)) for nm in src.names}
        sym = dict(pt)
        anti = dict(pt)
        for (mu, nu), name in ykey.items():
            if mu < nu:
                sym[ykey[(nu, mu)]] = sym[name]
                anti[ykey[(nu, mu)]] = -anti[name]
            elif mu == nu:
                anti[name] = Fraction(0)
        for t in vel:
            if evaluate(kap.mapping[t], sym) != 0:
                sym_ok = False
            I = kap.target[t].origin
            (o,) = I
            mu, nu = (base.index(x) for x in kap.target.parent[o].origin)
            if evaluate(kap.mapping[t], anti) != 2 * anti[ykey[(mu, nu)]]:
                anti_ok = False
        moved = dict(pt)
        for z in z_names:
            moved[z] = pt[z] + rng.randint(1, 5)
        for t, e in kap.mapping.items():
            if evaluate(e, moved) != evaluate(e, pt):
                pert_ok = False
    report["symmetric_to_zero"] = sym_ok
    report["antisymmetric_doubled"] = anti_ok
    report["z_perturbation_invariant"] = pert_ok
    report["passed"] = all(report[k] for k in ("independent_of_z", "symmetric_to_zero",
                                                "antisymmetric_doubled", "z_perturbation_invariant"))
    return report


def _term_bidegrees(e: Expr, chart: Chart) -> set:
    out = set()
    for mono in e.terms:
        d = [0, 0]
        for atom, k in mono:
            c = chart[atom.name]
            d[0] += c.bidegree[0] * k
            d[1] += c.bidegree[1] * k
        out.add(tuple(d))
    return out


def bidegree_preserved(kap: CoordMap) -> tuple[bool, list]:
    """Every target coordinate of bi-degree (a, b) is sent to an expression
    of source bi-degree (b, a): kappa exchanges the two gradings."""
    bad = []
    for t, e in kap.mapping.items():
        a, b = kap.target[t].bidegree
        degs = _term_bidegrees(e, kap.source)
        if degs and degs != {(b, a)}:
            bad.append((t, (a, b), sorted(degs)))
    return not bad, bad


def respects_fibrations(kap: CoordMap) -> bool:
    """Projecting the image of kappa^n to WedgeT(n) N gives WedgeT(n) of the
    tangent projection, i.e. the block of pure base directions."""
    wn = kap.target.parent
    src = kap.source
    for c in wn.coords:
        if c.name in wn.parent:
            if kap.mapping[c.name] != var(c.name):
                return False
        elif kap.mapping[c.name] != src.lifted_expr(*c.origin):
            return False
    return True


def tangent_lift_field(Y: PolyField, n: int = 2) -> PolyField:
    """``d_T^n Y = kappa^n o WedgeT(n)(Y)`` as a vector field on WedgeT(n) N."""
    if Y.degree != 1:
        raise CalculusError("tangent lift needs a vector field")
    base = Y.chart
    kap = kappa_n(base, n)
    tn = kap.source.parent
    ctx = LiftContext(base, n)
    section = CoordMap(base, tn, {**{c: var(c) for c in base.names},
                                  **{tn.lifted(c)[1].name: Y[c] for c in base.names}})
    pushed = pushforward_field(section, ctx.tautological())
    # image point of WedgeT(n)Y in the chart of WedgeT(n) TN
    point = {c: var(c) for c in base.names}
    for c in base.names:
        point[tn.lifted(c)[1].name] = Y[c]
    for c in kap.source.coords:
        if c.name in tn:
            continue
        point[c.name] = pushed[c.origin]
    wn = ctx.lifted
    coeffs = {}
    for t in kap.target.coords:
        if t.name in wn:
            continue
        (o,) = t.origin
        coeffs[(o,)] = substitute(kap.mapping[t.name], point)
    return PolyField(wn, 1, coeffs)
