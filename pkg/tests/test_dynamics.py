import json
from itertools import combinations

import numpy as np
import pytest

from tulczyjew.charts import base_chart
from tulczyjew.dynamics import (
    DynamicsError,
    Hamiltonian,
    Lagrangian,
    MorseFamily,
    PhaseDynamics,
    SurfaceSystem,
    euler_lagrange_residual,
    graph_substitution,
    hamilton_phase,
    hamilton_surface_equations,
    is_decomposable,
    lagrange_phase,
    legendre_hamiltonian,
    legendre_map,
    minimal_surface_residual,
    morse_family_phase,
    plucker_relations,
)
from tulczyjew.expr import ZERO, Func, const, lambdify, parse, substitute, var

M3 = base_chart(3)
VEL3 = ["xd^12", "xd^13", "xd^23"]
MOM3 = ["p_12", "p_13", "p_23"]


def test_quadratic_lagrangian_phase():
    phase = lagrange_phase(Lagrangian.quadratic(M3))
    for v, p in zip(VEL3, MOM3):
        assert phase[f"momentum_{p[2:]}"] == var(p) + var(v)
    assert phase["trace_1"] == parse("-y_12^2 - y_13^3")
    assert phase.uses_top_block() == []


def test_zero_lagrangian():
    phase = lagrange_phase(Lagrangian(M3, ZERO))
    for p in MOM3:
        assert phase[f"momentum_{p[2:]}"] == var(p)


def test_lagrangian_rejects_foreign_variables():
    with pytest.raises(DynamicsError):
        Lagrangian(M3, parse("q * xd^12"))


def test_legendre_maps():
    quad = legendre_map(Lagrangian.quadratic(M3))
    for v, p in zip(VEL3, MOM3):
        assert quad[p] == -var(v)
    ng = legendre_map(Lagrangian.nambu_goto(M3))
    rho = parse("sqrt(2*xd^12^2 + 2*xd^13^2 + 2*xd^23^2)")
    for v, p in zip(VEL3, MOM3):
        assert ng[p] == -var(v) / rho


def test_nambu_goto_legendre_image_is_unit_sphere():
    ng = legendre_map(Lagrangian.nambu_goto(M3))
    f = lambdify([ng[p] for p in MOM3], VEL3)
    rng = np.random.default_rng(0)
    w = rng.normal(size=(3, 100))
    p = np.array(f(*w))
    # (p|p) over all index pairs is twice the sum over stored pairs
    assert np.max(np.abs(2 * np.sum(p**2, axis=0) - 1)) <= 1e-12


def test_legendre_solves_momentum_equations():
    for L in (Lagrangian.nambu_goto(M3), Lagrangian.quadratic(M3, "minkowski")):
        leg = legendre_map(L)
        phase = lagrange_phase(L)
        for p in MOM3:
            assert substitute(phase[f"momentum_{p[2:]}"], {p: leg[p]}).is_zero()


def test_flipped_contraction_convention():
    """The opposite convention negates the momenta but not the surface
    equations: rebuilding the EL operator from either set of momenta gives
    the emitted residual."""
    L = Lagrangian.quadratic(M3, [["1 + x1^2", 0, 0], [0, 1, "x3/3"], [0, "x3/3", 2]])
    system = euler_lagrange_residual(L)
    plus, minus = legendre_map(L), legendre_map(L, contraction_sign=-1)
    for p in MOM3:
        assert plus[p] == -minus[p]

    coeffs = np.array([[0.3, -0.2, 0.1], [0.1, 0.4, -0.3], [-0.2, 0.1, 0.5]])

    def surface(t, s):
        return [t + coeffs[0] @ [t * s, np.sin(t), np.cos(s)],
                s + coeffs[1] @ [t * t, np.sin(s), t * s],
                coeffs[2] @ [np.cos(t + s), t * s * s, s]]

    t0, s0, h = 0.3, -0.2, 1e-4
    leaves = M3.names + VEL3
    mom = {c: lambdify([leg[p] for p in MOM3], leaves) for c, leg in ((1, plus), (-1, minus))}
    dLdx = [lambdify(L.expr.diff(n), leaves) for n in M3.names]

    def state(t, s):
        x = surface(t, s)
        xt = (np.array(surface(t + h, s)) - np.array(surface(t - h, s))) / (2 * h)
        xs = (np.array(surface(t, s + h)) - np.array(surface(t, s - h))) / (2 * h)
        w = [xt[a] * xs[b] - xs[a] * xt[b] for a, b in combinations(range(3), 2)]
        return list(x) + w, xt, xs

    def P(c, t, s):
        vals, _, _ = state(t, s)
        stored = mom[c](*vals)
        out = np.zeros((3, 3))
        for k, (a, b) in enumerate(combinations(range(3), 2)):
            out[a, b], out[b, a] = stored[k], -stored[k]
        return out

    vals, xt, xs = state(t0, s0)
    jets = _jets(surface, t0, s0)
    for c in (1, -1):
        Pt = (P(c, t0 + h, s0) - P(c, t0 - h, s0)) / (2 * h)
        Ps = (P(c, t0, s0 + h) - P(c, t0, s0 - h)) / (2 * h)
        for sig in range(3):
            # pi_c is half the stored-coordinate derivative, times -c
            rebuilt = dLdx[sig](*vals) + 2 * c * (xt @ Ps[:, sig] - xs @ Pt[:, sig])
            emitted = system.residuals[f"EL_{sig + 1}"].evaluate(jets)
            assert rebuilt == pytest.approx(float(emitted), abs=1e-5)


def _jets(surface, t, s, h=1e-3):
    """First and second derivatives of each component by 5-point stencils."""
    def d(fn, dt, ds):
        return np.array(fn(t + dt, s + ds))

    f0 = d(surface, 0, 0)
    ft = (-d(surface, 2 * h, 0) + 8 * d(surface, h, 0) - 8 * d(surface, -h, 0) + d(surface, -2 * h, 0)) / (12 * h)
    fs = (-d(surface, 0, 2 * h) + 8 * d(surface, 0, h) - 8 * d(surface, 0, -h) + d(surface, 0, -2 * h)) / (12 * h)
    ftt = (-d(surface, 2 * h, 0) + 16 * d(surface, h, 0) - 30 * f0 + 16 * d(surface, -h, 0)
           - d(surface, -2 * h, 0)) / (12 * h * h)
    fss = (-d(surface, 0, 2 * h) + 16 * d(surface, 0, h) - 30 * f0 + 16 * d(surface, 0, -h)
           - d(surface, 0, -2 * h)) / (12 * h * h)
    fts = (d(surface, h, h) - d(surface, h, -h) - d(surface, -h, h) + d(surface, -h, -h)) / (4 * h * h)
    out = {}
    for k, n in enumerate(M3.names):
        for derivs, val in (((), f0), (("t",), ft), (("s",), fs), (("t", "t"), ftt),
                            (("s", "s"), fss), (("s", "t"), fts)):
            out[Func(n, ("t", "s"), derivs)] = float(val[k])
        out[n] = float(f0[k])
    return out


def _random_quadratic(rng):
    A = rng.normal(size=(3, 3))
    A = A @ A.T + 3 * np.eye(3)
    L = ZERO
    for i in range(3):
        for j in range(3):
            c = const(round(float(A[i, j]) * 4) / 4) if i <= j else ZERO
            L = L + c * var(VEL3[i]) * var(VEL3[j])
    # position dependence so that dL/dx contributes
    L = L + parse("x1*x2*xd^12 + x3^2*xd^23/2")
    return L


def _discrete_gradient(Lexpr, X, h, node):
    """Exact gradient of the discrete action at ``node`` by complex step."""
    fn = lambdify(Lexpr, M3.names + VEL3)

    def action(Z):
        xt = (Z[:, 2:, 1:-1] - Z[:, :-2, 1:-1]) / (2 * h)
        xs = (Z[:, 1:-1, 2:] - Z[:, 1:-1, :-2]) / (2 * h)
        w = [xt[a] * xs[b] - xs[a] * xt[b] for a, b in combinations(range(3), 2)]
        return np.sum(fn(*Z[:, 1:-1, 1:-1], *w)) * h * h

    grad = np.zeros(3)
    eps = 1e-30
    for sig in range(3):
        Z = X.astype(complex)
        Z[(sig,) + node] += 1j * eps
        grad[sig] = action(Z).imag / eps
    return grad / (h * h)


@pytest.mark.parametrize("seed", [0, 1])
def test_euler_lagrange_against_discrete_action(seed):
    rng = np.random.default_rng(seed)
    L = Lagrangian(M3, _random_quadratic(rng))
    system = euler_lagrange_residual(L)
    c = rng.uniform(-0.3, 0.3, size=(3, 3))

    def surface(t, s):
        return [t + c[0, 0] * t * s + c[0, 1] * np.sin(s),
                s + c[1, 0] * t * t + c[1, 1] * np.cos(t),
                c[2, 0] * t + c[2, 1] * s * s + c[2, 2] * np.sin(t * s)]

    t0 = s0 = 0.25
    jets = _jets(surface, t0, s0)
    emitted = np.array([float(system.residuals[f"EL_{k}"].evaluate(jets)) for k in (1, 2, 3)])
    errors = []
    for N in (16, 32):
        h = 0.5 / N
        grid = (np.arange(-N, N + 1)) * h
        T, S = np.meshgrid(t0 + grid, s0 + grid, indexing="ij")
        X = np.array(surface(T, S))
        grad = _discrete_gradient(L.expr, X, h, (N, N))
        errors.append(np.max(np.abs(grad - emitted)))
    assert errors[1] < errors[0] / 3
    assert errors[1] < 1e-2 * (1 + np.max(np.abs(emitted)))


def test_euler_lagrange_without_position_dependence():
    system = euler_lagrange_residual(Lagrangian.quadratic(M3))
    for sig in range(3):
        # every term carries a second derivative of the surface
        for mono, _ in system.residuals[f"EL_{sig + 1}"].terms.items():
            assert any(len(a.derivs) == 2 for a, _ in mono)


def test_hamilton_phase_examples():
    phase = hamilton_phase(Hamiltonian.quadratic(M3))
    for v, p in zip(VEL3, MOM3):
        assert phase[f"velocity_{p[2:]}"] == var(v) - var(p)
    const_phase = hamilton_phase(Hamiltonian(M3, const(7)))
    for v in VEL3:
        assert const_phase[f"velocity_{v[3:]}"] == var(v)
    with pytest.raises(DynamicsError):
        hamilton_phase(MorseFamily.nambu_goto(M3))


def test_lagrange_and_hamilton_phase_agree_for_hyperregular_lagrangian():
    L = Lagrangian.quadratic(M3, [["1 + x1^2", 0, 0], [0, 1, "x3/3"], [0, "x3/3", 2]])
    H = legendre_hamiltonian(L)
    DL, DH = lagrange_phase(L), hamilton_phase(H)
    leg = legendre_map(L)
    chart = DL.chart
    ys = [c.name for c in chart.coords if c.family == "y"]
    traces = lambdify([DL[f"trace_{r}"] for r in (1, 2, 3)], chart.names)
    rng = np.random.default_rng(3)
    for _ in range(200):
        point = {n: 0.0 for n in chart.names}
        point.update(zip(M3.names, rng.uniform(-1, 1, 3)))
        point.update(zip(VEL3, rng.normal(size=3)))
        point.update({p: float(leg[p].evaluate(point)) for p in MOM3})
        # solve the trace equations for a y-block, least-norm
        base = np.array(traces(*[point[n] for n in chart.names]))
        A = np.zeros((3, len(ys)))
        for k, y in enumerate(ys):
            bumped = dict(point)
            bumped[y] = 1.0
            A[:, k] = np.array(traces(*[bumped[n] for n in chart.names])) - base
        for y, v in zip(ys, np.linalg.lstsq(A, -base, rcond=None)[0]):
            point[y] = float(v)
        assert DL.max_abs(point) <= 1e-10
        assert DH.max_abs(point) <= 1e-10


def test_legendre_hamiltonian_needs_quadratic():
    with pytest.raises(DynamicsError):
        legendre_hamiltonian(Lagrangian.nambu_goto(M3))


def test_morse_family_linear_constraint():
    F = MorseFamily(M3, parse("r*(p_12 - 3)"), ("r",))
    phase = morse_family_phase(F)
    assert phase["stationary_r"] == parse("p_12 - 3")
    assert phase["velocity_12"] == parse("xd^12 - r/2")
    assert phase["velocity_13"] == var("xd^13")


def test_morse_family_needs_parameter_dependence():
    with pytest.raises(DynamicsError, match="stationarity eliminates nothing"):
        morse_family_phase(MorseFamily(M3, parse("p_12^2"), ("r",)))


def test_phase_json_round_trip():
    for phase in (lagrange_phase(Lagrangian.nambu_goto(M3)), morse_family_phase(MorseFamily.nambu_goto(M3))):
        doc = json.loads(json.dumps(phase.to_dict()))
        again = PhaseDynamics.from_dict(doc)
        assert again.residuals == phase.residuals
        assert again.params == phase.params


def test_surface_json_round_trip():
    for system in (euler_lagrange_residual(Lagrangian.nambu_goto(M3)),
                   hamilton_surface_equations(Hamiltonian.quadratic(M3))):
        again = SurfaceSystem.from_dict(json.loads(json.dumps(system.to_dict())))
        assert again.residuals == system.residuals
        assert again.kind == system.kind


def test_graph_substitution_of_nambu_goto():
    graph = graph_substitution(euler_lagrange_residual(Lagrangian.nambu_goto(M3)))
    jets = ["z_x", "z_y", "z_xx", "z_xy", "z_yy"]
    e3 = lambdify(graph["EL_3"], jets)
    rng = np.random.default_rng(11)
    zx, zy, zxx, zxy, zyy = rng.uniform(-2, 2, size=(5, 50))
    rho = np.sqrt(1 + zx**2 + zy**2)
    np.testing.assert_allclose(e3(zx, zy, zxx, zxy, zyy) * rho**3,
                               -np.sqrt(2) * minimal_surface_residual(zx, zy, zxx, zxy, zyy),
                               rtol=1e-10, atol=1e-10)


def test_plucker_and_decomposability():
    M4 = base_chart(4)
    (rel,) = plucker_relations(M4)
    assert rel == parse("xd^12*xd^34 - xd^13*xd^24 + xd^14*xd^23")
    u, v = np.array([1.0, 2.0, 0.5, -1.0]), np.array([0.0, 1.0, 3.0, 2.0])
    point = {f"xd^{a + 1}{b + 1}": u[a] * v[b] - u[b] * v[a] for a, b in combinations(range(4), 2)}
    assert is_decomposable(M4, point)
    point["xd^12"] += 1.0
    assert not is_decomposable(M4, point)
    assert plucker_relations(M3) == []


def test_text_and_latex_emitters():
    phase = lagrange_phase(Lagrangian.nambu_goto(M3))
    assert len(phase.text_lines()) == 6
    assert any("\\dot{x}" in line for line in phase.latex_lines())
