"""Damped Newton solver for minimal graphs ``z(x, y)`` over a rectangle.

The expanded minimal-surface operator

    (1 + z_x^2) z_yy - 2 z_x z_y z_xy + (1 + z_y^2) z_xx

is discretised with second-order central differences on a uniform grid and
the Dirichlet problem is solved by Newton's method with an exact sparse
Jacobian of the 9-point stencil.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import spsolve
from sklearn.base import BaseEstimator

__all__ = [
    "SolverGrid",
    "SolveReport",
    "PlateauError",
    "residual",
    "jacobian",
    "solve",
    "coons_patch",
    "cross_check_with_symbolic",
    "CrossCheckReport",
    "scherk",
    "convergence_study",
    "PlateauSolver",
    "boundary_function",
    "read_boundary_csv",
    "write_csv",
    "write_gnuplot",
]


class PlateauError(RuntimeError):
    pass


def scherk(x, y):
    """Scherk's minimal graph ``log(cos x / cos y)``."""
    return np.log(np.cos(x) / np.cos(y))


@dataclass
class SolverGrid:
    """Uniform grid on ``[x0, x1] x [y0, y1]``; ``z[i, j]`` sits at ``(x_i, y_j)``."""

    domain: tuple
    z: np.ndarray

    def __post_init__(self):
        self.domain = tuple(float(v) for v in self.domain)
        self.z = np.array(self.z, dtype=float)
        x0, x1, y0, y1 = self.domain
        if not (x1 > x0 and y1 > y0):
            raise ValueError("domain must satisfy x0 < x1 and y0 < y1")
        if self.z.ndim != 2 or min(self.z.shape) < 3:
            raise ValueError("grid needs at least 3 points per direction")
        if not np.all(np.isfinite(self.boundary_values())):
            raise ValueError("boundary values must be finite")

    @property
    def nx(self) -> int:
        return self.z.shape[0]

    @property
    def ny(self) -> int:
        return self.z.shape[1]

    @property
    def hx(self) -> float:
        return (self.domain[1] - self.domain[0]) / (self.nx - 1)

    @property
    def hy(self) -> float:
        return (self.domain[3] - self.domain[2]) / (self.ny - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.domain[0], self.domain[1], self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(self.domain[2], self.domain[3], self.ny)

    def mesh(self):
        return np.meshgrid(self.x, self.y, indexing="ij")

    def boundary_values(self) -> np.ndarray:
        z = self.z
        return np.concatenate([z[0, :], z[-1, :], z[1:-1, 0], z[1:-1, -1]])

    @property
    def interior(self) -> np.ndarray:
        return self.z[1:-1, 1:-1]

    @classmethod
    def from_boundary(cls, domain, shape, boundary, initial="coons") -> "SolverGrid":
        """Sample ``boundary(x, y)`` on the edges and fill the interior."""
        nx, ny = shape
        if nx < 3 or ny < 3:
            raise ValueError("grid needs at least 3 points per direction")
        x = np.linspace(domain[0], domain[1], nx)
        y = np.linspace(domain[2], domain[3], ny)
        X, Y = np.meshgrid(x, y, indexing="ij")
        z = np.zeros((nx, ny))
        z[0, :] = boundary(X[0, :], Y[0, :])
        z[-1, :] = boundary(X[-1, :], Y[-1, :])
        z[:, 0] = boundary(X[:, 0], Y[:, 0])
        z[:, -1] = boundary(X[:, -1], Y[:, -1])
        grid = cls(domain, z)
        if initial == "coons":
            grid.z = coons_patch(grid.z)
        elif callable(initial):
            grid.z[1:-1, 1:-1] = initial(X, Y)[1:-1, 1:-1]
        return grid

    def copy(self) -> "SolverGrid":
        return SolverGrid(self.domain, self.z.copy())


def coons_patch(z: np.ndarray) -> np.ndarray:
    """Bilinearly blended transfinite interpolation of the edge values."""
    z = np.array(z, dtype=float)
    nx, ny = z.shape
    u = np.linspace(0.0, 1.0, nx)[:, None]
    v = np.linspace(0.0, 1.0, ny)[None, :]
    left, right = z[0, :][None, :], z[-1, :][None, :]
    bottom, top = z[:, 0][:, None], z[:, -1][:, None]
    corners = ((1 - u) * (1 - v) * z[0, 0] + u * (1 - v) * z[-1, 0]
               + (1 - u) * v * z[0, -1] + u * v * z[-1, -1])
    patch = (1 - u) * left + u * right + (1 - v) * bottom + v * top - corners
    out = z.copy()
    out[1:-1, 1:-1] = patch[1:-1, 1:-1]
    return out


def _jets(z: np.ndarray, hx: float, hy: float):
    c = z[1:-1, 1:-1]
    e, w = z[2:, 1:-1], z[:-2, 1:-1]
    n, s = z[1:-1, 2:], z[1:-1, :-2]
    zx = (e - w) / (2 * hx)
    zy = (n - s) / (2 * hy)
    zxx = (e - 2 * c + w) / hx**2
    zyy = (n - 2 * c + s) / hy**2
    zxy = (z[2:, 2:] - z[2:, :-2] - z[:-2, 2:] + z[:-2, :-2]) / (4 * hx * hy)
    return zx, zy, zxx, zxy, zyy


def stencil_jets(grid: SolverGrid):
    """Central-difference ``(z_x, z_y, z_xx, z_xy, z_yy)`` at interior nodes."""
    return _jets(grid.z, grid.hx, grid.hy)


def residual(grid: SolverGrid) -> np.ndarray:
    zx, zy, zxx, zxy, zyy = stencil_jets(grid)
    return (1 + zx**2) * zyy - 2 * zx * zy * zxy + (1 + zy**2) * zxx


def jacobian(grid: SolverGrid) -> sp.csr_matrix:
    """Exact derivative of ``residual`` with respect to the interior values."""
    hx, hy = grid.hx, grid.hy
    zx, zy, zxx, zxy, zyy = stencil_jets(grid)
    r_zx = 2 * zx * zyy - 2 * zy * zxy
    r_zy = 2 * zy * zxx - 2 * zx * zxy
    r_zxx = 1 + zy**2
    r_zyy = 1 + zx**2
    r_zxy = -2 * zx * zy
    mi, mj = zx.shape
    idx = np.arange(mi * mj).reshape(mi, mj)
    weights = {
        (0, 0): -2 * r_zxx / hx**2 - 2 * r_zyy / hy**2,
        (1, 0): r_zx / (2 * hx) + r_zxx / hx**2,
        (-1, 0): -r_zx / (2 * hx) + r_zxx / hx**2,
        (0, 1): r_zy / (2 * hy) + r_zyy / hy**2,
        (0, -1): -r_zy / (2 * hy) + r_zyy / hy**2,
        (1, 1): r_zxy / (4 * hx * hy),
        (-1, -1): r_zxy / (4 * hx * hy),
        (1, -1): -r_zxy / (4 * hx * hy),
        (-1, 1): -r_zxy / (4 * hx * hy),
    }
    rows, cols, vals = [], [], []
    I, J = np.meshgrid(np.arange(mi), np.arange(mj), indexing="ij")
    for (di, dj), wgt in weights.items():
        ti, tj = I + di, J + dj
        # neighbours on the boundary are fixed data
        ok = (ti >= 0) & (ti < mi) & (tj >= 0) & (tj < mj)
        rows.append(idx[ok])
        cols.append(idx[ti[ok], tj[ok]])
        vals.append(wgt[ok])
    n = mi * mj
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residual_max: float
    residual_history: list = field(default_factory=list)
    damping_history: list = field(default_factory=list)
    linear_residuals: list = field(default_factory=list)
    wall_time: float = 0.0
    message: str = ""

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def solve(grid: SolverGrid, tol: float = 1e-10, maxiter: int = 50, min_damping: float = 2**-20) -> SolveReport:
    """Damped Newton iteration on the interior values (in place).

    A step is accepted only if it does not increase the residual max-norm;
    otherwise the damping factor is halved.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    start = time.perf_counter()
    r = residual(grid)
    rmax = float(np.max(np.abs(r)))
    history, damping, linres = [rmax], [], []
    it = 0
    msg = "converged"
    while rmax > tol:
        if it >= maxiter:
            msg = f"no convergence after {maxiter} iterations"
            break
        J = jacobian(grid)
        rhs = -r.ravel()
        try:
            step = spsolve(J.tocsc(), rhs)
        except Exception as exc:  # scipy raises several types on singular input
            raise PlateauError(f"Jacobian solve failed: {exc}") from exc
        if not np.all(np.isfinite(step)):
            raise PlateauError("Jacobian solve failed: singular matrix")
        linres.append(float(np.linalg.norm(J @ step - rhs) / max(np.linalg.norm(rhs), 1e-300)))
        step = step.reshape(r.shape)
        lam = 1.0
        base = grid.z[1:-1, 1:-1].copy()
        while True:
            grid.z[1:-1, 1:-1] = base + lam * step
            r_new = residual(grid)
            new = float(np.max(np.abs(r_new)))
            if new <= rmax:
                break
            lam *= 0.5
            if lam < min_damping:
                grid.z[1:-1, 1:-1] = base
                msg = "line search failed"
                break
        it += 1
        if msg == "line search failed":
            damping.append(0.0)
            break
        damping.append(lam)
        r, rmax = r_new, new
        history.append(rmax)
    return SolveReport(rmax <= tol, it, rmax, history, damping, linres, time.perf_counter() - start,
                       msg if rmax > tol else "converged")


# --------------------------------------------------------------------------
# cross-check against the symbolically derived equation


@dataclass
class CrossCheckReport:
    factor: float
    max_rel: float
    nodes: int
    tol: float
    passed: bool


_E3_CACHE: dict = {}


def _symbolic_e3():
    """Graph form of the third Euler-Lagrange residual for Euclidean
    Nambu-Goto in R^3, and the constant relating it to the expanded operator."""
    if "fn" not in _E3_CACHE:
        from .charts import base_chart
        from .dynamics import Lagrangian, euler_lagrange_residual, graph_substitution
        from .expr import lambdify

        system = euler_lagrange_residual(Lagrangian.nambu_goto(base_chart(3), "euclidean"))
        e3 = graph_substitution(system)["EL_3"]
        fn = lambdify(e3, ["z_x", "z_y", "z_xx", "z_xy", "z_yy"])
        # at the jet z_xx = 1 (all else 0) the expanded operator is 1 and rho = 1
        factor = float(fn(np.zeros(1), np.zeros(1), np.ones(1), np.zeros(1), np.zeros(1))[0])
        _E3_CACHE.update(fn=fn, factor=factor)
    return _E3_CACHE["fn"], _E3_CACHE["factor"]


def cross_check_with_symbolic(grid: SolverGrid, rtol: float = 1e-8, margin: int = 1) -> CrossCheckReport:
    """Compare ``rho^3 * E3`` from the symbolic pipeline with the stencil
    residual, node by node, away from the boundary."""
    fn, factor = _symbolic_e3()
    zx, zy, zxx, zxy, zyy = stencil_jets(grid)
    rho = np.sqrt(1 + zx**2 + zy**2)
    sym = fn(zx, zy, zxx, zxy, zyy) * rho**3
    num = factor * residual(grid)
    sl = (slice(margin, -margin or None),) * 2 if margin else (slice(None),) * 2
    sym, num = sym[sl], num[sl]
    # rounding floor: size of the individual terms of the operator
    terms = (1 + zx**2) * np.abs(zyy) + 2 * np.abs(zx * zy * zxy) + (1 + zy**2) * np.abs(zxx)
    scale = np.maximum(np.maximum(np.abs(sym), np.abs(num)), 1e-4 * abs(factor) * terms[sl])
    scale = np.where(scale > 0, scale, 1.0)
    rel = np.abs(sym - num) / scale
    worst = float(np.max(rel)) if rel.size else 0.0
    return CrossCheckReport(factor, worst, int(rel.size), rtol, worst <= rtol)


# --------------------------------------------------------------------------
# benchmarks


def convergence_study(sizes=(17, 33, 65), domain=(-0.4, 0.4, -0.4, 0.4), tol=1e-12, exact=scherk):
    """Max interior error against ``exact`` for a sequence of grids, the
    successive error ratios and the observed orders."""
    errors = []
    reports = []
    for n in sizes:
        g = SolverGrid.from_boundary(domain, (n, n), exact)
        rep = solve(g, tol=tol)
        X, Y = g.mesh()
        errors.append(float(np.max(np.abs(g.z - exact(X, Y)))))
        reports.append(rep)
    ratios = [errors[i] / errors[i + 1] for i in range(len(errors) - 1)]
    orders = [float(np.log2(r)) for r in ratios]
    return {"sizes": list(sizes), "errors": errors, "ratios": ratios, "orders": orders, "reports": reports}


# --------------------------------------------------------------------------
# I/O


def boundary_function(spec):
    """Callable ``f(x, y)`` from a callable or an expression in ``x`` and ``y``."""
    if callable(spec):
        return spec
    from .expr import lambdify, parse

    e = parse(spec) if isinstance(spec, str) else spec
    extra = e.free_names() - {"x", "y"}
    if extra:
        raise ValueError(f"boundary expression may only use x and y, not {sorted(extra)}")
    f = lambdify(e, ["x", "y"])
    return lambda x, y: np.broadcast_to(f(np.asarray(x, float), np.asarray(y, float)), np.shape(x)).astype(float)


def read_boundary_csv(path, domain, shape):
    """Boundary values from a CSV with header ``x,y,z`` covering every edge node."""
    table = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            table[(round(float(row["x"]), 9), round(float(row["y"]), 9))] = float(row["z"])
    x = np.linspace(domain[0], domain[1], shape[0])
    y = np.linspace(domain[2], domain[3], shape[1])

    def f(X, Y):
        out = np.empty(np.shape(X))
        for k, (a, b) in enumerate(zip(np.ravel(X), np.ravel(Y))):
            key = (round(float(a), 9), round(float(b), 9))
            if key not in table:
                raise ValueError(f"boundary CSV has no value at ({a:g}, {b:g})")
            out.flat[k] = table[key]
        return out

    del x, y
    return f


def write_csv(grid: SolverGrid, path):
    X, Y = grid.mesh()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "z"])
        for i in range(grid.nx):
            for j in range(grid.ny):
                w.writerow([repr(float(X[i, j])), repr(float(Y[i, j])), repr(float(grid.z[i, j]))])


def write_gnuplot(csv_path, path, title="minimal surface"):
    with open(path, "w") as fh:
        fh.write(f'set title "{title}"\n')
        fh.write("set datafile separator ','\n")
        fh.write("set xlabel 'x'\nset ylabel 'y'\nset zlabel 'z'\n")
        fh.write("set hidden3d\n")
        fh.write(f"splot '{csv_path}' using 1:2:3 every ::1 with points pt 7 ps 0.3 notitle\n")


# --------------------------------------------------------------------------
# estimator facade


class PlateauSolver(BaseEstimator):
    """Estimator-style wrapper: ``fit`` solves for given boundary data,
    ``predict`` interpolates the surface at ``(x, y)`` points."""

    def __init__(self, domain=(-0.4, 0.4, -0.4, 0.4), grid=(33, 33), tol=1e-10, maxiter=50):
        self.domain = domain
        self.grid = grid
        self.tol = tol
        self.maxiter = maxiter

    def fit(self, boundary, y=None):
        f = boundary_function(boundary)
        self.grid_ = SolverGrid.from_boundary(self.domain, tuple(self.grid), f)
        self.report_ = solve(self.grid_, tol=self.tol, maxiter=self.maxiter)
        self._interp = RegularGridInterpolator((self.grid_.x, self.grid_.y), self.grid_.z, method="cubic")
        return self

    def predict(self, X):
        if not hasattr(self, "grid_"):
            raise AttributeError("PlateauSolver is not fitted yet")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self._interp(X)

    def residual_norm(self) -> float:
        return float(np.max(np.abs(residual(self.grid_))))
