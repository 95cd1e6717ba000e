"""Second-order finite differences for ``a u'' + b u' - c u = -f`` on an interval.

Used as an independent reference for the Monte Carlo solver in one dimension.
The tridiagonal system is solved by the Thomas algorithm so that a vanishing
pivot can be reported with its row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .expr import Expression, evaluate_many, parse
from .sde import DiffusionModel

__all__ = [
    "Grid1D",
    "OracleError",
    "SingularSystemError",
    "DegenerateDiffusionError",
    "thomas",
    "solve_bvp",
    "ConvergenceReport",
    "convergence_order",
    "PointComparison",
    "compare_mc",
]


class OracleError(ValueError):
    pass


class SingularSystemError(OracleError):
    def __init__(self, row: int, pivot: float):
        super().__init__(f"tridiagonal system is singular: pivot {pivot:.3g} in row {row}")
        self.row = row
        self.pivot = pivot


class DegenerateDiffusionError(OracleError):
    def __init__(self, node: int, x: float, a: float):
        super().__init__(f"diffusion coefficient a={a:.3g} is not positive at node {node} (x={x:.6g})")
        self.node = node
        self.x = x


@dataclass
class Grid1D:
    xl: float
    xr: float
    n: int
    values: np.ndarray

    def __post_init__(self):
        if self.n < 2:
            raise OracleError("need n >= 2")
        if not self.xr > self.xl:
            raise OracleError("interval must have xr > xl")

    @property
    def h(self) -> float:
        return (self.xr - self.xl) / self.n

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.xl, self.xr, self.n + 1)

    def at(self, points) -> np.ndarray:
        """Piecewise-linear interpolation of the nodal values."""
        return np.interp(np.asarray(points, dtype=float), self.x, self.values)

    def rows(self):
        for xi, ui in zip(self.x, self.values):
            yield float(xi), float(ui)


def thomas(lower, diag, upper, rhs) -> np.ndarray:
    """Solve a tridiagonal system; ``lower[0]`` and ``upper[-1]`` are ignored."""
    n = len(diag)
    cp = np.empty(n)
    dp = np.empty(n)
    piv = diag[0]
    if piv == 0:
        raise SingularSystemError(0, piv)
    cp[0] = upper[0] / piv
    dp[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - lower[i] * cp[i - 1]
        if piv == 0 or not math.isfinite(piv):
            raise SingularSystemError(i, piv)
        cp[i] = upper[i] / piv if i < n - 1 else 0.0
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / piv
    u = np.empty(n)
    u[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        u[i] = dp[i] - cp[i] * u[i + 1]
    return u


def _coefficients(model, c, f, x):
    if model.dimension != 1:
        raise OracleError("the finite-difference oracle is one-dimensional")
    pts = x[:, None]
    s = model.sigma_many(pts)[:, 0, :]
    a = 0.5 * np.sum(s * s, axis=1)
    b = evaluate_many(model.drift[0], pts)
    return a, b, evaluate_many(c, pts), evaluate_many(f, pts)


def _expr(e):
    return e if isinstance(e, Expression) else parse(str(e), 1)


def solve_bvp(
    model: DiffusionModel,
    c,
    f,
    interval,
    n: int,
    u_left: float,
    u_right: float,
) -> Grid1D:
    """Central differences on ``n`` cells with Dirichlet data at both ends."""
    xl, xr = map(float, interval)
    grid = Grid1D(xl, xr, n, np.empty(0))
    x, h = grid.x, grid.h
    a, b, cv, fv = _coefficients(model, _expr(c), _expr(f), x)
    bad = np.flatnonzero(a[1:-1] <= 0)
    if bad.size:
        i = int(bad[0]) + 1
        raise DegenerateDiffusionError(i, float(x[i]), float(a[i]))
    lower = a / h**2 - b / (2 * h)
    diag = -2 * a / h**2 - cv
    upper = a / h**2 + b / (2 * h)
    rhs = -fv
    lower[0], diag[0], upper[0], rhs[0] = 0.0, 1.0, 0.0, float(u_left)
    lower[-1], diag[-1], upper[-1], rhs[-1] = 0.0, 1.0, 0.0, float(u_right)
    grid.values = thomas(lower, diag, upper, rhs)
    return grid


@dataclass
class ConvergenceReport:
    ns: list
    errors: list
    orders: list
    order: float
    exact_class: bool
    flags: list = field(default_factory=list)

    def to_dict(self):
        return dict(self.__dict__)


def convergence_order(model, c, f, interval, exact, n_sequence, *, exact_floor: float = 1e-11) -> ConvergenceReport:
    """Observed order ``log2(e_n / e_2n)`` against a manufactured solution.

    ``exact`` maps node arrays to the true solution; its end values are the
    Dirichlet data.  The reported order is the one from the finest pair.  When
    every error sits below ``exact_floor`` the scheme is exact on the solution
    class and orders are undefined.
    """
    ns = [int(n) for n in n_sequence]
    if len(ns) < 2:
        raise OracleError("need at least two refinement levels")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise OracleError("n_sequence must increase")
    xl, xr = map(float, interval)
    ul, ur = (float(v) for v in exact(np.array([xl, xr])))
    errors = []
    for n in ns:
        g = solve_bvp(model, c, f, interval, n, ul, ur)
        errors.append(float(np.max(np.abs(g.values - exact(g.x)))))
    flags = []
    if max(errors) < exact_floor:
        return ConvergenceReport(ns, errors, [], math.nan, True, ["errors at rounding level: scheme exact here"])
    orders = [math.log(e1 / e2) / math.log(n2 / n1) for (n1, e1), (n2, e2) in zip(zip(ns, errors), zip(ns[1:], errors[1:]))]
    if any(e2 > e1 for e1, e2 in zip(errors, errors[1:])):
        flags.append("error increased under refinement")
    return ConvergenceReport(ns, errors, orders, orders[-1], False, flags)


@dataclass
class PointComparison:
    x: float
    u_fd: float
    u_mc: float
    mc_stderr: float
    discrepancy: float
    budget: float
    mesh_term: float
    tail_term: float
    boundary_term: float
    passed: bool

    def to_dict(self):
        return dict(self.__dict__)


def compare_mc(problem, points, estimates, interval, n: int, left, right, *, wider=None) -> dict:
    """Per-point check of Monte Carlo values against the finite-difference solve.

    ``left`` and ``right`` are Monte Carlo estimates at the interval ends used
    as Dirichlet data.  The budget at each point is
    ``3 se_MC + mesh term + tail_bound + boundary term`` where the mesh term is
    ``|u_n - u_{n/2}|`` plus the interpolation allowance, and the boundary term
    propagates ``3 se + tail_bound`` of each end value through the (linear)
    boundary influence.  ``wider`` optionally gives ``(interval, left, right)``
    for a truncation-radius sensitivity report.
    """
    model, c, f = problem.model, problem.c, problem.f
    xs = np.array([float(np.ravel(p)[0]) for p in points])
    xl, xr = map(float, interval)
    if np.any(xs <= xl) or np.any(xs >= xr):
        raise OracleError("comparison points must be interior")
    fine = solve_bvp(model, c, f, interval, n, left.value, right.value)
    coarse = solve_bvp(model, c, f, interval, n // 2, left.value, right.value)
    zero = parse("0", 1)
    phi_l = solve_bvp(model, c, zero, interval, n, 1.0, 0.0).at(xs)
    phi_r = solve_bvp(model, c, zero, interval, n, 0.0, 1.0).at(xs)
    second = np.abs(np.diff(fine.values, 2)).max() if n >= 2 else 0.0  # ~ h^2 |u''|
    interp = second / 8
    u_fd = fine.at(xs)
    mesh = np.abs(u_fd - coarse.at(xs)) + interp
    bl = 3 * left.stderr + left.tail_bound
    br = 3 * right.stderr + right.tail_bound
    bterm = np.abs(phi_l) * bl + np.abs(phi_r) * br
    rows = []
    for k, e in enumerate(estimates):
        disc = abs(u_fd[k] - e.value)
        budget = 3 * e.stderr + mesh[k] + e.tail_bound + bterm[k]
        rows.append(PointComparison(float(xs[k]), float(u_fd[k]), e.value, e.stderr, float(disc), float(budget),
                                    float(mesh[k]), e.tail_bound, float(bterm[k]), bool(disc <= budget)))
    report = {
        "interval": [xl, xr],
        "n": n,
        "h": fine.h,
        "points": [r.to_dict() for r in rows],
        "passed": all(r.passed for r in rows),
        "boundary": {"left": [left.value, left.stderr], "right": [right.value, right.stderr]},
    }
    if wider is not None:
        w_interval, w_left, w_right = wider
        wide = solve_bvp(model, c, f, w_interval, int(round(n * (w_interval[1] - w_interval[0]) / (xr - xl))),
                         w_left.value, w_right.value)
        report["radius_sensitivity"] = {
            "interval": list(map(float, w_interval)),
            "max_abs_change": float(np.max(np.abs(wide.at(xs) - u_fd))),
        }
    report["grid"] = fine
    return report
