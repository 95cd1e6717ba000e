"""Euler-Maruyama simulation of dX = sigma(X) dB + b(X) dt.

Alongside the state every path carries ``A_t``, the left-endpoint Riemann sum
of a potential ``c`` along the path, and optionally ``I_t``, the discounted
running integral ``sum_n exp(-A_n) f(X_n) dt``.  The single-step functions
(:func:`step`, :func:`simulate_path`, :func:`first_exit`) define the scheme;
:func:`simulate` and :func:`exit_ensemble` run the identical arithmetic through
compiled kernels for large ensembles.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .expr import Expression, evaluate, evaluate_many, parse
from .rng import RandomStream, derive_key

__all__ = [
    "DiffusionModel",
    "PathState",
    "Ensemble",
    "ExitResult",
    "SimulationError",
    "step",
    "simulate_path",
    "first_exit",
    "simulate",
    "exit_ensemble",
    "steps_for",
    "coupled_levels",
    "set_default_workers",
    "ou_model",
]

# paths per work unit; fixed so that chunking never depends on worker count
CHUNK = 2048
_default_workers = int(os.environ.get("FKPOISSON_WORKERS", "1"))


def set_default_workers(k: int) -> None:
    global _default_workers
    if k < 1:
        raise ValueError("workers must be >= 1")
    _default_workers = int(k)


class SimulationError(RuntimeError):
    pass


def _as_expr(e, d):
    return e if isinstance(e, Expression) else parse(str(e), d)


@dataclass(frozen=True)
class DiffusionModel:
    """Drift ``b`` (d expressions) and diffusion factor ``sigma`` (d x m)."""

    drift: tuple
    sigma: tuple

    @classmethod
    def from_strings(cls, drift, sigma, dimension=None):
        d = dimension or len(drift)
        if len(drift) != d:
            raise ValueError(f"drift has {len(drift)} components, expected {d}")
        if len(sigma) != d:
            raise ValueError(f"sigma has {len(sigma)} rows, expected {d}")
        widths = {len(row) for row in sigma}
        if len(widths) != 1 or 0 in widths:
            raise ValueError("sigma rows must be non-empty and of equal length")
        return cls(
            tuple(_as_expr(e, d) for e in drift),
            tuple(tuple(_as_expr(e, d) for e in row) for row in sigma),
        )

    def __post_init__(self):
        d = len(self.drift)
        for e in self.drift + tuple(x for row in self.sigma for x in row):
            if e.dimension != d:
                raise ValueError("all coefficient expressions must share the model dimension")

    @property
    def dimension(self) -> int:
        return len(self.drift)

    @property
    def noise_dimension(self) -> int:
        return len(self.sigma[0])

    def b(self, x) -> np.ndarray:
        return np.array([evaluate(e, x) for e in self.drift])

    def sigma_at(self, x) -> np.ndarray:
        return np.array([[evaluate(e, x) for e in row] for row in self.sigma])

    def a(self, x) -> np.ndarray:
        """Generator coefficient a = sigma sigma^T / 2."""
        s = self.sigma_at(x)
        return 0.5 * s @ s.T

    def drift_many(self, points) -> np.ndarray:
        return np.stack([evaluate_many(e, points) for e in self.drift], axis=-1)

    def sigma_many(self, points) -> np.ndarray:
        return np.stack(
            [np.stack([evaluate_many(e, points) for e in row], axis=-1) for row in self.sigma], axis=-2
        )


def ou_model(sigma: str = "sqrt(2)") -> DiffusionModel:
    """The 1D Ornstein-Uhlenbeck model b = -x used throughout the tests."""
    return DiffusionModel.from_strings(["-x"], [[sigma]])


@dataclass
class PathState:
    t: float
    x: np.ndarray
    A: float = 0.0


def step(model: DiffusionModel, c: Expression | None, state: PathState, dt: float, stream: RandomStream) -> PathState:
    """One Euler-Maruyama step; ``A`` gains ``c(x) dt`` (left endpoint)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.asarray(state.x, dtype=float)
    m = model.noise_dimension
    z = stream.draw(m)
    sqdt = math.sqrt(dt)
    cv = evaluate(c, x) if c is not None else 0.0
    b = [evaluate(e, x) for e in model.drift]
    s = [[evaluate(e, x) for e in row] for row in model.sigma]
    y = np.empty_like(x)
    for i in range(model.dimension):
        noise = s[i][0] * z[0]
        for j in range(1, m):
            noise = noise + s[i][j] * z[j]
        y[i] = x[i] + b[i] * dt + noise * sqdt
    return PathState(state.t + dt, y, state.A + cv * dt)


def steps_for(T: float, dt: float) -> int:
    """Number of grid steps covering [0, T]; T must be a multiple of dt."""
    if T < 0:
        raise ValueError("T must be non-negative")
    n = round(T / dt)
    if abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T={T} is not a multiple of dt={dt}")
    return int(n)


@dataclass
class Ensemble:
    """Ensemble output at the requested checkpoint steps."""

    times: np.ndarray  # (K,)
    X: np.ndarray  # (N, K, d)
    A: np.ndarray  # (N, K)
    I: np.ndarray  # (N, K)
    status: np.ndarray  # (N,) 0 ok, 1 left guard radius, 2 discount overflow
    dt: float
    seed: int
    namespace: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return self.X.shape[0]


def _run_chunks(fn, n, workers):
    bounds = [(lo, min(lo + CHUNK, n)) for lo in range(0, n, CHUNK)]
    workers = workers or _default_workers
    if workers == 1 or len(bounds) == 1:
        for lo, hi in bounds:
            fn(lo, hi)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for fut in [pool.submit(fn, lo, hi) for lo, hi in bounds]:
            fut.result()


def _start_points(x0, n, d):
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim <= 1:
        x0 = x0.reshape(1, -1)
    if x0.shape[1] != d or x0.shape[0] not in (1, n):
        raise ValueError(f"start points of shape {x0.shape} do not fit {n} paths in dimension {d}")
    return np.ascontiguousarray(x0)


def _translate(err):
    from .expr import EvaluationError

    return EvaluationError(str(err))


def simulate(
    model: DiffusionModel,
    x0,
    n_paths: int,
    dt: float,
    *,
    T: float | None = None,
    checkpoints=None,
    c: Expression | None = None,
    f: Expression | None = None,
    seed: int = 0,
    namespace: int = 0,
    antithetic: bool = False,
    guard_radius: float | None = None,
    path_offset: int = 0,
    workers: int | None = None,
) -> Ensemble:
    """Simulate ``n_paths`` paths and record them at checkpoint steps.

    ``checkpoints`` are integer step indices (sorted); by default only the
    final step ``T/dt`` is recorded.  ``x0`` is one point or one per path.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    if checkpoints is None:
        if T is None:
            raise ValueError("give T or checkpoints")
        checkpoints = [steps_for(T, dt)]
    ck = np.asarray(checkpoints, dtype=np.int64)
    if ck.ndim != 1 or ck.size == 0 or np.any(np.diff(ck) < 0) or ck[0] < 0:
        raise ValueError("checkpoints must be a non-empty sorted list of step indices")
    nsteps = int(ck[-1])
    d = model.dimension
    x0s = _start_points(x0, n_paths, d)
    k0, k1 = derive_key(seed, namespace)
    out_x = np.empty((n_paths, ck.size, d))
    out_a = np.empty((n_paths, ck.size))
    out_i = np.empty((n_paths, ck.size))
    status = np.zeros(n_paths, dtype=np.int64)
    guard2 = -1.0 if guard_radius is None else float(guard_radius) ** 2
    kern = _kernels.get_kernels(model, c, f).run_paths

    def work(lo, hi):
        kern(lo, hi, path_offset, x0s, nsteps, dt, ck, k0, k1, antithetic, guard2, out_x, out_a, out_i, status)

    try:
        _run_chunks(work, n_paths, workers)
    except ValueError as err:
        raise _translate(err) from err
    return Ensemble(ck * dt, out_x, out_a, out_i, status, dt, seed, namespace)


def simulate_path(
    model: DiffusionModel,
    c: Expression | None,
    x0,
    T: float,
    dt: float,
    stream: RandomStream,
) -> list:
    """Full path on the grid 0, dt, ..., T as a list of :class:`PathState`."""
    n = steps_for(T, dt)
    if stream.counter != 0:
        raise ValueError("simulate_path expects a fresh stream")
    ens = simulate(
        model, x0, 1, dt, checkpoints=np.arange(n + 1), c=c, seed=stream.seed,
        namespace=stream.namespace, path_offset=stream.path_index, workers=1,
    )
    return [PathState(float(ens.times[k]), ens.X[0, k].copy(), float(ens.A[0, k])) for k in range(n + 1)]


@dataclass
class ExitResult:
    tau: np.ndarray
    x_tau: np.ndarray
    A_tau: np.ndarray
    I_tau: np.ndarray
    exited: np.ndarray
    status: np.ndarray
    dt: float

    @property
    def n_paths(self) -> int:
        return self.tau.shape[0]


def exit_ensemble(
    model: DiffusionModel,
    x0,
    n_paths: int,
    dt: float,
    center,
    radius: float,
    t_max: float,
    *,
    c: Expression | None = None,
    f: Expression | None = None,
    seed: int = 0,
    namespace: int = 0,
    antithetic: bool = False,
    path_offset: int = 0,
    workers: int | None = None,
) -> ExitResult:
    """First grid time with |X - center| >= radius, stopped at ``t_max``."""
    d = model.dimension
    x0s = _start_points(x0, n_paths, d)
    center = np.asarray(center, dtype=float).reshape(d)
    if radius <= 0:
        raise ValueError("radius must be positive")
    if np.any(np.sum((x0s - center) ** 2, axis=1) >= radius**2):
        raise ValueError("start point must lie strictly inside the ball")
    max_steps = int(math.floor(t_max / dt + 1e-9))
    k0, k1 = derive_key(seed, namespace)
    tau = np.empty(n_paths)
    xt = np.empty((n_paths, d))
    at = np.empty(n_paths)
    it = np.empty(n_paths)
    exited = np.zeros(n_paths, dtype=np.bool_)
    status = np.zeros(n_paths, dtype=np.int64)
    kern = _kernels.get_kernels(model, c, f).exit_paths

    def work(lo, hi):
        kern(lo, hi, path_offset, x0s, center, float(radius) ** 2, max_steps, dt, k0, k1, antithetic,
             tau, xt, at, it, exited, status)

    try:
        _run_chunks(work, n_paths, workers)
    except ValueError as err:
        raise _translate(err) from err
    return ExitResult(tau, xt, at, it, exited, status, dt)


def first_exit(model, c, x0, center, radius, dt, stream: RandomStream, t_max):
    """Exit of a single path: ``(tau, x_tau, A_tau, exited)``."""
    res = exit_ensemble(
        model, x0, 1, dt, center, radius, t_max, c=c, seed=stream.seed,
        namespace=stream.namespace, path_offset=stream.path_index, workers=1,
    )
    return float(res.tau[0]), res.x_tau[0].copy(), float(res.A_tau[0]), bool(res.exited[0])


def coupled_levels(
    model: DiffusionModel,
    x0,
    n_paths: int,
    dt: float,
    T: float,
    levels: int,
    *,
    c: Expression | None = None,
    f: Expression | None = None,
    seed: int = 0,
    namespace: int = 0,
    path_offset: int = 0,
    workers: int | None = None,
) -> tuple:
    """Discounted integrals ``I_T`` at steps ``dt, dt/2, ..., dt/2^(levels-1)``.

    All levels of a path share one Brownian path (coarse increments are sums of
    fine ones), so differences between levels carry only discretisation error.
    Returns ``(I, X, status)`` with column ``j`` belonging to step ``dt / 2^j``.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    d = model.dimension
    x0s = _start_points(x0, n_paths, d)
    ratio = 1 << (levels - 1)
    nfine = steps_for(T, dt) * ratio
    k0, k1 = derive_key(seed, namespace)
    out_x = np.empty((n_paths, levels, d))
    out_i = np.empty((n_paths, levels))
    status = np.zeros(n_paths, dtype=np.int64)
    kern = _kernels.get_kernels(model, c, f).coupled_paths

    def work(lo, hi):
        kern(lo, hi, path_offset, x0s, nfine, dt / ratio, levels, k0, k1, out_x, out_i, status)

    try:
        _run_chunks(work, n_paths, workers)
    except ValueError as err:
        raise _translate(err) from err
    return out_i[:, ::-1].copy(), out_x[:, ::-1].copy(), status
