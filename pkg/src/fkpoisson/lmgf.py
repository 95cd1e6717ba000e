"""Finite-horizon log moment generating function of an additive functional.

``H_T(beta, x) = T^-1 ln E_x exp(beta * int_0^T c1(X_s) ds)`` is estimated from
the per-path integrals ``A_T`` by a log-mean-exp with max subtraction, so that
``beta * A_T`` in the hundreds does not overflow.  One ensemble serves every
``beta`` and every ``T`` on the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .expr import Expression
from .rng import namespace_id
from .sde import DiffusionModel, simulate, steps_for

__all__ = [
    "LmgfError",
    "LmgfCurve",
    "SignCheck",
    "log_mean_exp",
    "ht_from_samples",
    "estimate_HT",
    "estimate_curve",
    "derivative_at_zero",
    "derivative_stderr",
    "sign_check",
    "DEFAULT_BETAS",
]

DEFAULT_BETAS = (-0.2, -0.1, -0.05, 0.0, 0.05, 0.1, 0.15)


class LmgfError(ValueError):
    pass


def log_mean_exp(z: np.ndarray) -> float:
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise LmgfError("non-finite exponent among the path weights")
    m = z.max()
    return float(m + math.log(np.exp(z - m).sum()) - math.log(z.size))


def _influence(A: np.ndarray, beta: float, T: float) -> np.ndarray:
    z = beta * A
    w = np.exp(z - z.max())
    return (w / w.mean() - 1.0) / T


def ht_from_samples(A: np.ndarray, beta: float, T: float) -> tuple:
    """``(H_T, stderr)`` from per-path integrals; stderr by the delta method."""
    A = np.asarray(A, dtype=float)
    if T <= 0:
        raise LmgfError("T must be positive")
    if A.size < 2:
        raise LmgfError("need at least two paths")
    if beta == 0:
        return 0.0, 0.0
    value = log_mean_exp(beta * A) / T
    psi = _influence(A, beta, T)
    return value, float(psi.std(ddof=1) / math.sqrt(A.size))


def _simulate_A(model, c1, x, Ts, n_paths, dt, seed, workers):
    ck = np.array([steps_for(T, dt) for T in Ts], dtype=np.int64)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ens = simulate(model, x, n_paths, dt, checkpoints=ck, c=c1, seed=seed, namespace=namespace_id(0x16F), workers=workers)
    return ens.A


def estimate_HT(
    model: DiffusionModel,
    c1: Expression,
    beta: float,
    x,
    T: float,
    n_paths: int,
    dt: float = 1e-3,
    *,
    seed: int = 0,
    workers: int | None = None,
) -> tuple:
    if n_paths < 2:
        raise LmgfError("need at least two paths")
    A = _simulate_A(model, c1, x, [T], n_paths, dt, seed, workers)[:, 0]
    return ht_from_samples(A, beta, T)


@dataclass
class SignCheck:
    ok: bool
    status: str  # certified | violated | inconclusive
    beta_pos: float
    beta_neg: float
    H_pos: float
    H_neg: float
    se_pos: float
    se_neg: float

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class LmgfCurve:
    betas: np.ndarray
    Ts: np.ndarray
    x: np.ndarray
    H_T: np.ndarray  # (len(Ts), len(betas))
    stderr: np.ndarray
    stabilized: bool
    stabilization_gap: float
    convex: bool
    n_paths: int
    dt: float
    A_final: np.ndarray = field(repr=False, default=None)
    derivative: float | None = None
    derivative_se: float | None = None
    sign: SignCheck | None = None

    @property
    def H(self) -> np.ndarray:
        """Limit estimate: the largest-T row."""
        return self.H_T[-1]

    @property
    def H_stderr(self) -> np.ndarray:
        return self.stderr[-1]

    def at(self, beta: float) -> tuple:
        k = _grid_index(self.betas, beta)
        return float(self.H[k]), float(self.H_stderr[k])

    def rows(self):
        for i, T in enumerate(self.Ts):
            for j, b in enumerate(self.betas):
                yield float(b), float(T), float(self.H_T[i, j]), float(self.stderr[i, j])

    def to_dict(self) -> dict:
        return {
            "x": self.x.tolist(),
            "betas": self.betas.tolist(),
            "T_grid": self.Ts.tolist(),
            "H": self.H.tolist(),
            "H_stderr": self.H_stderr.tolist(),
            "stabilized": bool(self.stabilized),
            "stabilization_gap": float(self.stabilization_gap),
            "convex": bool(self.convex),
            "derivative_at_zero": self.derivative,
            "derivative_stderr": self.derivative_se,
            "sign_check": None if self.sign is None else self.sign.to_dict(),
            "n_paths": self.n_paths,
            "dt": self.dt,
        }


def _grid_index(grid, value):
    hits = np.flatnonzero(np.isclose(grid, value, rtol=0, atol=1e-12))
    if hits.size == 0:
        raise LmgfError(f"beta={value} is not on the grid {list(grid)}")
    return int(hits[0])


def _convex_on_grid(betas, H, se) -> bool:
    for k in range(1, len(betas) - 1):
        b1, b2, b3 = betas[k - 1], betas[k], betas[k + 1]
        interp = H[k - 1] + (H[k + 1] - H[k - 1]) * (b2 - b1) / (b3 - b1)
        slack = 3 * math.sqrt(se[k - 1] ** 2 + se[k] ** 2 + se[k + 1] ** 2)
        if H[k] > interp + slack + 1e-12:
            return False
    return True


def estimate_curve(
    model: DiffusionModel,
    c1: Expression,
    betas,
    x,
    Ts,
    n_paths: int,
    dt: float = 1e-3,
    *,
    seed: int = 0,
    tol: float = 0.01,
    workers: int | None = None,
) -> LmgfCurve:
    """``H_T`` on a ``beta x T`` grid from one ensemble.

    The limit is read off the largest ``T``; ``stabilized`` compares it with
    the next largest ``T`` at tolerance ``tol``.
    """
    betas = np.array(sorted(float(b) for b in betas))
    Ts = np.asarray(Ts, dtype=float)
    if Ts.size == 0 or np.any(np.diff(Ts) <= 0) or Ts[0] <= 0:
        raise LmgfError("T grid must be positive and increasing")
    if n_paths < 2:
        raise LmgfError("need at least two paths")
    A = _simulate_A(model, c1, x, Ts, n_paths, dt, seed, workers)
    H = np.empty((Ts.size, betas.size))
    se = np.empty_like(H)
    for i, T in enumerate(Ts):
        for j, b in enumerate(betas):
            H[i, j], se[i, j] = ht_from_samples(A[:, i], b, T)
    gap = float(np.max(np.abs(H[-1] - H[-2]))) if Ts.size >= 2 else math.inf
    convex = all(_convex_on_grid(betas, H[i], se[i]) for i in range(Ts.size))
    curve = LmgfCurve(
        betas, Ts, np.atleast_1d(np.asarray(x, dtype=float)), H, se, gap < tol, gap, convex, n_paths, dt, A[:, -1]
    )
    pos = betas[betas > 0]
    neg = betas[betas < 0]
    if pos.size and neg.size:
        curve.sign = sign_check(curve)
    h = _symmetric_step(betas)
    if h is not None:
        curve.derivative = derivative_at_zero(curve, h)
        curve.derivative_se = derivative_stderr(curve, h)
    return curve


def _symmetric_step(betas):
    for b in sorted(betas[betas > 0]):
        if np.any(np.isclose(betas, -b, rtol=0, atol=1e-12)):
            return float(b)
    return None


def derivative_at_zero(curve: LmgfCurve, h: float = 0.05) -> float:
    """Central difference ``(H(h) - H(-h)) / (2h)`` on the largest-T row."""
    hp, _ = curve.at(h)
    hm, _ = curve.at(-h)
    return (hp - hm) / (2 * h)


def derivative_stderr(curve: LmgfCurve, h: float = 0.05) -> float:
    _grid_index(curve.betas, h)
    _grid_index(curve.betas, -h)
    T = float(curve.Ts[-1])
    psi = (_influence(curve.A_final, h, T) - _influence(curve.A_final, -h, T)) / (2 * h)
    return float(psi.std(ddof=1) / math.sqrt(psi.size))


def sign_check(curve: LmgfCurve) -> SignCheck:
    """Certify ``H > 0`` just right of zero and ``H < 0`` just left of it."""
    pos = curve.betas[curve.betas > 0]
    neg = curve.betas[curve.betas < 0]
    if pos.size == 0 or neg.size == 0:
        raise LmgfError("sign check needs positive and negative beta on the grid")
    bp, bn = float(pos.min()), float(neg.max())
    hp, sp = curve.at(bp)
    hn, sn = curve.at(bn)
    if hp > sp and hn < -sn:
        status = "certified"
    elif hp < -sp or hn > sn:
        status = "violated"
    else:
        status = "inconclusive"
    return SignCheck(status == "certified", status, bp, bn, hp, hn, sp, sn)
