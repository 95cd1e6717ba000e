"""Empirical ergodic diagnostics for a diffusion model.

* :func:`estimate_invariant` builds an empirical invariant measure from one long
  thinned trajectory; :func:`mu_average` integrates against it with batch-means
  standard errors.
* :func:`tv_mixing_decay` compares two ensembles started at different points
  through common-partition histograms and fits an exponential decay rate.
* :func:`exp_moment_curve` tracks ``E_x exp(gamma |X_t|)``.
* :func:`deviation_prob` estimates the probability that the time average of a
  potential falls below (or above) its mean by ``delta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .expr import Expression, evaluate_many, parse
from .rng import namespace_id
from .sde import DiffusionModel, SimulationError, simulate, steps_for

__all__ = [
    "EmpiricalMeasure",
    "DecayFit",
    "ExpMomentCurve",
    "estimate_invariant",
    "mu_average",
    "fit_exponential_decay",
    "histogram_tv",
    "tv_mixing_decay",
    "tv_to_invariant",
    "exp_moment_curve",
    "deviation_prob",
]


@dataclass
class EmpiricalMeasure:
    samples: np.ndarray  # (n, d), uniform weights
    burn_in: float
    thinning: float
    total_time: float
    dt: float
    n_batches: int = 32

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim == 1:
            self.samples = self.samples[:, None]
        if self.samples.shape[0] == 0:
            raise ValueError("empirical measure needs at least one sample")

    @property
    def dimension(self) -> int:
        return self.samples.shape[1]

    def __len__(self):
        return self.samples.shape[0]

    def average(self, g) -> tuple:
        return mu_average(self, g)

    def summary(self) -> dict:
        return {
            "n_samples": len(self),
            "burn_in": self.burn_in,
            "thinning": self.thinning,
            "total_time": self.total_time,
            "dt": self.dt,
            "mean": self.samples.mean(axis=0).tolist(),
            "second_moment": (self.samples**2).mean(axis=0).tolist(),
        }


def estimate_invariant(
    model: DiffusionModel,
    *,
    dt: float = 1e-3,
    total_time: float = 1e4,
    burn_in: float | None = None,
    thinning: float = 0.1,
    seed: int = 0,
    x_start=None,
    recurrence_rate: float | None = None,
    guard_radius: float = 1e6,
    n_batches: int = 32,
    workers: int | None = None,
) -> EmpiricalMeasure:
    """Thinned samples of one long trajectory after burn-in.

    Without an explicit ``burn_in`` the default is ``10 / r`` with ``r`` the
    inward radial drift reported by :func:`fkpoisson.classify.check_recurrence`,
    clamped to ``r <= 1`` so the burn-in never drops below 10 time units.
    """
    if burn_in is None:
        if recurrence_rate is None:
            from .classify import check_recurrence

            recurrence_rate = check_recurrence(model).r
        r = min(recurrence_rate, 1.0) if recurrence_rate and recurrence_rate > 0 else 1.0
        burn_in = 10.0 / r
    stride = max(1, round(thinning / dt))
    n_burn = math.ceil(burn_in / dt - 1e-9)
    n_samples = int((total_time / dt) // stride)
    if n_samples < 1:
        raise ValueError("total_time shorter than one thinning stride")
    ck = n_burn + stride * np.arange(1, n_samples + 1, dtype=np.int64)
    x0 = np.zeros(model.dimension) if x_start is None else np.asarray(x_start, dtype=float)
    ens = simulate(
        model, x0, 1, dt, checkpoints=ck, seed=seed, namespace=namespace_id(0x1A7), guard_radius=guard_radius,
        workers=workers,
    )
    if ens.status[0] != 0:
        raise SimulationError(
            f"trajectory left the guard radius {guard_radius:g}; the model does not look recurrent"
        )
    return EmpiricalMeasure(ens.X[0], burn_in, stride * dt, n_samples * stride * dt, dt, n_batches)


def mu_average(measure: EmpiricalMeasure, g) -> tuple:
    """Batch-means estimate of the integral of ``g`` against the measure."""
    if not isinstance(g, Expression):
        g = parse(str(g), measure.dimension)
    vals = evaluate_many(g, measure.samples)
    n = vals.size
    b = min(measure.n_batches, n)
    size = n // b
    if b < 2:
        return float(vals.mean()), math.nan
    used = vals[n - b * size:]
    means = used.reshape(b, size).mean(axis=1)
    return float(means.mean()), float(means.std(ddof=1) / math.sqrt(b))


# ------------------------------------------------------------------ decays


@dataclass
class DecayFit:
    """Exponential fit ``value ~ prefactor * exp(-rate * t)`` on a masked segment."""

    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    rate: float = math.nan
    rate_ci: tuple = (math.nan, math.nan)
    prefactor: float = math.nan
    r_squared: float = math.nan
    used: np.ndarray | None = None
    flags: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def rate_positive(self) -> bool:
        return bool(np.isfinite(self.rate_ci[0]) and self.rate_ci[0] > 0)

    def to_dict(self) -> dict:
        return {
            "rate": _num(self.rate),
            "rate_ci": [_num(v) for v in self.rate_ci],
            "prefactor": _num(self.prefactor),
            "r_squared": _num(self.r_squared),
            "n_fit_points": int(np.sum(self.used)) if self.used is not None else 0,
            "flags": list(self.flags),
            **{
                k: (v.to_dict() if isinstance(v, DecayFit) else v)
                for k, v in self.extra.items()
                if not isinstance(v, np.ndarray)
            },
        }

    def rows(self):
        used = self.used if self.used is not None else np.zeros(len(self.times), bool)
        for t, v, s, u in zip(self.times, self.values, self.stderr, used):
            yield float(t), float(v), float(s), int(bool(u))


def _num(v):
    v = float(v)
    return v if math.isfinite(v) else None


def fit_exponential_decay(times, values, mask, level: float = 0.95) -> tuple:
    """OLS of log(values) on time; returns (rate, ci, prefactor, r2)."""
    t = np.asarray(times, dtype=float)[mask]
    v = np.asarray(values, dtype=float)[mask]
    if t.size < 2 or np.any(v <= 0):
        return math.nan, (math.nan, math.nan), math.nan, math.nan
    res = stats.linregress(t, np.log(v))
    rate = -res.slope
    if t.size > 2:
        q = stats.t.ppf(0.5 + level / 2, t.size - 2)
        ci = (rate - q * res.stderr, rate + q * res.stderr)
    else:
        ci = (math.nan, math.nan)
    return float(rate), (float(ci[0]), float(ci[1])), float(math.exp(res.intercept)), float(res.rvalue**2)


def _edges(pooled: np.ndarray, max_bins: int):
    edges = []
    for col in pooled.T:
        lo, hi = float(col.min()), float(col.max())
        if hi - lo <= 0:
            edges.append(np.array([lo - 0.5, hi + 0.5]))
            continue
        e = np.histogram_bin_edges(col, bins="fd")
        if e.size - 1 > max_bins:
            e = np.linspace(lo, hi, max_bins + 1)
        edges.append(e)
    return edges


def histogram_tv(a: np.ndarray, b: np.ndarray, max_bins: int = 400) -> tuple:
    """Total variation between two samples on a common Freedman-Diaconis partition.

    Returns ``(tv, n_bins)``.
    """
    a = np.asarray(a, dtype=float).reshape(len(a), -1)
    b = np.asarray(b, dtype=float).reshape(len(b), -1)
    d = a.shape[1]
    edges = _edges(np.vstack([a, b]), max_bins if d == 1 else max(2, int(max_bins ** (1 / d))))
    ha, _ = np.histogramdd(a, bins=edges)
    hb, _ = np.histogramdd(b, bins=edges)
    tv = 0.5 * np.abs(ha / len(a) - hb / len(b)).sum()
    return float(min(max(tv, 0.0), 1.0)), int(ha.size)


def _decaying_mask(values, floor):
    v = np.asarray(values)
    peak = np.argmax(v)
    start = peak
    while start < v.size and v[start] > 0.9 * v[peak]:
        start += 1
    mask = np.zeros(v.size, bool)
    mask[start:] = True
    return mask & (v > 3 * floor)


def tv_mixing_decay(
    model: DiffusionModel,
    x0,
    x0_other,
    times,
    n_paths: int = 20000,
    *,
    dt: float = 1e-3,
    seed: int = 0,
    max_bins: int = 400,
    workers: int | None = None,
) -> DecayFit:
    """Histogram TV distance between the laws started at ``x0`` and ``x0_other``."""
    times = np.asarray(times, dtype=float)
    ck = np.array([steps_for(t, dt) for t in times], dtype=np.int64)
    e1 = simulate(model, x0, n_paths, dt, checkpoints=ck, seed=seed, namespace=namespace_id(0x7F, 1), workers=workers)
    e2 = simulate(model, x0_other, n_paths, dt, checkpoints=ck, seed=seed, namespace=namespace_id(0x7F, 2), workers=workers)
    return _tv_fit(times, e1.X, e2.X, max_bins)


def tv_to_invariant(
    model: DiffusionModel,
    x0,
    measure: EmpiricalMeasure,
    times,
    n_paths: int = 20000,
    *,
    dt: float = 1e-3,
    seed: int = 0,
    max_bins: int = 400,
    workers: int | None = None,
) -> DecayFit:
    """Histogram TV distance between the law started at ``x0`` and the empirical measure."""
    times = np.asarray(times, dtype=float)
    ck = np.array([steps_for(t, dt) for t in times], dtype=np.int64)
    e1 = simulate(model, x0, n_paths, dt, checkpoints=ck, seed=seed, namespace=namespace_id(0x7F, 3), workers=workers)
    ref = measure.samples
    idx = np.linspace(0, len(ref) - 1, min(len(ref), n_paths)).astype(int)
    ref = np.broadcast_to(ref[idx][:, None, :], (idx.size, times.size, ref.shape[1]))
    return _tv_fit(times, e1.X, ref, max_bins)


def _tv_fit(times, X1, X2, max_bins):
    n1, n2 = X1.shape[0], X2.shape[0]
    tv = np.empty(times.size)
    floor = np.empty(times.size)
    flags = []
    sparse = False
    for k in range(times.size):
        a, b = X1[:, k, :], X2[:, k, :]
        tv[k], nb = histogram_tv(a, b, max_bins)
        # null level: the same statistic between halves of one ensemble
        h1, _ = histogram_tv(a[: n1 // 2], a[n1 // 2:], max_bins)
        h2, _ = histogram_tv(b[: n2 // 2], b[n2 // 2:], max_bins)
        floor[k] = 0.5 * (h1 + h2) / math.sqrt(2.0)
        if min(n1, n2) / nb < 5:
            sparse = True
    if sparse:
        flags.append("few samples per bin")
    mask = _decaying_mask(tv, floor)
    rate, ci, pref, r2 = fit_exponential_decay(times, tv, mask)
    if not np.isfinite(rate) or not (ci[0] > 0):
        flags.append("non-mixing or unresolved decay")
    return DecayFit(times, tv, floor, rate, ci, pref, r2, mask, flags, {"kind": "tv"})


# ------------------------------------------------------- exponential moments


@dataclass
class ExpMomentCurve:
    gamma: float
    x0: np.ndarray
    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    log_values: np.ndarray
    C: float
    stabilized: bool

    def to_dict(self):
        return {
            "gamma": self.gamma,
            "x0": self.x0.tolist(),
            "C": _num(self.C),
            "sup_value": _num(np.max(self.values)),
            "bound": _num(self.C * math.exp(self.gamma * float(np.linalg.norm(self.x0)))),
            "stabilized": bool(self.stabilized),
        }


def exp_moment_curve(
    model: DiffusionModel,
    gamma: float,
    x0,
    times,
    n_paths: int = 20000,
    *,
    dt: float = 1e-3,
    seed: int = 0,
    gamma_guard: float = 0.5,
    workers: int | None = None,
) -> ExpMomentCurve:
    """``E_x exp(gamma |X_t|)`` per time, accumulated in log space."""
    if not 0 <= gamma < gamma_guard:
        raise ValueError(f"gamma must lie in [0, {gamma_guard})")
    times = np.asarray(times, dtype=float)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    ck = np.array([steps_for(t, dt) for t in times], dtype=np.int64)
    ens = simulate(model, x0, n_paths, dt, checkpoints=ck, seed=seed, namespace=namespace_id(0xE3), workers=workers)
    z = gamma * np.linalg.norm(ens.X, axis=2)  # (N, K)
    zmax = z.max(axis=0)
    w = np.exp(z - zmax)
    wbar = w.mean(axis=0)
    logv = zmax + np.log(wbar)
    sd = w.std(axis=0, ddof=1) if n_paths > 1 else np.zeros_like(wbar)
    with np.errstate(over="ignore"):
        values = np.exp(logv)
        stderr = sd * np.exp(zmax) / math.sqrt(n_paths)
    C = float(np.max(values) * math.exp(-gamma * float(np.linalg.norm(x0))))
    if times.size >= 2:
        tol = 3 * math.hypot(stderr[-1], stderr[-2]) + 1e-12
        stabilized = bool(abs(values[-1] - values[-2]) <= tol)
    else:
        stabilized = False
    return ExpMomentCurve(gamma, x0, times, values, stderr, logv, C, stabilized)


# ------------------------------------------------------ deviation probabilities


def deviation_prob(
    model: DiffusionModel,
    c: Expression,
    c_bar: float,
    delta: float,
    times,
    n_paths: int = 20000,
    *,
    x0=None,
    dt: float = 1e-3,
    seed: int = 0,
    workers: int | None = None,
) -> DecayFit:
    """``P_x(t^-1 int_0^t c ds < c_bar - delta)`` per time with an exponential fit.

    The upper deviation ``P_x(t^-1 int_0^t c ds > c_bar + delta)`` is fitted
    too and returned in ``extra["upper"]``.  Zero-hit estimates are censored
    (reported, excluded from the fit).
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    times = np.asarray(times, dtype=float)
    if np.any(times <= 0):
        raise ValueError("deviation times must be positive")
    x0 = np.zeros(model.dimension) if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float))
    ck = np.array([steps_for(t, dt) for t in times], dtype=np.int64)
    ens = simulate(model, x0, n_paths, dt, checkpoints=ck, c=c, seed=seed, namespace=namespace_id(0xDE), workers=workers)
    avg = ens.A / times  # (N, K)
    fits = {}
    for side, hits in (("lower", avg < c_bar - delta), ("upper", avg > c_bar + delta)):
        p = hits.mean(axis=0)
        se = np.sqrt(p * (1 - p) / n_paths)
        censored = p == 0
        rate, ci, pref, r2 = fit_exponential_decay(times, p, ~censored)
        flags = []
        if censored.any():
            flags.append(f"censored below 1/{n_paths} at {int(censored.sum())} time(s)")
        fits[side] = DecayFit(
            times, p, se, rate, ci, pref, r2, ~censored, flags,
            {"kind": f"deviation_{side}", "c_bar": c_bar, "delta": delta, "censored": censored.tolist()},
        )
    lower = fits["lower"]
    lower.extra["upper"] = fits["upper"]
    return lower
