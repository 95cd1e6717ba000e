"""Assumption probes and regime classification for ``Lu - cu = -f``.

Labels, in priority order:

``Simple``
    ``c`` bounded below by a positive constant on the probes.
``Case1``
    user-declared factorisation ``c = epsilon * c1`` with ``mean_mu(c1) > 0``.
``Case2``
    ``c >= 0`` on the probes and ``mean_mu(c) > 0``.
``Case3``
    ``c`` is a constant ``-epsilon <= 0`` and ``f`` is centred under mu.
    ``epsilon = 0`` is the no-potential baseline.
``Unsupported``
    none of the above, or non-degeneracy / exponential recurrence failed.

All checks are finite probes, not proofs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .ergodics import EmpiricalMeasure, mu_average
from .expr import Expression, evaluate_many, parse
from .sde import DiffusionModel

__all__ = [
    "PotentialProblem",
    "CaseVerdict",
    "NonDegeneracy",
    "Recurrence",
    "default_probes",
    "check_nondegeneracy",
    "check_recurrence",
    "classify_case",
    "LABELS",
]

LABELS = ("Simple", "Case1", "Case2", "Case3", "Unsupported")


@dataclass(frozen=True)
class PotentialProblem:
    model: DiffusionModel
    c: Expression
    f: Expression
    c1: Expression | None = None
    epsilon: float | None = None

    def __post_init__(self):
        d = self.model.dimension
        for e in (self.c, self.f, self.c1):
            if e is not None and e.dimension != d:
                raise ValueError("potential and source must match the model dimension")
        if (self.c1 is None) != (self.epsilon is None):
            raise ValueError("give both c1 and epsilon or neither")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    @classmethod
    def from_strings(cls, model, c, f, c1=None, epsilon=None):
        d = model.dimension
        return cls(
            model,
            parse(str(c), d),
            parse(str(f), d),
            None if c1 is None else parse(str(c1), d),
            epsilon,
        )

    @property
    def dimension(self) -> int:
        return self.model.dimension


def default_probes(d: int, half_width: float = 5.0, max_points: int = 4096) -> np.ndarray:
    """Uniform lattice in ``[-half_width, half_width]^d`` containing the origin."""
    k = 11
    while k > 3 and k**d > max_points:
        k -= 2
    axis = np.linspace(-half_width, half_width, k)
    return np.array(list(itertools.product(axis, repeat=d)))


@dataclass
class NonDegeneracy:
    value: float  # min over probes of the smallest eigenvalue of sigma sigma^T
    passed: bool
    worst_point: list
    tolerance: float

    def to_dict(self):
        return dict(self.__dict__)


def check_nondegeneracy(model: DiffusionModel, probes=None, tol: float = 1e-8) -> NonDegeneracy:
    pts = default_probes(model.dimension) if probes is None else np.asarray(probes, dtype=float).reshape(-1, model.dimension)
    if len(pts) == 0:
        raise ValueError("probe set is empty")
    s = model.sigma_many(pts)  # (n, d, m)
    ss = np.einsum("nij,nkj->nik", s, s)
    eig = np.linalg.eigvalsh(ss)[:, 0]
    k = int(np.argmin(eig))
    return NonDegeneracy(float(eig[k]), bool(eig[k] > tol), pts[k].tolist(), tol)


@dataclass
class Recurrence:
    limsup: float  # estimated limsup of <b(x), x/|x|>, i.e. -r
    passed: bool
    radii: list
    max_radial_drift: list
    unbounded_drift: bool

    @property
    def r(self) -> float:
        return -self.limsup

    def to_dict(self):
        return {**self.__dict__, "r": self.r}


def _directions(d, count, seed):
    if d == 1:
        return np.array([[1.0], [-1.0]])
    axes = np.vstack([np.eye(d), -np.eye(d)])
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((count, d))
    return np.vstack([axes, g / np.linalg.norm(g, axis=1, keepdims=True)])


def check_recurrence(model: DiffusionModel, radii=(10.0, 20.0, 50.0), directions: int = 32, seed: int = 0) -> Recurrence:
    """Radial drift ``<b(x), x/|x|>`` on spheres; the limsup is read from the two largest radii."""
    radii = sorted(float(r) for r in radii)
    if radii[-1] < 10:
        raise ValueError("largest probe radius must be at least 10")
    dirs = _directions(model.dimension, directions, seed)
    per_radius = []
    drift_norms = []
    for r in radii:
        pts = r * dirs
        b = model.drift_many(pts)
        per_radius.append(float(np.max(np.sum(b * dirs, axis=1))))
        drift_norms.append(float(np.max(np.linalg.norm(b, axis=1))))
    limsup = max(per_radius[-2:])
    unbounded = len(radii) >= 2 and drift_norms[-1] > 1.5 * drift_norms[0] + 1e-12
    return Recurrence(limsup, limsup < 0, radii, per_radius, unbounded)


@dataclass
class CaseVerdict:
    label: str
    also: list = field(default_factory=list)
    evidence: dict = field(default_factory=dict)
    reasons: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def supported(self) -> bool:
        return self.label != "Unsupported"

    @property
    def f_centered(self) -> bool:
        return bool(self.evidence.get("A4_holds", False))

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "also": list(self.also),
            "evidence": self.evidence,
            "reasons": list(self.reasons),
            "warnings": list(self.warnings),
        }


def classify_case(
    problem: PotentialProblem,
    measure: EmpiricalMeasure,
    *,
    nondegeneracy: NonDegeneracy | None = None,
    recurrence: Recurrence | None = None,
    probes=None,
    mixing_rate: float | None = None,
    positive_threshold: float = 0.0,
    const_tol: float = 1e-12,
) -> CaseVerdict:
    model = problem.model
    pts = default_probes(model.dimension) if probes is None else np.asarray(probes, dtype=float)
    nd = nondegeneracy or check_nondegeneracy(model, pts)
    rec = recurrence or check_recurrence(model)

    cv = evaluate_many(problem.c, pts)
    c_min, c_max = float(cv.min()), float(cv.max())
    constant = c_max - c_min <= const_tol
    c_bar, c_se = mu_average(measure, problem.c)
    f_bar, f_se = mu_average(measure, problem.f)
    a4 = abs(f_bar) <= 3 * f_se if f_se > 0 else f_bar == 0

    ev = {
        "c_bar": c_bar,
        "c_bar_stderr": c_se,
        "f_bar": f_bar,
        "f_bar_stderr": f_se,
        "A4_holds": bool(a4),
        "c_min_probe": c_min,
        "c_max_probe": c_max,
        "c_sign_profile": {
            "negative": int(np.sum(cv < 0)),
            "zero": int(np.sum(cv == 0)),
            "positive": int(np.sum(cv > 0)),
        },
        "c_constant": bool(constant),
        "A2_min_eigenvalue": nd.value,
        "A2_holds": nd.passed,
        "A5_radial_limsup": rec.limsup,
        "A5_holds": rec.passed,
        "A3": "assumed (not checkable by probing)",
        "n_probes": int(len(pts)),
    }
    reasons, warnings, labels = [], [], []
    assumptions_ok = nd.passed and rec.passed
    if not nd.passed:
        reasons.append(f"A2 fails: smallest eigenvalue of sigma sigma^T is {nd.value:.3g} at {nd.worst_point}")
    if not rec.passed:
        reasons.append(f"A5 fails: radial drift limsup estimate {rec.limsup:.3g} is not negative")
    if rec.unbounded_drift:
        warnings.append("drift grows with the radius; boundedness in A2 is relaxed for this model")

    if c_min > positive_threshold:
        labels.append("Simple")

    if problem.c1 is not None:
        c1v = evaluate_many(problem.c1, pts)
        c1_bar, c1_se = mu_average(measure, problem.c1)
        ev.update({"epsilon": problem.epsilon, "c1_bar": c1_bar, "c1_bar_stderr": c1_se})
        consistent = np.allclose(cv, problem.epsilon * c1v, rtol=1e-9, atol=1e-12)
        if not consistent:
            reasons.append("declared c = epsilon*c1 does not match c on the probes")
        elif not c1_bar > 3 * c1_se:
            reasons.append(f"Case1 needs mean(c1) > 0: got {c1_bar:.4g} +- {c1_se:.2g}")
        elif assumptions_ok:
            labels.append("Case1")
            if mixing_rate is not None and problem.epsilon >= mixing_rate / 2:
                warnings.append(f"epsilon={problem.epsilon} is not small against mixing rate {mixing_rate:.3g}")

    if c_min >= 0:
        if c_bar > 3 * c_se:
            if assumptions_ok:
                labels.append("Case2")
        else:
            reasons.append(f"Case2 needs mean(c) > 0: got {c_bar:.4g} +- {c_se:.2g}")

    if constant and c_max <= 0:
        eps = -c_max
        ev["epsilon"] = eps
        if eps == 0:
            ev["note"] = "zero potential: no-potential baseline, needs centred f"
        if not a4:
            reasons.append(f"A4 fails: mean(f) = {f_bar:.4g} +- {f_se:.2g}")
        elif assumptions_ok:
            labels.append("Case3")
            if mixing_rate is not None and eps >= mixing_rate / 2:
                warnings.append(f"epsilon={eps} is not small against mixing rate {mixing_rate:.3g}")
    elif c_min < 0:
        reasons.append("c takes negative values and is not constant")

    if not labels:
        return CaseVerdict("Unsupported", [], ev, reasons, warnings)
    ordered = [lab for lab in LABELS if lab in labels]
    return CaseVerdict(ordered[0], ordered[1:], ev, reasons if ordered[0] == "Unsupported" else [], warnings)
