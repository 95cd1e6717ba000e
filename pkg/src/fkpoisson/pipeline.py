"""Lazily computed diagnostics shared by the CLI commands.

A :class:`Session` owns one validated config.  Each quantity (invariant
measure, mixing fit, lmgf curve, verdict, truncation) is computed on first use
and cached, so ``solve`` reuses what ``classify`` needed without recomputing.
"""

from __future__ import annotations

import logging
import math
from functools import cached_property

import numpy as np

from . import ergodics, lmgf, oracle1d, solver
from .classify import CaseVerdict, check_nondegeneracy, check_recurrence, classify_case
from .config import RunConfig, build_problem
from .expr import constant_value, is_constant
from .sde import SimulationError

log = logging.getLogger("fkpoisson")


class Session:
    def __init__(self, cfg: RunConfig, workers: int | None = None):
        self.cfg = cfg
        self.workers = workers
        self.problem = build_problem(cfg)
        self.seed = cfg.simulation.seed
        self.dt = cfg.simulation.dt
        self.d = self.problem.dimension

    # ------------------------------------------------------------ probes

    @cached_property
    def nondegeneracy(self):
        return check_nondegeneracy(self.problem.model)

    @cached_property
    def recurrence(self):
        return check_recurrence(self.problem.model, self.cfg.diagnostics.probe_radii)

    @cached_property
    def measure(self):
        sim = self.cfg.simulation
        rate = self.recurrence.r if self.recurrence.passed else None
        log.info("estimating invariant measure over %g time units", sim.total_time)
        return ergodics.estimate_invariant(
            self.problem.model, dt=sim.dt, total_time=sim.total_time, burn_in=sim.burn_in, thinning=sim.thinning,
            seed=self.seed, recurrence_rate=rate, workers=self.workers,
        )

    def _e1(self, r):
        v = np.zeros(self.d)
        v[0] = r
        return v

    @cached_property
    def tv_fit(self):
        dg = self.cfg.diagnostics
        pts = dg.tv_points or [self._e1(-2.0).tolist(), self._e1(2.0).tolist()]
        log.info("total-variation mixing decay between %s and %s", pts[0], pts[1])
        return ergodics.tv_mixing_decay(self.problem.model, pts[0], pts[1], dg.tv_times, dg.tv_N, dt=self.dt,
                                        seed=self.seed, workers=self.workers)

    @property
    def lmgf_target(self):
        """``(expression, label, extra beta)`` the lmgf curve is computed for."""
        p = self.problem
        if p.c1 is not None:
            return p.c1, "c1", -p.epsilon
        return p.c, "c", -1.0

    @cached_property
    def lmgf_curve(self):
        dg = self.cfg.diagnostics
        expr, _, extra = self.lmgf_target
        betas = sorted(set(dg.beta_grid) | {extra})
        log.info("lmgf curve on %d beta values, T grid %s", len(betas), dg.T_grid)
        curve = lmgf.estimate_curve(self.problem.model, expr, betas, np.zeros(self.d), dg.T_grid, dg.lmgf_N, self.dt,
                                    seed=self.seed, workers=self.workers)
        if any(np.isclose(curve.betas, dg.h)) and any(np.isclose(curve.betas, -dg.h)):
            curve.derivative = lmgf.derivative_at_zero(curve, dg.h)
            curve.derivative_se = lmgf.derivative_stderr(curve, dg.h)
        return curve

    # ---------------------------------------------------------- verdict

    def _needs_mixing_for_verdict(self):
        p = self.problem
        return p.epsilon is not None or (is_constant(p.c) and constant_value(p.c) <= 0)

    @cached_property
    def verdict(self) -> CaseVerdict:
        try:
            measure = self.measure
        except SimulationError as e:
            reasons = [str(e)]
            if not self.recurrence.passed:
                reasons.insert(0, "A5 fails: radial drift is not inward at the probe radii")
            return CaseVerdict("Unsupported", [], {"A2_min_eigenvalue": self.nondegeneracy.value,
                                                   "A5_radial_limsup": self.recurrence.limsup}, reasons, [])
        rate = None
        if self._needs_mixing_for_verdict() and self.tv_fit.rate_positive:
            rate = self.tv_fit.rate
        return classify_case(self.problem, measure, nondegeneracy=self.nondegeneracy, recurrence=self.recurrence,
                             mixing_rate=rate)

    # ------------------------------------------------------- truncation

    def points(self):
        return [np.asarray(p, dtype=float) for p in self.cfg.solve.points]

    @cached_property
    def truncation(self) -> solver.Truncation:
        s = self.cfg.solve
        p = self.problem
        kw = {"measure": self.measure}
        if s.rate_source == "pilot":
            kw["pilot"] = solver.integrand_decay(p, self.points(), s.pilot_T, self.dt, s.pilot_N, seed=self.seed,
                                                 workers=self.workers)
        elif is_constant(p.c):
            # the mixing fit only matters for a centred source or a non-positive constant
            if self.verdict.f_centered or constant_value(p.c) <= 0:
                kw["mixing"] = self.tv_fit
        else:
            kw["curve"] = self.lmgf_curve
        return solver.choose_truncation(p, self.verdict, s.tol, **kw)

    def horizon(self):
        """``(T, tail_bound, warnings)`` honouring an explicit ``solve.T``."""
        s = self.cfg.solve
        tr = self.truncation
        if s.T == "auto":
            return tr.T, tr.tail_bound, list(tr.warnings)
        warnings = list(tr.warnings)
        if s.T < tr.T:
            warnings.append(f"explicit T={s.T:g} is below the recommended horizon {tr.T:.4g}")
        return float(s.T), tr.tail_at(float(s.T)), warnings

    # -------------------------------------------------------- payloads

    def classify_payload(self) -> dict:
        out = {
            "verdict": self.verdict.to_dict(),
            "nondegeneracy": self.nondegeneracy.to_dict(),
            "recurrence": self.recurrence.to_dict(),
        }
        if "measure" in self.__dict__:
            out["invariant"] = self.measure.summary()
        if "tv_fit" in self.__dict__:
            out["mixing"] = self.tv_fit.to_dict()
        return out

    def diagnostics_payload(self) -> dict:
        dg = self.cfg.diagnostics
        p = self.problem
        m = self.measure
        tv = self.tv_fit
        curve = self.lmgf_curve
        expr, label, _ = self.lmgf_target
        mean, se = ergodics.mu_average(m, expr)
        moments = ergodics.exp_moment_curve(p.model, dg.gamma, np.zeros(self.d), dg.moment_times, dg.ensemble_N,
                                            dt=self.dt, seed=self.seed, gamma_guard=dg.gamma_guard,
                                            workers=self.workers)
        dev = ergodics.deviation_prob(p.model, expr, mean, dg.deviation_delta, dg.deviation_times, dg.ensemble_N,
                                      dt=self.dt, seed=self.seed, workers=self.workers)
        comparison = None
        if curve.derivative is not None:
            comb = math.hypot(curve.derivative_se or 0.0, se)
            comparison = {
                "derivative_at_zero": curve.derivative,
                "derivative_stderr": curve.derivative_se,
                "mu_average": mean,
                "mu_average_stderr": se,
                "difference": curve.derivative - mean,
                "combined_stderr": comb,
                "agrees": abs(curve.derivative - mean) <= 3 * comb + 1e-9 * max(1.0, abs(mean)),
            }
        return {
            "invariant": m.summary(),
            "mixing": {**tv.to_dict(), "non_mixing": not tv.rate_positive},
            "exp_moments": moments.to_dict(),
            "deviation": dev.to_dict(),
            "lmgf": {**curve.to_dict(), "target": label, "target_expression": str(expr)},
            "lmgf_mean_comparison": comparison,
            "_rows": {"tv": list(tv.rows()), "moments": moments, "deviation": dev, "lmgf": list(curve.rows())},
        }

    def solve_payload(self, *, force=False, crosscheck=False, oracle=False) -> dict:
        cfg = self.cfg
        verdict = self.verdict
        if not verdict.supported and not force:
            raise solver.Refused("problem classified Unsupported", verdict.reasons)
        try:
            T, tail, warnings = self.horizon()
            trunc = self.truncation.to_dict()
        except solver.DivergenceRisk as e:
            if not (force and cfg.solve.T != "auto"):
                raise
            T, tail, warnings, trunc = float(cfg.solve.T), math.inf, [f"forced past divergence risk: {e}"], None
        N = cfg.simulation.N
        anti = cfg.simulation.antithetic and N % 2 == 0
        log.info("solving at %d point(s), T=%.4g, N=%d", len(cfg.solve.points), T, N)
        est = [solver.solve_fk(self.problem, x, T, self.dt, N, seed=self.seed, verdict=verdict, tail_bound=tail,
                               antithetic=anti, force=force, workers=self.workers) for x in self.points()]
        out = {"verdict": verdict.label, "truncation": trunc, "warnings": warnings, "estimates": est}
        if crosscheck:
            out["crosschecks"] = self._crosschecks(est[0], T)
        if oracle:
            if self.d != 1:
                out["oracle"] = {"skipped": "finite-difference oracle is one-dimensional"}
            else:
                out["oracle"] = self._oracle(est, T, tail, anti)
        return out

    def _crosschecks(self, first, T) -> dict:
        cc = self.cfg.crosscheck
        p = self.problem
        N = self.cfg.simulation.N
        res = {}
        log.info("semigroup check at T_split=%g", cc.T_split)
        res["semigroup"] = solver.semigroup_check(p, first.x, min(cc.T_split, T), first, seed=self.seed,
                                                  workers=self.workers).to_dict()
        center = np.asarray(cc.ball_center if cc.ball_center is not None else np.zeros(self.d), dtype=float)
        if cc.ball_point is not None:
            x = np.asarray(cc.ball_point, dtype=float)
        elif np.linalg.norm(first.x - center) < cc.ball_radius:
            x = first.x
        else:
            x = center + self._e1(0.5 * cc.ball_radius)
        ref = first if np.array_equal(x, first.x) else solver.solve_fk(p, x, T, self.dt, N, seed=self.seed,
                                                                        workers=self.workers)
        log.info("ball check at %s", x.tolist())
        res["dirichlet"] = solver.dirichlet_crosscheck(p, center, cc.ball_radius, x, self.dt, N, full=ref,
                                                       t_max=cc.ball_t_max, inner_T=T, seed=self.seed,
                                                       workers=self.workers).to_dict()
        pts = [self._e1(r) for r in cc.growth_radii]
        ests = [solver.solve_fk(p, q, T, self.dt, cc.growth_N, seed=self.seed, workers=self.workers) for q in pts]
        res["growth"] = solver.growth_scan(p, gamma=cc.growth_gamma, estimates=ests).to_dict()
        v = self.verdict
        if v.label == "Case3" or "Case3" in v.also:
            budget = min(cc.centering_budget, len(self.measure))
            res["centering"] = solver.centering_check(p, self.measure, v, T=T, dt=self.dt, budget=budget,
                                                      seed=self.seed, workers=self.workers).to_dict()
        else:
            res["centering"] = {"skipped": "applies only to a constant non-positive potential"}
        return res

    def _oracle(self, est, T, tail, anti) -> dict:
        oc = self.cfg.oracle
        xl, xr = oc.interval
        N = self.cfg.simulation.N
        ends = [solver.solve_fk(self.problem, [x], T, self.dt, N, seed=self.seed, tail_bound=tail, antithetic=anti,
                                workers=self.workers) for x in (xl, xr)]
        log.info("finite-difference oracle on [%g, %g] with n=%d", xl, xr, oc.n)
        rep = oracle1d.compare_mc(self.problem, [e.x for e in est], est, (xl, xr), oc.n, ends[0], ends[1])
        grid = rep.pop("grid")
        rep["_grid"] = list(grid.rows())
        return rep
