"""Acceptance criteria 1-13 at their stated tolerances.

Each test prints one ``criterion N: PASS|FAIL`` line (also collected in the
terminal summary) before asserting.  Wall-clock time is reported and, where a
criterion carries a runtime target, it is part of the verdict.

Expected values come from ``oracles.py``: closed forms for the
Ornstein-Uhlenbeck model dX = -X dt + sqrt(2) dW, Gaussian quadrature, and a
dense eigenvalue solve.
"""

import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
import yaml

import oracles
from fkpoisson import ergodics, lmgf, oracle1d, solver
from fkpoisson.cli import main
from fkpoisson.config import validate
from fkpoisson.expr import parse
from fkpoisson.pipeline import Session
from fkpoisson.sde import DiffusionModel, ou_model
from verdicts import record

pytestmark = pytest.mark.slow

OU = ou_model()
SEED = 20240611
DT = 1e-3
N = 100_000


def ou_config(potential, source, *, points=((1.0,),), N=N, **sections):
    cfg = {
        "model": {"dimension": 1, "drift": ["-x"], "sigma": [["sqrt(2)"]]},
        "potential": potential,
        "source": source,
        "simulation": {"dt": DT, "seed": SEED, "N": N},
        "solve": {"points": [list(p) for p in points]},
    }
    for k, v in sections.items():
        cfg[k] = {**cfg.get(k, {}), **v}
    return cfg


class Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


@pytest.fixture(scope="module")
def invariant():
    return ergodics.estimate_invariant(OU, dt=DT, total_time=1e4, seed=SEED)


@pytest.fixture(scope="module")
def case_simple():
    """Criterion 2 configuration: c = 0.1, f = x, u(1) = 1/1.1."""
    with Clock() as clk:
        s = Session(validate(ou_config("0.1", "x")))
        payload = s.solve_payload()
    return s, payload["estimates"][0], clk.elapsed


def test_criterion_01_constant_coefficients():
    # any model: the estimator is deterministic per path here, so N is reduced (see notes)
    points = [(-1.0,), (0.0,), (2.0,)]
    rows = []
    with Clock() as clk:
        s = Session(validate(ou_config("0.5", "1", points=points, N=10_000, solve={"tol": 0.005})))
        for e in s.solve_payload()["estimates"]:
            rows.append((e.x[0], e.value, e.stderr))
        rot = DiffusionModel.from_strings(["-x1 + 0.5*x2", "-x2 - 0.5*x1 + sin(x1)"],
                                          [["1", "0.2"], ["0", "1 + 0.1*cos(x2)"]])
        p2 = solver.PotentialProblem.from_strings(rot, "0.5", "1")
        T = s.truncation.T
        for x in ([0.0, 0.0], [1.0, -2.0], [3.0, 1.0]):
            e = solver.solve_fk(p2, x, T, DT, 1000, seed=SEED)
            rows.append((tuple(x), e.value, e.stderr))
    ok = all(abs(v - 2.0) <= 3 * se + 0.01 for _, v, se in rows) and clk.elapsed < 30
    worst = max(abs(v - 2.0) for _, v, _ in rows)
    record(1, ok, f"max |u - 2| = {worst:.2e} over {len(rows)} points (two models), T = {T:.3g}, "
                  f"{clk.elapsed:.1f} s (target < 30 s)")
    assert ok


def test_criterion_02_simple_case_and_dt_bias(case_simple):
    s, est, t_solve = case_simple
    exact = oracles.linear_solution(0.1, 1.0)
    with Clock() as clk:
        study = solver.dt_bias_study(s.problem, [1.0], est.T, dt=DT, N=8000, seed=SEED)
    within = abs(est.value - exact) <= 3 * est.stderr + 0.01
    shrinks = study.ratio >= 1.5
    # exact Euler bias ratio for this linear problem, for reference
    n = round(est.T / DT)
    ref = [oracles.euler_linear_mean(1.0, 0.1, h, round(n * DT / h)) for h in (DT, DT / 2, 1e-6)]
    euler_ratio = (ref[0] - ref[2]) / (ref[1] - ref[2])
    total = t_solve + clk.elapsed
    ok = within and shrinks and total < 120
    record(2, ok, f"u(1) = {est.value:.6f} +- {est.stderr:.1e} vs {exact:.6f}; bias ratio dt/(dt/2) = "
                  f"{study.ratio:.2f} +- {study.ratio_stderr:.2f} (exact Euler {euler_ratio:.2f}); "
                  f"{total:.1f} s (target < 120 s)")
    assert ok


def test_criterion_03_case3_and_centering():
    with Clock() as clk:
        s = Session(validate(ou_config("-0.1", "x")))
        est = s.solve_payload()["estimates"][0]
        cen = solver.centering_check(s.problem, s.measure, s.verdict, T=est.T, dt=DT, budget=20_000, seed=SEED)
    exact = oracles.linear_solution(-0.1, 1.0)
    within = abs(est.value - exact) <= 3 * est.stderr + 0.01
    ok = s.verdict.label == "Case3" and within and cen.passed
    record(3, ok, f"verdict {s.verdict.label}; u(1) = {est.value:.6f} +- {est.stderr:.1e} vs {exact:.6f}; "
                  f"int u dmu = {cen.mean:.4f} +- {cen.stderr:.4f}; {clk.elapsed:.1f} s")
    assert ok


def test_criterion_04_no_potential_baseline():
    with Clock() as clk:
        s = Session(validate(ou_config("0", "x")))
        est = s.solve_payload()["estimates"][0]
    ok = abs(est.value - 1.0) <= 3 * est.stderr + 0.01
    record(4, ok, f"verdict {s.verdict.label}; u(1) = {est.value:.6f} +- {est.stderr:.1e} vs 1.0; "
                  f"{clk.elapsed:.1f} s")
    assert ok


def test_criterion_05_lmgf_closed_form(invariant):
    with Clock() as clk:
        curve = lmgf.estimate_curve(OU, parse("x^2"), [-0.1, -0.05, 0.0, 0.05], [0.0], [10.0, 20.0], N, DT,
                                    seed=SEED)
    H, se = curve.at(-0.1)
    ref = oracles.lmgf_quadratic(-0.1)
    ref_fd = oracles.lmgf_quadratic_fd(-0.1)
    mu, mu_se = ergodics.mu_average(invariant, "x^2")
    d, d_se = curve.derivative, curve.derivative_se
    c1 = abs(H - ref) <= max(3 * se, 0.01)
    c2 = abs(d - 1.0) <= 0.05
    c3 = abs(d - mu) <= 3 * math.hypot(d_se, mu_se)
    ok = c1 and c2 and c3
    record(5, ok, f"H(-0.1) = {H:.5f} +- {se:.1e} vs {ref:.5f} (eigen-solve {ref_fd:.5f}); "
                  f"H'(0) = {d:.4f} +- {d_se:.4f}, mu(x^2) = {mu:.4f} +- {mu_se:.4f}; {clk.elapsed:.1f} s")
    assert ok


def test_criterion_06_mean_potential(invariant):
    c_bar, se = ergodics.mu_average(invariant, "step(abs(x) - 1)")
    ref = oracles.gaussian_tail_mass(1.0)
    ok = abs(c_bar - ref) <= 3 * se
    record(6, ok, f"c_bar = {c_bar:.5f} +- {se:.5f} vs {ref:.5f} ({len(invariant)} samples)")
    assert ok


def test_criterion_07_mc_against_finite_differences():
    cfg = ou_config(
        "0.2*step(abs(x) - 1)", "tanh(x)", points=[(-1.0,), (0.0,), (1.0,)],
        solve={"rate_source": "pilot"}, oracle={"interval": [-6.0, 6.0], "n": 4096},
    )
    with Clock() as clk:
        s = Session(validate(cfg))
        out = s.solve_payload(oracle=True)
    rep = out["oracle"]
    ok = rep["passed"] and clk.elapsed < 300
    worst = max(p["discrepancy"] / p["budget"] for p in rep["points"])
    detail = ", ".join(f"x={p['x']:g}: |{p['u_mc']:.4f} - {p['u_fd']:.4f}| <= {p['budget']:.1e}"
                       for p in rep["points"])
    record(7, ok, f"{detail}; worst discrepancy/budget {worst:.2f}; T = {s.truncation.T:.3g}; "
                  f"{clk.elapsed:.1f} s (target < 300 s)")
    assert ok


def test_criterion_08_semigroup_identity(case_simple):
    s, est, _ = case_simple
    with Clock() as clk:
        chk = solver.semigroup_check(s.problem, [1.0], 1.0, est, seed=SEED)
    ok = chk.passed
    record(8, ok, f"residual {chk.residual:.2e} <= 3 x {chk.combined_stderr:.2e} ({chk.mode}, "
                  f"{chk.n_inner} x {chk.n_inner} inner paths); {clk.elapsed:.1f} s")
    assert ok


def test_criterion_09_dirichlet_ball():
    p = solver.PotentialProblem.from_strings(OU, "0.1", "x")
    with Clock() as clk:
        chk = solver.dirichlet_crosscheck(p, [0.0], 1.0, [0.5], DT, N, seed=SEED,
                                          u=lambda X: oracles.linear_solution(0.1, X[:, 0]))
    ref = oracles.linear_solution(0.1, 0.5)
    ok = abs(chk.v - ref) <= 3 * chk.v_stderr
    record(9, ok, f"v(0.5) = {chk.v:.6f} +- {chk.v_stderr:.1e} vs {ref:.6f}; {chk.not_exited} paths not exited; "
                  f"{clk.elapsed:.1f} s")
    assert ok


def test_criterion_10_tv_mixing():
    times = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0]
    with Clock() as clk:
        fit = ergodics.tv_mixing_decay(OU, [-2.0], [2.0], times, N, dt=DT, seed=SEED)
    tv1 = float(fit.values[1])
    ref = oracles.tv_between_ou_laws(-2.0, 2.0, 1.0)
    ok = abs(tv1 - ref) <= 0.05 and fit.rate > 0 and fit.rate_ci[0] > 0
    record(10, ok, f"TV(1) = {tv1:.4f} vs {ref:.4f}; rate {fit.rate:.3f} CI [{fit.rate_ci[0]:.3f}, "
                   f"{fit.rate_ci[1]:.3f}]; {clk.elapsed:.1f} s")
    assert ok


def test_criterion_11_fd_order():
    rep = oracle1d.convergence_order(OU, "0.1", oracles.tanh_source(), (-6.0, 6.0), np.tanh, [128, 256, 512, 1024])
    ok = 1.8 <= rep.order <= 2.2
    record(11, ok, f"observed order {rep.order:.4f} (errors {', '.join(f'{e:.2e}' for e in rep.errors)})")
    assert ok


def test_criterion_12_worker_count_determinism(tmp_path):
    # criterion 2 configuration with reduced budgets; > 1 chunk of paths everywhere
    cfg = ou_config("0.1", "x", N=5000,
                    simulation={"total_time": 2000.0},
                    diagnostics={"tv_N": 5000, "lmgf_N": 5000, "ensemble_N": 5000, "T_grid": [5.0, 10.0]},
                    crosscheck={"growth_N": 5000, "centering_budget": 5000})
    texts = {}
    with Clock() as clk:
        for workers in (1, 2):
            out = tmp_path / f"w{workers}"
            cfg["output"] = {"directory": str(out)}
            path = tmp_path / f"w{workers}.yaml"
            path.write_text(yaml.safe_dump(cfg))
            for cmd in (["classify"], ["diagnose"], ["solve", "--crosscheck", "--oracle"]):
                assert main([*cmd, "--config", str(path), "--workers", str(workers)]) == 0
            texts[workers] = {f.name: f.read_bytes() for f in sorted(out.iterdir())
                              if f.suffix in (".json", ".csv") and f.name != "metadata.json"}
    same = texts[1] == texts[2]
    ok = same and len(texts[1]) >= 9
    record(12, ok, f"{len(texts[1])} result files byte-identical for --workers 1 and 2: {same}; "
                   f"{clk.elapsed:.1f} s")
    assert ok


def test_criterion_13_property_suite_standalone():
    here = Path(__file__).parent
    with Clock() as clk:
        res = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                              str(here / "test_properties.py")], capture_output=True, text=True, cwd=here.parent)
    last = res.stdout.strip().splitlines()[-1] if res.stdout.strip() else res.stderr.strip()[-200:]
    ok = res.returncode == 0
    record(13, ok, f"standalone property suite: {last} ({clk.elapsed:.1f} s)")
    assert ok, res.stdout[-3000:]
