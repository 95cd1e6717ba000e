import math

import numpy as np
import pytest

import oracles
from fkpoisson.expr import EvaluationError, parse
from fkpoisson.rng import RandomStream
from fkpoisson.sde import (
    CHUNK,
    DiffusionModel,
    PathState,
    coupled_levels,
    exit_ensemble,
    first_exit,
    ou_model,
    simulate,
    simulate_path,
    step,
    steps_for,
)

OU = ou_model()


def test_steps_for():
    assert steps_for(1.0, 1e-3) == 1000
    assert steps_for(0.0, 0.1) == 0
    with pytest.raises(ValueError):
        steps_for(1.0005, 1e-3)
    with pytest.raises(ValueError):
        steps_for(-1.0, 1e-3)


def test_interpreted_step_matches_compiled_path():
    model = DiffusionModel.from_strings(["-x1 + 0.5*sin(x2)", "-x2"], [["1", "0.3"], ["0", "sqrt(2)"]])
    c = parse("x1^2 + 0.1", 2)
    stream = RandomStream(5, path_index=17)
    state = PathState(0.0, np.array([0.3, -1.0]))
    for _ in range(50):
        state = step(model, c, state, 0.01, stream)
    path = simulate_path(model, c, [0.3, -1.0], 0.5, 0.01, RandomStream(5, path_index=17))
    np.testing.assert_allclose(path[-1].x, state.x, rtol=1e-12)
    assert path[-1].A == pytest.approx(state.A, rel=1e-12)
    assert path[-1].t == pytest.approx(0.5)


def test_worker_count_does_not_change_results():
    n = 2 * CHUNK + 37
    f = parse("x")
    c = parse("0.1 + 0.2*step(abs(x) - 1)")
    a = simulate(OU, [1.0], n, 0.01, T=2.0, c=c, f=f, seed=3, workers=1)
    b = simulate(OU, [1.0], n, 0.01, T=2.0, c=c, f=f, seed=3, workers=3)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.A, b.A)
    np.testing.assert_array_equal(a.I, b.I)


def test_path_offset_selects_the_same_streams():
    full = simulate(OU, [0.0], 10, 0.01, T=0.5, seed=8)
    tail = simulate(OU, [0.0], 4, 0.01, T=0.5, seed=8, path_offset=6)
    np.testing.assert_array_equal(full.X[6:], tail.X)


def test_antithetic_pairs_mirror_for_odd_drift():
    e = simulate(OU, [0.0], 64, 0.01, T=1.0, seed=1, antithetic=True)
    np.testing.assert_array_equal(e.X[0::2], -e.X[1::2])


def test_checkpoints_record_start_and_intermediate_states():
    e = simulate(OU, [0.7], 5, 0.1, checkpoints=[0, 3, 10], seed=2)
    np.testing.assert_array_equal(e.X[:, 0, 0], 0.7)
    assert np.all(e.A == 0)
    np.testing.assert_allclose(e.times, [0.0, 0.3, 1.0])


def test_euler_moments_match_recursion():
    # Euler OU: X_{n+1} = (1 - dt) X_n + sqrt(2 dt) Z, so mean and variance are geometric sums
    dt, n, x0, N = 0.01, 100, 1.5, 40_000
    e = simulate(OU, [x0], N, dt, T=n * dt, seed=4)
    x = e.X[:, 0, 0]
    mean = x0 * (1 - dt) ** n
    var = 2 * dt * (1 - (1 - dt) ** (2 * n)) / (1 - (1 - dt) ** 2)
    assert abs(x.mean() - mean) < 4 * math.sqrt(var / N)
    assert abs(x.var() - var) < 4 * var * math.sqrt(2 / N)


def test_discounted_integral_mean_matches_euler_sum():
    dt, n, N = 0.01, 500, 40_000
    e = simulate(OU, [1.0], N, dt, T=n * dt, c=parse("0.1"), f=parse("x"), seed=6)
    I = e.I[:, 0]
    ref = oracles.euler_linear_mean(1.0, 0.1, dt, n)
    assert abs(I.mean() - ref) < 4 * I.std() / math.sqrt(N)


def test_constant_source_is_deterministic_per_path():
    dt, n = 0.01, 400
    e = simulate(OU, [0.3], 100, dt, T=n * dt, c=parse("0.5"), f=parse("1"), seed=0)
    np.testing.assert_allclose(e.I[:, 0], oracles.euler_constant_value(0.5, dt, n), rtol=1e-12)
    np.testing.assert_allclose(e.A[:, 0], 0.5 * n * dt, rtol=1e-12)


def test_guard_radius_stops_explosive_paths():
    model = DiffusionModel.from_strings(["x"], [["1"]])
    e = simulate(model, [1.0], 8, 0.01, T=20.0, seed=0, guard_radius=100.0)
    assert np.all(e.status == 1)
    assert np.all(np.isnan(e.X[:, -1, 0]))


def test_discount_overflow_is_flagged():
    e = simulate(OU, [0.0], 4, 0.01, T=20.0, c=parse("-50"), f=parse("1"), seed=0)
    assert np.all(e.status == 2)


def test_domain_error_inside_kernel_raises_evaluation_error():
    with pytest.raises(EvaluationError):
        simulate(OU, [1.0], 4, 0.01, T=5.0, c=parse("log(x)"), seed=0)


def test_exit_time_of_brownian_motion_from_centre():
    # a = 1: E tau solves u'' = -1 on (-1, 1), u(0) = 1/2
    bm = DiffusionModel.from_strings(["0"], [["sqrt(2)"]])
    res = exit_ensemble(bm, [0.0], 20_000, 1e-4, [0.0], 1.0, 50.0, seed=9)
    assert res.exited.all()
    assert np.all(np.abs(res.x_tau[:, 0]) >= 1.0)
    se = res.tau.std() / math.sqrt(res.n_paths)
    # discrete monitoring lets paths overshoot before detection; allow that shift
    assert abs(res.tau.mean() - 0.5) < 4 * se + 0.02


def test_exit_rejects_start_outside():
    with pytest.raises(ValueError):
        exit_ensemble(OU, [2.0], 4, 0.01, [0.0], 1.0, 10.0)


def test_first_exit_matches_ensemble():
    res = exit_ensemble(OU, [0.2], 3, 0.01, [0.0], 1.0, 10.0, c=parse("1"), seed=5, namespace=4)
    tau, x, A, exited = first_exit(OU, parse("1"), [0.2], [0.0], 1.0, 0.01,
                                   RandomStream(5, path_index=2, namespace=4), 10.0)
    assert tau == res.tau[2] and A == res.A_tau[2] and exited == res.exited[2]
    np.testing.assert_array_equal(x, res.x_tau[2])


def test_coupled_levels_constant_case_is_exact():
    I, _, status = coupled_levels(OU, [0.0], 16, 0.02, 2.0, 3, c=parse("0.5"), f=parse("1"), seed=1)
    assert np.all(status == 0)
    for j, h in enumerate([0.02, 0.01, 0.005]):
        np.testing.assert_allclose(I[:, j], oracles.euler_constant_value(0.5, h, round(2.0 / h)), rtol=1e-12)


def test_coupled_levels_share_the_brownian_path():
    N = 20_000
    I, X, _ = coupled_levels(OU, [1.0], N, 0.02, 2.0, 3, c=parse("0.1"), f=parse("x"), seed=2)
    for j, h in enumerate([0.02, 0.01, 0.005]):
        ref = oracles.euler_linear_mean(1.0, 0.1, h, round(2.0 / h))
        assert abs(I[:, j].mean() - ref) < 4 * I[:, j].std() / math.sqrt(N)
    # coupling: level differences are far less noisy than the levels themselves
    assert np.std(I[:, 0] - I[:, 1]) < 0.2 * np.std(I[:, 0])
    assert np.std(X[:, 0, 0] - X[:, 2, 0]) < 0.2 * np.std(X[:, 0, 0])
