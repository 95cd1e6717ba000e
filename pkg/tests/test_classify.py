import numpy as np
import pytest

from fkpoisson.classify import (
    PotentialProblem,
    check_nondegeneracy,
    check_recurrence,
    classify_case,
    default_probes,
)
from fkpoisson.ergodics import estimate_invariant
from fkpoisson.expr import VariableRangeError
from fkpoisson.sde import DiffusionModel, ou_model

OU = ou_model()


@pytest.fixture(scope="module")
def measure():
    return estimate_invariant(OU, total_time=3000.0, seed=11)


def verdict(measure, c, f, c1=None, eps=None, model=OU, **kw):
    return classify_case(PotentialProblem.from_strings(model, c, f, c1, eps), measure, **kw)


def test_default_probes():
    p1 = default_probes(1)
    assert p1.shape == (11, 1) and 0.0 in p1
    p4 = default_probes(4)
    assert p4.shape == (7**4, 4)


def test_nondegeneracy():
    assert check_nondegeneracy(OU).passed
    nd = check_nondegeneracy(DiffusionModel.from_strings(["-x"], [["x"]]))
    assert not nd.passed and nd.worst_point == [0.0]
    two = DiffusionModel.from_strings(["-x1", "-x2"], [["1", "1"], ["1", "1"]])
    assert not check_nondegeneracy(two).passed


def test_recurrence_probes():
    rec = check_recurrence(OU)
    assert rec.passed and rec.r == pytest.approx(20.0)
    assert rec.unbounded_drift
    bounded = check_recurrence(DiffusionModel.from_strings(["-x/(1 + abs(x))"], [["1"]]))
    assert bounded.passed and not bounded.unbounded_drift
    assert bounded.r == pytest.approx(20 / 21)
    assert not check_recurrence(DiffusionModel.from_strings(["0"], [["1"]])).passed
    assert not check_recurrence(DiffusionModel.from_strings(["x"], [["1"]])).passed
    with pytest.raises(ValueError):
        check_recurrence(OU, radii=(1.0, 2.0))


def test_recurrence_in_two_dimensions():
    rot = DiffusionModel.from_strings(["-x1 + x2", "-x2 - x1"], [["1", "0"], ["0", "1"]], 2)
    rec = check_recurrence(rot)
    assert rec.passed and rec.r == pytest.approx(20.0, rel=1e-9)


def test_positive_constant_is_simple(measure):
    v = verdict(measure, "0.1", "x")
    assert v.label == "Simple" and "Case2" in v.also
    assert v.supported


def test_indicator_potential_is_case2(measure):
    v = verdict(measure, "0.2*step(abs(x) - 1)", "tanh(x)")
    assert v.label == "Case2"
    assert v.evidence["c_bar"] == pytest.approx(0.2 * 0.3173, abs=0.02)
    assert v.evidence["c_sign_profile"]["zero"] > 0


def test_declared_small_parameter_is_case1(measure):
    v = verdict(measure, "0.1*x^2", "x", c1="x^2", eps=0.1)
    assert v.label == "Case1" and v.also == ["Case2"]
    assert v.evidence["c1_bar"] == pytest.approx(1.0, abs=0.1)


def test_case1_mismatch_is_reported(measure):
    v = verdict(measure, "0.1*x^2", "x", c1="x^2", eps=0.2)
    assert "Case1" not in [v.label, *v.also]


def test_negative_constant_with_centred_source_is_case3(measure):
    v = verdict(measure, "-0.1", "x")
    assert v.label == "Case3" and v.evidence["epsilon"] == pytest.approx(0.1)
    assert v.f_centered


def test_zero_potential_is_case3_baseline(measure):
    v = verdict(measure, "0", "x")
    assert v.label == "Case3" and v.evidence["epsilon"] == 0


def test_uncentred_source_is_refused(measure):
    v = verdict(measure, "-0.1", "1")
    assert v.label == "Unsupported"
    assert any("A4" in r for r in v.reasons)


def test_sign_changing_potential_is_refused(measure):
    v = verdict(measure, "x", "1")
    assert v.label == "Unsupported"
    assert any("negative" in r for r in v.reasons)


def test_mixing_rate_warning(measure):
    v = verdict(measure, "-0.6", "x", mixing_rate=1.0)
    assert v.label == "Case3"
    assert any("not small" in w for w in v.warnings)


def test_failed_assumption_blocks_cases(measure):
    degenerate = DiffusionModel.from_strings(["-x"], [["0"]])
    v = verdict(measure, "0.2*step(abs(x) - 1)", "x", model=degenerate)
    assert v.label == "Unsupported"
    assert any("A2" in r for r in v.reasons)


def test_problem_validation():
    with pytest.raises(ValueError):
        PotentialProblem.from_strings(OU, "0.1", "x", c1="x^2")
    with pytest.raises(ValueError):
        PotentialProblem.from_strings(OU, "0.1", "x", c1="x^2", epsilon=-1.0)
    two = DiffusionModel.from_strings(["-x1", "-x2"], [["1", "0"], ["0", "1"]])
    with pytest.raises(VariableRangeError):
        PotentialProblem.from_strings(two, "x3", "0")


def test_verdict_serialises(measure):
    d = verdict(measure, "0.1", "x").to_dict()
    assert set(d) == {"label", "also", "evidence", "reasons", "warnings"}
