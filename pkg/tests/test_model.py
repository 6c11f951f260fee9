import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sdde.brownian import sample_path
from sdde.errors import DelayBoundViolation, UnknownModel
from sdde.euler import integrate
from sdde.model import (
    CoefficientField,
    DelaySpec,
    InitialSegment,
    SddeModel,
    eval_delay,
    normalize_horizon,
    validate_model,
)
from sdde.models import builtin, list_models

BUILTINS = sorted(list_models())


def test_eval_delay_examples():
    assert eval_delay(DelaySpec.fixed(1.0), 0.3) == pytest.approx(-0.7, abs=1e-15)
    assert eval_delay(DelaySpec.piecewise_constant(1.0), 1.8) == 1.0
    assert eval_delay(DelaySpec.piecewise_constant(0.5), 0.49) == 0.0


def test_piecewise_constant_snaps_lattice_points():
    # 0.3 / 0.1 is 2.9999999999999996 in floating point
    assert eval_delay(DelaySpec.piecewise_constant(0.1), 0.3) == pytest.approx(0.3)


def test_custom_delay_bound_violation():
    spec = DelaySpec.custom(lambda t: t, tau=1.0, C=1.0)
    assert eval_delay(spec, 1.0) == 1.0  # on the lattice the bound is attained
    with pytest.raises(DelayBoundViolation):
        eval_delay(spec, 0.5)
    with pytest.raises(DelayBoundViolation):
        eval_delay(DelaySpec.custom(lambda t: t - 3.0, tau=1.0, C=1.0), 0.5)


@pytest.mark.parametrize("label", BUILTINS)
def test_builtin_delay_bounds_on_dense_grid(label):
    model = builtin(label)
    ts = np.linspace(0.0, model.T, 10_000)
    for spec in model.delays:
        vals = np.array([eval_delay(spec, float(t)) for t in ts])
        upper = np.array([math.floor(t / spec.tau + 1e-9) * spec.tau for t in ts])
        assert (vals >= -model.C - 1e-12).all()
        assert (vals <= upper + 1e-12).all()
        assert (np.diff(vals) >= 0).all()


@given(st.floats(0, 10), st.floats(0, 10), st.sampled_from([0.1, 0.25, 0.5, 1.0, 0.3]))
def test_delays_monotone(t1, t2, tau):
    t1, t2 = min(t1, t2), max(t1, t2)
    for spec in (DelaySpec.fixed(tau), DelaySpec.piecewise_constant(tau)):
        assert eval_delay(spec, t1) <= eval_delay(spec, t2) + 1e-12


def test_builtin_unknown():
    with pytest.raises(UnknownModel):
        builtin("nope")


def test_builtin_registry_contents():
    assert set(BUILTINS) >= {
        "drift_only", "pure_sde_gbm", "linear_pure_delay", "delay_gbm", "monotone_cubic", "two_delay_mixed",
    }
    m = builtin("two_delay_mixed")
    assert m.k == 2 and [d.kind for d in m.delays] == ["fixed", "piecewise_constant"]
    assert builtin("monotone_cubic").condition_class == "A3"


def test_builtin_coefficients_values():
    y = np.array([[[2.0]]])
    x = np.array([[3.0]])
    assert builtin("drift_only").beta(0.0, y, x).tolist() == [[1.0]]
    assert builtin("monotone_cubic").beta(0.0, y, x).tolist() == [[-25.0]]
    assert builtin("monotone_cubic").alpha(0.0, y, x).tolist() == [[[0.4]]]
    assert builtin("delay_gbm").beta(0.0, y, x)[0, 0] == pytest.approx(0.6)
    assert builtin("delay_gbm").alpha(0.0, y, x)[0, 0, 0] == pytest.approx(1.2)
    assert builtin("linear_pure_delay").alpha(0.0, y, x)[0, 0, 0] == pytest.approx(0.6)
    m = builtin("two_delay_mixed")
    y2 = np.array([[[2.0], [1.0]]])
    assert m.beta(0.0, y2, x)[0, 0] == pytest.approx(0.6 - 0.2 - 3.0)
    assert m.alpha(0.0, y2, x)[0, 0, 0] == pytest.approx(0.5)


def test_coefficients_pure():
    m = builtin("delay_gbm")
    y = np.full((4, 1, 1), 0.7)
    x = np.full((4, 1), -1.3)
    assert np.array_equal(m.beta(0.2, y, x), m.beta(0.2, y, x))


@pytest.mark.parametrize("label", BUILTINS)
def test_validate_builtins_pass(label):
    report = validate_model(builtin(label), probes=1000, seed=3)
    assert report.passed, report.to_json()


def test_validate_reports_custom_bound_failure(lpd):
    bad = dataclasses.replace(lpd, delays=(DelaySpec.custom(lambda t: t, tau=0.5, C=0.5),))
    report = validate_model(bad, probes=1000, seed=0)
    assert not report.passed
    assert not report["delay_bound[1]"].passed
    assert report["delay_monotone[1]"].passed
    rows = __import__("json").loads(report.to_json())
    assert {"check", "passed", "detail"} == set(rows[0])


def test_validate_normalizes_horizon(lpd):
    m = dataclasses.replace(lpd, T=1.3)
    report = validate_model(m, probes=1000)
    assert report.passed
    assert report.model.T == pytest.approx(1.5)
    assert report.model.T_original == 1.3
    assert "extended" in report["horizon"].detail


def test_validate_flags_discontinuous_initial_segment(lpd):
    xi = InitialSegment(0.5, 1, lambda t: [1.0 if t < -0.25 else 0.0])
    report = validate_model(dataclasses.replace(lpd, initial=xi), probes=50, seed=1)
    assert not report["initial_continuity"].passed
    assert report["delay_bound[1]"].passed


def test_normalized_horizon_restriction_is_exact(lpd):
    m = dataclasses.replace(lpd, T=1.3)
    ext = normalize_horizon(m)
    n = 10
    a = integrate(m, sample_path(1, m.T, n, 42), n)
    b = integrate(ext, sample_path(1, ext.T, n, 42), n)
    assert b.values.shape[0] == 16
    assert np.array_equal(a.values, b.values[:14])


def test_normalized_coefficients_switch_off(lpd):
    ext = normalize_horizon(dataclasses.replace(lpd, T=1.3))
    y = np.ones((2, 1, 1))
    x = np.ones((2, 1))
    t = np.array([1.2, 1.4])
    assert ext.beta(t, y, x)[:, 0].tolist() == [0.5, 0.0]
    assert ext.alpha(t, y, x)[:, 0, 0].tolist() == [0.3, 0.0]


def test_seeded_initial_segment_is_deterministic():
    xi = InitialSegment(1.0, 1, lambda t, seed: [np.sin(seed + t)], seed=7)
    assert xi(-0.5)[0] == np.sin(6.5)
    assert np.array_equal(xi(-0.25), xi(-0.25))


def test_model_rejects_inconsistent_shapes():
    coeffs = CoefficientField(1, 1, 2, beta=lambda t, y, x: x, alpha=lambda t, y, x: x[..., None])
    with pytest.raises(ValueError):
        SddeModel(coeffs, (DelaySpec.fixed(1.0),), InitialSegment.constant(1.0, C=1.0), 1.0, "bad")
