import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qinv.errors import RejectedInputError
from qinv.schedules import Schedule, as_schedule


def test_eval_examples():
    assert Schedule.constant(0.5)(3.0) == 0.5
    assert Schedule.polynomial([0, 2])(1.5) == 3.0
    assert Schedule.table([0, 1], [0, 2])(0.25) == 0.5


def test_eval_on_arrays():
    s = Schedule.sinusoid(2.0, 3.0, horizon=1.0)
    t = np.linspace(0, 1, 7)
    np.testing.assert_allclose(s(t), 2 * np.sin(3 * t))
    np.testing.assert_allclose([s(float(x)) for x in t], s(t), rtol=0, atol=1e-15)


@pytest.mark.parametrize("t", [-0.1, 2.5, np.nan])
def test_eval_outside_horizon(t):
    s = Schedule.constant(1.0, horizon=2.0)
    with pytest.raises(RejectedInputError):
        s(t)
    with pytest.raises(RejectedInputError):
        s.integral(t)
    with pytest.raises(RejectedInputError):
        s.derivative(t)


def test_table_horizon_defaults_to_last_knot():
    s = Schedule.table([0, 1, 2], [0, 1, 0])
    assert s.horizon == 2.0
    with pytest.raises(RejectedInputError):
        s(2.1)


@pytest.mark.parametrize("times,values", [([0, 1, 1], [0, 1, 2]), ([0, 2, 1], [0, 1, 2]),
                                          ([0], [1]), ([0, 1], [1]), ([0.5, 1], [1, 1])])
def test_bad_tables(times, values):
    with pytest.raises(RejectedInputError):
        Schedule.table(times, values)


def test_table_must_cover_the_horizon():
    with pytest.raises(RejectedInputError):
        Schedule.table([0, 1], [0, 1], horizon=2.0)


def test_integral_examples():
    g = 0.7
    t = np.linspace(0, 3, 13)
    np.testing.assert_allclose(Schedule.constant(g).integral(t), g * t, rtol=1e-15)
    g0, w = 1.3, 2.1
    s = Schedule.sinusoid(g0, w)
    np.testing.assert_allclose(s.integral(t), g0 * (1 - np.cos(w * t)) / w, atol=1e-14)
    p = Schedule.polynomial([1, -2, 3])
    np.testing.assert_allclose(p.integral(t), t - t**2 + t**3, atol=1e-13)


def test_table_integral_against_fine_riemann_sum():
    rng = np.random.default_rng(3)
    knots = np.concatenate(([0.0], np.sort(rng.uniform(0, 2, 10)), [2.0]))
    s = Schedule.table(knots, rng.normal(size=knots.size) + 3.0)
    for t in (0.37, 1.0, 2.0):
        # midpoint rule with 1e5 cells is an independent brute-force oracle
        n = 100_000
        mids = (np.arange(n) + 0.5) * (t / n)
        brute = np.sum(s(mids)) * (t / n)
        assert abs(s.integral(t) - brute) <= 1e-6 * abs(brute)


def test_integral_at_zero_is_exactly_zero():
    kinds = [Schedule.constant(2.0), Schedule.polynomial([1, 2, 3]),
             Schedule.sinusoid(1.0, 3.0, phase=0.3, offset=1.0),
             Schedule.table([0, 1], [5, 6])]
    for s in kinds:
        assert s.integral(0.0) == 0.0


def test_derivative_examples():
    assert Schedule.constant(4.0).derivative(1.0) == 0.0
    assert Schedule.polynomial([1, 3]).derivative(0.7) == 3.0


def test_sinusoid_derivative_against_finite_difference():
    g0, w = 1.5, 4.0
    s = Schedule.sinusoid(g0, w, phase=0.2)
    h = 1e-5
    for t in np.linspace(0.1, 1.9, 10):
        fd = (s(t + h) - s(t - h)) / (2 * h)
        assert abs(s.derivative(t) - fd) <= 1e-6 * abs(g0 * w)


def test_table_derivative():
    s = Schedule.table([0, 1, 2], [0, 2, 1])
    assert s.derivative(0.5) == pytest.approx(2.0, rel=1e-9)
    assert s.derivative(1.5) == pytest.approx(-1.0, rel=1e-9)
    with pytest.raises(RejectedInputError):
        s.derivative(1.0)


SMOOTH = [Schedule.constant(1.3), Schedule.polynomial([0.5, -1, 2, 0.25]),
          Schedule.sinusoid(0.8, 2.5, phase=0.4, offset=1.0)]


@pytest.mark.parametrize("s", SMOOTH, ids=["constant", "polynomial", "sinusoid"])
def test_fundamental_theorem(s):
    """Forward differences converge at first order, central ones at second.

    The forward quotient has an O(h) error, so second order is measured on the
    central quotient (integral(t+h) - integral(t-h)) / 2h.
    """
    t = 0.9
    hs = [1e-3, 1e-4, 1e-5]
    fwd = [abs((s.integral(t + h) - s.integral(t)) / h - s(t)) for h in hs]
    cen = [abs((s.integral(t + h) - s.integral(t - h)) / (2 * h) - s(t)) for h in hs]
    assert fwd[-1] <= 1e-4
    assert max(cen) <= 1e-5
    if s.kind != "constant":
        assert fwd[0] / fwd[1] == pytest.approx(10, rel=0.05)
        # second order until roundoff takes over
        assert cen[0] / cen[1] == pytest.approx(100, rel=0.05)


def test_table_fundamental_theorem_between_knots():
    s = Schedule.table([0, 1, 2], [1, 3, 2])
    for t in (0.3, 1.4):
        h = 1e-5
        assert abs((s.integral(t + h) - s.integral(t)) / h - s(t)) <= 1e-4


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=5), st.floats(0, 2))
@settings(max_examples=60, deadline=None)
def test_polynomial_integral_derivative_consistency(coeffs, t):
    s = Schedule.polynomial(coeffs)
    h = 1e-4
    if t < h:
        return
    cen = (s.integral(t + h) - s.integral(t - h)) / (2 * h)
    scale = 1 + sum(abs(c) for c in coeffs) * 8
    assert abs(cen - s(t)) <= 1e-6 * scale


@given(st.floats(-5, 5), st.floats(0.1, 10), st.floats(-3, 3), st.floats(-2, 2))
@settings(max_examples=60, deadline=None)
def test_sinusoid_integral_matches_quadrature(a, w, ph, off):
    s = Schedule.sinusoid(a, w, ph, off, horizon=1.0)
    n = 4000
    x = np.linspace(0, 1, n + 1)
    y = s(x)
    trap = np.sum(0.5 * (y[1:] + y[:-1])) / n
    assert abs(s.integral(1.0) - trap) <= 1e-5 * (1 + abs(a) * w**2)


def test_descriptor_round_trip():
    for s in [Schedule.constant(1.0), Schedule.polynomial([1, 2]),
              Schedule.sinusoid(1.0, 2.0, 0.5, 0.1), Schedule.table([0, 1], [1, 2])]:
        assert Schedule.from_dict(s.to_dict()) == s


def test_descriptor_errors():
    with pytest.raises(RejectedInputError):
        Schedule.from_dict({"kind": "spline"})
    with pytest.raises(RejectedInputError):
        Schedule.from_dict({"kind": "sinusoid", "amplitude": 1.0})
    with pytest.raises(RejectedInputError):
        Schedule.sinusoid(1.0, 0.0)


def test_as_schedule():
    assert as_schedule(2.0) == Schedule.constant(2.0)
    assert as_schedule({"kind": "constant", "value": 1}) == Schedule.constant(1.0)
    s = Schedule.polynomial([1])
    assert as_schedule(s) is s
