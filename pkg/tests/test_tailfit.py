import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from returntime.approx import combined_F, tree_message_fixed_point
from returntime.cycle import final_F
from returntime.errors import ValidationError
from returntime.exact import first_return_exact
from returntime.graph import gen_gnm, gen_random_regular
from returntime.report import TailMean
from returntime.tailfit import fit_tail_slope, slope_from_h


def test_geometric_is_exact():
    t = np.arange(201)
    y = 0.3 * np.exp(-0.05 * t)
    y[0] = 0.0
    fit = fit_tail_slope(y)
    assert fit.slope == pytest.approx(0.05, abs=1e-12)
    assert fit.r2 == pytest.approx(1.0)
    assert fit.window == (101, 200)


def test_period_two_uses_even_entries():
    t = np.arange(201)
    y = np.where(t % 2 == 0, np.exp(-0.1 * t), 0.0)
    y[0] = 0.0
    fit = fit_tail_slope(y)
    assert fit.slope == pytest.approx(0.1, abs=1e-12)
    assert fit.window[0] % 2 == 0 and fit.window[1] % 2 == 0


def test_floor_excludes_underflow():
    t = np.arange(400)
    y = np.exp(-0.2 * t)
    y[0] = 0.0
    fit = fit_tail_slope(y)
    assert fit.window[1] < 170  # exp(-0.2 t) drops below 1e-14 near t = 161
    assert fit.slope == pytest.approx(0.2, abs=1e-10)


def test_slope_from_h():
    assert slope_from_h(2.0) == pytest.approx(math.log(2))
    assert slope_from_h(TailMean(40959.375)) == pytest.approx(2.4415e-5, rel=1e-4)
    with pytest.raises(ValidationError):
        slope_from_h(TailMean.disabled())
    with pytest.raises(ValidationError):
        slope_from_h(1.0)


def test_too_few_points():
    with pytest.raises(ValidationError):
        fit_tail_slope(np.zeros(100))
    with pytest.raises(ValidationError):
        fit_tail_slope(np.exp(-np.arange(10.0)))
    with pytest.raises(ValidationError):
        fit_tail_slope(np.exp(-np.arange(100.0)), window_frac=0.0)


def test_window_robustness_on_exact_tail():
    g = gen_gnm(60, 150, seed=3)
    y = first_return_exact(g, 5, 600).y
    a = fit_tail_slope(y, window_frac=0.5).slope
    b = fit_tail_slope(y, window_frac=0.25).slope
    assert abs(a - b) < 0.01 * a


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 0.15))
def test_geometric_property(a):
    t = np.arange(201)
    y = np.zeros(201)
    y[1:] = (1 - a) ** (t[1:] - 1) * a
    assert fit_tail_slope(y).slope == pytest.approx(-math.log1p(-a), abs=1e-12)


def test_fit_agrees_with_tail_mean_on_regular_graph():
    g = gen_random_regular(2**12, 6, seed=1)
    series = tree_message_fixed_point(g, 200)
    dual = tree_message_fixed_point(g, mode="dual")
    for i in (0, 100, 2000):
        rep = combined_F(g, i, 200, series_msgs=series, dual_msgs=dual)
        assert fit_tail_slope(rep.y).slope == pytest.approx(slope_from_h(rep.h), rel=0.05)


def test_window_stability_on_approximations():
    g = gen_gnm(300, 900, seed=2)
    for rep in (combined_F(g, 5, 400), final_F(g, 5, 2, 400)):
        a = fit_tail_slope(rep.y, window_frac=0.5).slope
        b = fit_tail_slope(rep.y, window_frac=0.25).slope
        assert abs(a - b) < 0.01 * a
