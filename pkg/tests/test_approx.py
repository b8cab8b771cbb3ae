import mpmath
import numpy as np
import pytest

from returntime.approx import (
    closed_form_regular,
    combined_F,
    geometric_correction,
    mean_field_F,
    regular_tail_mean,
    tail_mean,
    tail_mean_array,
    tree_F,
    tree_marginal_series,
    tree_marginal_stats,
    tree_message_fixed_point,
)
from returntime.errors import ValidationError
from returntime.exact import first_return_exact
from returntime.graph import Graph, gen_gnm, gen_random_regular
from returntime.report import TailMean, corrected_stats
from returntime.series import DualPair, PowerSeries, ps_recip

from conftest import random_tree

EDGE = Graph(2, [(0, 1)])


def regular_message_series(d, T):
    """Scalar expansion of M = z^2 (d-1)/d^2 / (1 - M), order by order."""
    M = PowerSeries.zero(T)
    for _ in range(T // 2 + 2):
        M = (ps_recip(1.0 - M) * ((d - 1) / d**2)).shift(2)
    return M


def test_mean_field_triangle(triangle):
    F = mean_field_F(triangle, 0, 10)
    assert F[1] == pytest.approx(1 / 3) and F[2] == pytest.approx(2 / 9)
    assert F[0] == 0


def test_mean_field_properties():
    g = gen_gnm(100, 300, seed=1)
    T = 3000
    for i in (0, 10):
        c = mean_field_F(g, i, T).coeffs
        pi = g.degrees[i] / (2 * g.m)
        np.testing.assert_allclose(c[1:], pi * (1 - pi) ** np.arange(T), rtol=1e-10)
        # mass beyond T is (1 - pi)**T
        assert c.sum() + (1 - pi) ** T == pytest.approx(1.0, abs=1e-12)


def test_tree_messages_single_edge():
    msgs = tree_message_fixed_point(EDGE, 10)
    assert not msgs.series.any()
    np.testing.assert_array_equal(tree_F(EDGE, 0, msgs).coeffs, PowerSeries.monomial(2, 10).coeffs)


def test_tree_messages_path(path3):
    msgs = tree_message_fixed_point(path3, 12)
    np.testing.assert_allclose(msgs[0, 1].coeffs, PowerSeries.monomial(2, 12, 0.5).coeffs)
    F = tree_F(path3, 0, msgs).coeffs
    want = np.zeros(13)
    want[2::2] = 0.5 ** np.arange(1, 7)
    np.testing.assert_allclose(F, want, atol=1e-16)


def test_tree_messages_regular_expansion():
    d, T = 6, 40
    g = gen_random_regular(200, d, seed=3)
    msgs = tree_message_fixed_point(g, T)
    M = regular_message_series(d, T).coeffs
    np.testing.assert_allclose(msgs.series, np.broadcast_to(M, msgs.series.shape), atol=1e-15)


def test_tree_schedules_agree():
    g = gen_gnm(150, 300, seed=2)
    a = tree_message_fixed_point(g, 30, schedule="orders")
    b = tree_message_fixed_point(g, 30, schedule="sweeps")
    np.testing.assert_allclose(a.series, b.series, atol=1e-15)


def test_tree_is_exact_on_trees():
    g = random_tree(40, seed=1)
    msgs = tree_message_fixed_point(g, 80)
    rows = tree_marginal_series(g, [0, 5, 39], msgs)
    for row, i in zip(rows, [0, 5, 39]):
        np.testing.assert_allclose(row, first_return_exact(g, i, 80).y, atol=1e-14)
        np.testing.assert_allclose(tree_F(g, i, msgs).coeffs, row, atol=1e-15)


def test_dual_stats_closed_forms(path3):
    d = tree_F(path3, 0, tree_message_fixed_point(path3, mode="dual"))
    assert (d.val, d.der) == pytest.approx((1.0, 4.0))
    d = tree_F(EDGE, 0, tree_message_fixed_point(EDGE, mode="dual"))
    assert (d.val, d.der) == pytest.approx((1.0, 2.0))
    g = gen_random_regular(500, 6, seed=1)
    msgs = tree_message_fixed_point(g, mode="dual")
    val, der = tree_marginal_stats(g, msgs)
    np.testing.assert_allclose(val, 0.2, rtol=1e-10)
    np.testing.assert_allclose(der, 0.5, rtol=1e-9)


def test_dual_matches_series_derivative():
    g = gen_gnm(80, 200, seed=6)
    series = tree_message_fixed_point(g, 3000)
    dual = tree_message_fixed_point(g, mode="dual")
    val, der = tree_marginal_stats(g, dual)
    c = tree_F(g, 7, series).coeffs
    assert c.sum() == pytest.approx(val[7], rel=1e-8)
    assert np.dot(np.arange(len(c)), c) == pytest.approx(der[7], rel=1e-6)


def test_tail_mean_values(path3):
    h = tail_mean_array(6 * 2**15, 6, 0.2, 0.5)
    assert h == pytest.approx(40959.375)
    assert regular_tail_mean(2**15, 6) == pytest.approx(40959.375)
    assert not tail_mean(path3, 0, DualPair(1.0, 4.0)).enabled
    assert not tail_mean(EDGE, 0, DualPair(1.0, 2.0)).enabled


def test_combined_single_edge():
    rep = combined_F(EDGE, 0, 10)
    np.testing.assert_array_equal(rep.y, PowerSeries.monomial(2, 10).coeffs)


def test_combined_restores_normalisation_and_kac():
    g = gen_gnm(300, 900, seed=8)
    for i in (0, 50, 120):
        rep = combined_F(g, i, 50)
        tot = rep.total_stats()
        assert tot.val == pytest.approx(1.0, abs=1e-12)
        assert tot.der == pytest.approx(2 * g.m / g.degrees[i], rel=1e-10)


def test_geometric_correction_coefficients():
    c = geometric_correction(0.2, TailMean(10.0), 5)
    np.testing.assert_allclose(c[1:], 0.8 / 10 * 0.9 ** np.arange(5))
    assert not geometric_correction(0.2, TailMean.disabled(), 5).any()
    s = corrected_stats(DualPair(0.2, 0.5), TailMean(10.0))
    assert s.val == pytest.approx(1.0) and s.der == pytest.approx(0.5 + 0.8 * 10)


def test_closed_form_low_order():
    c = closed_form_regular(2**15, 6, 10).coeffs
    h = regular_tail_mean(2**15, 6)
    assert c[2] == pytest.approx(1 / 6 + (0.8 / h) * (1 - 1 / h), rel=1e-12)


def test_closed_form_singular():
    with pytest.raises(ValidationError):
        regular_tail_mean(100, 2)
    with pytest.raises(ValidationError):
        closed_form_regular(100, 2, 10)


def test_closed_form_against_taylor_oracle():
    n, d, T = 2**15, 6, 24
    h = mpmath.mpf((d - 1) * (n * d - 2 * n - 2)) / (d - 2) ** 2

    def f(z):
        tree = 2 * z**2 / (d + mpmath.sqrt(d * d + 4 * z**2 - 4 * d * z**2))
        return tree + (z - z / (d - 1)) / (z + h - z * h)

    with mpmath.workdps(40):
        want = np.array([float(x) for x in mpmath.taylor(f, 0, T)])
    got = closed_form_regular(n, d, T).coeffs
    np.testing.assert_allclose(got, want, atol=1e-9, rtol=1e-9)


def test_closed_form_tree_part_matches_messages():
    d, T = 6, 40
    M = regular_message_series(d, T)
    tree = (ps_recip(1.0 - M) * (1.0 / d)).shift(2).coeffs
    cf = closed_form_regular(2**15, d, T).coeffs - geometric_correction(1 / (d - 1), TailMean(regular_tail_mean(2**15, d)), T)
    np.testing.assert_allclose(cf, tree, atol=1e-15)
