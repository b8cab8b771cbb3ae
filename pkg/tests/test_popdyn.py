import io
import math

import numpy as np
import pytest
from scipy import stats

from returntime.approx import tree_message_fixed_point
from returntime.errors import ValidationError
from returntime.graph import DegreeLaw, gen_gnm
from returntime.popdyn import (
    node_slopes,
    popdyn_solve,
    predict_tail_slopes,
    write_population_csv,
    write_slopes_csv,
)


def test_regular_collapses_to_fixed_point():
    pop = popdyn_solve(DegreeLaw.regular(6), 10_000, 500, seed=1)
    assert np.abs(pop.val - 1 / 6).max() < 1e-6
    assert pop.val.var() < 1e-10
    # derivative from iterating the scalar dual recursion M = (d-1)/d^2 * z^2/(1 - M)
    M, dM = 1 / 6, 0.0
    for _ in range(2000):
        M, dM = 5 / 36 / (1 - M), 5 / 36 * (2 / (1 - M) + dM / (1 - M) ** 2)
    np.testing.assert_allclose(pop.der, dM, rtol=1e-6)


def test_regular_slopes_match_closed_form():
    pop = popdyn_solve(DegreeLaw.regular(6), 10_000, 500, seed=1)
    pred = predict_tail_slopes(pop, DegreeLaw.regular(6), 2**15, 2000, seed=2)
    want = -math.log1p(-1 / 40959.375)
    np.testing.assert_allclose(pred.slope, want, rtol=1e-6)
    assert pred.skipped == 0
    assert set(pred.by_degree()) == {6}


def test_modes_agree_on_regular_law():
    a = popdyn_solve(DegreeLaw.regular(4), 2000, 300, seed=3, mode="sequential")
    b = popdyn_solve(DegreeLaw.regular(4), 2000, 300, seed=3, mode="snapshot")
    np.testing.assert_allclose(a.val, b.val, atol=1e-9)


def test_deterministic_given_seed():
    a = popdyn_solve(DegreeLaw.poisson(3.0), 2000, 50, seed=7)
    b = popdyn_solve(DegreeLaw.poisson(3.0), 2000, 50, seed=7)
    np.testing.assert_array_equal(a.val, b.val)
    np.testing.assert_array_equal(a.der, b.der)


def test_values_stay_below_one():
    pop = popdyn_solve(DegreeLaw.explicit({1: 0.3, 2: 0.3, 5: 0.4}), 5000, 200, seed=4)
    assert np.all(pop.val >= 0) and np.all(pop.val < 1)
    assert np.all(pop.val[pop.k == 1] == 0)


def test_poisson_slopes_positive():
    law = DegreeLaw.poisson(6.0)
    pop = popdyn_solve(law, 10_000, 200, seed=5)
    pred = predict_tail_slopes(pop, law, 10_000, 5000, seed=6)
    assert len(pred.slope) + pred.skipped == 5000
    assert np.all(pred.slope > 0)
    assert np.all(pred.k >= 1)


def test_node_slopes():
    pop = popdyn_solve(DegreeLaw.regular(6), 2000, 300, seed=1)
    s = node_slopes(pop, [6, 6, 6], 6 * 2**15, seed=0)
    np.testing.assert_allclose(s, -math.log1p(-1 / 40959.375), rtol=1e-6)
    with pytest.raises(ValidationError):
        node_slopes(pop, [0, 6], 100.0)


@pytest.mark.parametrize(
    "kwargs",
    [dict(N=999), dict(sweeps=-1), dict(mode="parallel")],
)
def test_argument_errors(kwargs):
    args = dict(law=DegreeLaw.regular(3), N=1000, sweeps=1, seed=0) | kwargs
    with pytest.raises(ValidationError):
        popdyn_solve(**args)


def test_zero_mean_law():
    with pytest.raises(ValidationError):
        DegreeLaw.explicit({0: 1.0})
    with pytest.raises(ValidationError):
        popdyn_solve("poisson", 1000, 1)


def test_csv_writers():
    pop = popdyn_solve(DegreeLaw.regular(3), 1000, 5, seed=0)
    buf = io.StringIO()
    write_population_csv(pop, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "F_val,F_der,k" and len(lines) == 1001
    pred = predict_tail_slopes(pop, DegreeLaw.regular(3), 100, 10, seed=1)
    buf = io.StringIO()
    write_slopes_csv(pred, buf)
    assert buf.getvalue().splitlines()[0] == "k,slope"


@pytest.mark.slow
def test_poisson_stationarity():
    law = DegreeLaw.poisson(6.0)
    early = popdyn_solve(law, 100_000, 900, seed=1)
    pop = popdyn_solve(law, 100_000, 1000, seed=1)
    # same seed: the shorter run is a snapshot of the longer one
    assert pop.mean_history[:900] == early.mean_history
    hist = np.array(pop.mean_history)
    assert abs(hist[-50:].mean() - hist[-100:-50].mean()) < 1e-4
    assert stats.ks_2samp(early.val, pop.val).pvalue > 0.01
    # consistency with dual tree messages on a graph of 10^5 edges from the same law
    g = gen_gnm(33_334, 100_000, seed=2)
    msgs = tree_message_fixed_point(g, mode="dual")
    se = math.hypot(pop.val.std() / math.sqrt(pop.N), msgs.val.std() / math.sqrt(len(msgs.val)))
    assert abs(pop.val.mean() - msgs.val.mean()) < 2 * se
