import networkx as nx
import numpy as np
import pytest
import scipy.sparse as sp
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from returntime import (
    CycleReturnTime,
    DegreeLaw,
    ExactReturnTime,
    MeanFieldReturnTime,
    PopulationDynamics,
    TreeReturnTime,
    combined_F,
    first_return_exact,
    gen_gnm,
    gen_random_regular,
)
from returntime._validation import as_graph
from returntime.errors import ValidationError

ESTIMATORS = [ExactReturnTime(T=30), MeanFieldReturnTime(T=30), TreeReturnTime(T=30), CycleReturnTime(r=2, T=30)]


@pytest.fixture(scope="module")
def graph():
    return gen_gnm(80, 200, seed=3)


@pytest.mark.parametrize("est", ESTIMATORS, ids=lambda e: type(e).__name__)
def test_clone_and_params(est):
    c = clone(est)
    assert c.get_params() == est.get_params()
    assert c is not est
    c.set_params(T=12)
    assert c.get_params()["T"] == 12


@pytest.mark.parametrize("est", ESTIMATORS, ids=lambda e: type(e).__name__)
def test_predict_shape_and_unfitted(est, graph):
    with pytest.raises(NotFittedError):
        clone(est).predict([0])
    Y = clone(est).fit(graph).predict([0, 5])
    assert Y.shape == (2, 31)
    assert np.all(Y >= -1e-15)
    assert Y[:, 0].tolist() == [0.0, 0.0]


def test_exact_matches_oracle(graph):
    Y = ExactReturnTime(T=40).fit(graph).predict([3])
    np.testing.assert_allclose(Y[0], first_return_exact(graph, 3, 40).y, atol=1e-16)


def test_tree_matches_combined(graph):
    est = TreeReturnTime(T=40).fit(graph)
    for i in (0, 17):
        rep = combined_F(graph, i, 40)
        np.testing.assert_allclose(est.predict([i])[0], rep.y, atol=1e-14)
        assert est.reports([i])[0].h.h == pytest.approx(rep.h.h, rel=1e-10)


def test_cycle_r0_matches_tree(graph):
    a = CycleReturnTime(r=0, T=40).fit(graph)
    b = TreeReturnTime(T=40).fit(graph)
    np.testing.assert_allclose(a.predict(), b.predict(), atol=1e-12)
    np.testing.assert_allclose(a.predict_slope(), b.predict_slope(), rtol=1e-10)
    assert a.neighbourhood_sizes().shape == (graph.n, 3)


def test_cycle_without_series(graph):
    est = CycleReturnTime(r=2, series=False).fit(graph)
    assert np.all(est.predict_slope() > 0)
    with pytest.raises(ValidationError):
        est.predict([0])


def test_slopes_agree_on_regular_graph():
    g = gen_random_regular(2000, 4, seed=1)
    exact = ExactReturnTime(T=3000).fit(g).predict_slope([0, 1, 2])
    tree = TreeReturnTime(T=10).fit(g).predict_slope([0, 1, 2])
    np.testing.assert_allclose(tree, exact, rtol=0.05)


def test_mean_field_slope(graph):
    s = MeanFieldReturnTime().fit(graph).predict_slope([0])
    pi = graph.degrees[0] / (2 * graph.m)
    assert s[0] == pytest.approx(-np.log1p(-pi))


def test_graph_inputs_are_equivalent(triangle):
    A = np.array([[0, 1, 1], [1, 0, 1], [1, 1, 0]])
    forms = [triangle, "0 1\n1 2\n0 2\n", A, sp.csr_matrix(A), np.array([[0, 1], [1, 2], [0, 2]]), nx.complete_graph(3)]
    for X in forms:
        assert as_graph(X) == triangle


@pytest.mark.parametrize(
    "X",
    [np.array([[0, 1], [1, 0]]) * 2, np.array([[0, 1], [0, 0]]), np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]), "nonsense"],
)
def test_bad_graph_inputs(X):
    with pytest.raises(ValidationError):
        as_graph(X)


def test_disconnected_and_bad_nodes(graph):
    with pytest.raises(ValidationError):
        TreeReturnTime().fit("0 1\n2 3\n")
    est = MeanFieldReturnTime(T=5).fit(graph)
    with pytest.raises(ValidationError):
        est.predict([graph.n])
    with pytest.raises(ValidationError):
        MeanFieldReturnTime(T=0).fit(graph)


def test_population_dynamics_estimator():
    est = PopulationDynamics(N=2000, sweeps=200, seed=3).fit(DegreeLaw.regular(6))
    pred = est.predict_slope(2**15, samples=100)
    np.testing.assert_allclose(pred.slope, -np.log1p(-1 / 40959.375), rtol=1e-6)
    again = clone(est).fit({6: 1.0}).predict_slope(2**15, samples=100)
    np.testing.assert_array_equal(again.slope, pred.slope)
