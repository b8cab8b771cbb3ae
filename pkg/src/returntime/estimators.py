"""Estimator-style front ends.

Each estimator is configured by constructor parameters only, ``fit`` takes
a graph (anything :func:`as_graph` accepts) and stores fitted state in
attributes with a trailing underscore, and ``predict(nodes)`` returns first
return probabilities as an ``(len(nodes), T+1)`` array whose column ``t``
is ``Y(t)``. ``transform`` is the same map, so the distributions can feed a
downstream pipeline as features. ``predict_slope`` gives per-node tail
decay rates.

>>> from returntime import gen_random_regular, TreeReturnTime
>>> est = TreeReturnTime(T=50).fit(gen_random_regular(100, 3, seed=0))
>>> est.predict([0]).shape
(1, 51)
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import approx, cycle
from ._validation import as_graph, check_connected, check_horizon, check_nodes, check_radius
from .errors import ValidationError
from .exact import first_return_exact_many
from .graph import DegreeLaw
from .popdyn import popdyn_solve, predict_tail_slopes
from .report import ReturnReport, TailMean
from .series import DEFAULT_ORDER
from .tailfit import fit_tail_slope

__all__ = [
    "ExactReturnTime",
    "MeanFieldReturnTime",
    "TreeReturnTime",
    "CycleReturnTime",
    "PopulationDynamics",
]


class _ReturnTimeBase(BaseEstimator):
    def _validate_fit(self, X):
        self.T_ = check_horizon(self.T)
        g = check_connected(as_graph(X))
        if g.m == 0:
            raise ValidationError("graph has no edges")
        self.graph_ = g
        self.n_nodes_ = g.n
        return g

    def predict(self, nodes=None) -> np.ndarray:
        """First-return probabilities ``Y(0..T)`` of ``nodes`` (all nodes when ``None``)."""
        check_is_fitted(self, "graph_")
        return self._predict(check_nodes(self.graph_, nodes))

    def transform(self, nodes=None) -> np.ndarray:
        return self.predict(nodes)

    def fit_predict(self, X, nodes=None) -> np.ndarray:
        return self.fit(X).predict(nodes)


class ExactReturnTime(_ReturnTimeBase):
    """Taboo-iteration oracle.

    Parameters
    ----------
    T : int
        Horizon.
    block : int
        Walkers propagated together in one sparse-dense product.
    """

    def __init__(self, T: int = DEFAULT_ORDER, block: int = 256):
        self.T = T
        self.block = block

    def fit(self, X, y=None):
        self._validate_fit(X)
        return self

    def _predict(self, nodes):
        return first_return_exact_many(self.graph_, nodes, self.T_, block=int(self.block))

    def predict_slope(self, nodes=None, floor: float = 1e-14, window_frac: float = 0.5) -> np.ndarray:
        """Least-squares tail slopes of the exact distributions."""
        Y = self.predict(nodes)
        return np.array([fit_tail_slope(y, floor, window_frac).slope for y in Y])


class MeanFieldReturnTime(_ReturnTimeBase):
    """Geometric law with success probability ``k_i / 2m``."""

    def __init__(self, T: int = DEFAULT_ORDER):
        self.T = T

    def fit(self, X, y=None):
        self._validate_fit(X)
        return self

    def _predict(self, nodes):
        g = self.graph_
        pi = g.degrees[nodes] / (2.0 * g.m)
        t = np.arange(1, self.T_ + 1)
        out = np.zeros((len(nodes), self.T_ + 1))
        out[:, 1:] = (1.0 - pi[:, None]) ** (t - 1) * pi[:, None]
        return out

    def predict_slope(self, nodes=None) -> np.ndarray:
        check_is_fitted(self, "graph_")
        nodes = check_nodes(self.graph_, nodes)
        pi = self.graph_.degrees[nodes] / (2.0 * self.graph_.m)
        return -np.log1p(-pi)


class _MessageBase(_ReturnTimeBase):
    def reports(self, nodes=None) -> list:
        """One :class:`ReturnReport` per node."""
        check_is_fitted(self, "graph_")
        nodes = check_nodes(self.graph_, nodes)
        Y = self._predict(nodes)
        return [
            ReturnReport(node=int(i), y=y, k=int(self.graph_.degrees[i]), F1=float(self.F1_[i]),
                         F1prime=float(self.F1prime_[i]), h=_tm(self.h_[i]))
            for i, y in zip(nodes, Y)
        ]

    def predict_slope(self, nodes=None) -> np.ndarray:
        """``-ln(1 - 1/h)`` per node; ``nan`` where the tail is disabled."""
        check_is_fitted(self, "graph_")
        h = self.h_[check_nodes(self.graph_, nodes)]
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(h > 1.0, -np.log1p(-1.0 / h), np.nan)

    def _correct(self, nodes, Ft):
        out = Ft.copy()
        for row, i in enumerate(nodes):
            out[row] += approx.geometric_correction(float(self.F1_[i]), _tm(self.h_[i]), self.T_)
        return out


def _tm(h) -> TailMean:
    return TailMean.disabled() if np.isnan(h) else TailMean(float(h))


class TreeReturnTime(_MessageBase):
    """Tree message passing with the geometric tail correction.

    Parameters
    ----------
    T : int
        Series order.
    tol, max_sweeps :
        Stopping rule for the ``z = 1`` sweeps.

    Attributes
    ----------
    series_messages_, dual_messages_ : MessageMap
    F1_, F1prime_ : ndarray
        ``F~_i(1)`` and ``F~_i'(1)`` per node, before the correction.
    h_ : ndarray
        Tail means, ``nan`` where disabled.
    """

    def __init__(self, T: int = DEFAULT_ORDER, tol: float = 1e-12, max_sweeps: int = 100_000):
        self.T = T
        self.tol = tol
        self.max_sweeps = max_sweeps

    def fit(self, X, y=None):
        g = self._validate_fit(X)
        self.series_messages_ = approx.tree_message_fixed_point(g, self.T_, "series")
        self.dual_messages_ = approx.tree_message_fixed_point(
            g, mode="dual", tol=self.tol, max_sweeps=self.max_sweeps)
        self.F1_, self.F1prime_ = approx.tree_marginal_stats(g, self.dual_messages_)
        self.h_ = approx.tail_mean_array(2.0 * g.m, g.degrees, self.F1_, self.F1prime_)
        return self

    def predict_uncorrected(self, nodes=None) -> np.ndarray:
        check_is_fitted(self, "graph_")
        return approx.tree_marginal_series(self.graph_, check_nodes(self.graph_, nodes), self.series_messages_)

    def _predict(self, nodes):
        Ft = approx.tree_marginal_series(self.graph_, nodes, self.series_messages_)
        return self._correct(nodes, Ft)


class CycleReturnTime(_MessageBase):
    """Message passing on r-neighbourhoods with the geometric tail correction.

    Parameters
    ----------
    r : int
        Neighbourhood radius; 0 is the tree approximation.
    T : int
        Series order.
    rule : {"edges", "node"}
        Message neighbourhood convention, see :mod:`returntime.cycle`.
    series : bool
        Also solve the series messages. Without them only ``predict_slope``
        and the statistics are available, which is far cheaper in memory.
    """

    def __init__(self, r: int = cycle.DEFAULT_R, T: int = DEFAULT_ORDER, rule: str = "edges",
                 series: bool = True, tol: float = 1e-12, max_sweeps: int = 100_000):
        self.r = r
        self.T = T
        self.rule = rule
        self.series = series
        self.tol = tol
        self.max_sweeps = max_sweeps

    def fit(self, X, y=None):
        g = self._validate_fit(X)
        r = check_radius(self.r)
        self.model_ = cycle.CycleModel(g, r, self.rule)
        self.dual_messages_ = cycle.cycle_message_fixed_point(
            g, r, mode="dual", model=self.model_, tol=self.tol, max_sweeps=self.max_sweeps)
        self.series_messages_ = (cycle.cycle_message_fixed_point(g, r, self.T_, "series", model=self.model_)
                                 if self.series else None)
        v, d = cycle.marginal_stats(self.model_, self.dual_messages_)
        self.F1_, self.F1prime_ = v, d
        self.h_ = approx.tail_mean_array(2.0 * g.m, g.degrees, v, d)
        return self

    def _predict(self, nodes):
        if self.series_messages_ is None:
            raise ValidationError("fitted with series=False; distributions are unavailable")
        Ft = cycle.marginal_series(self.model_, self.series_messages_, nodes)
        return self._correct(nodes, Ft)

    def neighbourhood_sizes(self) -> np.ndarray:
        check_is_fitted(self, "model_")
        return cycle.neighbourhood_sizes(self.model_.nbhds)


class PopulationDynamics(BaseEstimator):
    """Ensemble message distribution for a degree law.

    ``fit(law)`` takes a :class:`DegreeLaw`, a ``{k: rho_k}`` mapping or a
    probability vector ``rho_0, rho_1, ...``; ``predict_slope(n)`` samples
    predicted tail slopes for a graph of ``n`` nodes.
    """

    def __init__(self, N: int = 100_000, sweeps: int = 1000, mode: str = "sequential", seed=None):
        self.N = N
        self.sweeps = sweeps
        self.mode = mode
        self.seed = seed

    def fit(self, X, y=None):
        law = X if isinstance(X, DegreeLaw) else DegreeLaw.explicit(X)
        self.law_ = law
        ss = np.random.SeedSequence(self.seed)
        self._pred_seed = ss.spawn(1)[0]
        self.population_ = popdyn_solve(law, self.N, self.sweeps, np.random.default_rng(ss), mode=self.mode)
        return self

    def predict_slope(self, n: int, samples: int = 10_000, two_m=None):
        """:class:`SlopeSamples` of predicted tail slopes (degree and slope per draw)."""
        check_is_fitted(self, "population_")
        return predict_tail_slopes(self.population_, self.law_, n, samples,
                                   np.random.default_rng(self._pred_seed), two_m=two_m)
