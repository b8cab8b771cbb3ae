"""Ground-truth return and first-return probabilities by sparse iteration.

Nothing here materialises ``W``: a step of the walk is ``p <- A (p / k)``
with the symmetric adjacency ``A`` and degree vector ``k``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .graph import Graph
from .series import PowerSeries, ps_recip

__all__ = [
    "ReturnDistribution",
    "return_prob_exact",
    "first_return_exact",
    "first_return_exact_many",
    "f_from_r",
    "kac_mean",
    "truncated_mean",
]

_FLUSH = 1e-300
_FLUSH_EVERY = 64


@dataclass(frozen=True, eq=False)
class ReturnDistribution:
    """First-return distribution of one node up to horizon ``T``.

    ``y[t]`` is the probability of the first return at step ``t``; ``y[0]``
    is always 0. ``x[t]``, when present, is the return probability
    ``(W**t)_ii`` with ``x[0] = 1``.
    """

    node: int
    y: np.ndarray
    x: np.ndarray | None = None

    @property
    def T(self) -> int:
        return len(self.y) - 1

    @property
    def mass(self) -> float:
        return float(self.y.sum())

    def to_csv(self, fh) -> None:
        """Columns t, y, x for t = 1..T at 17 significant digits; x blank when absent."""
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "y", "x"])
        for t in range(1, self.T + 1):
            xv = "" if self.x is None else format(float(self.x[t]), ".17g")
            w.writerow([t, format(float(self.y[t]), ".17g"), xv])


def _check(g: Graph, i: int, T: int):
    if not 0 <= int(i) < g.n:
        raise ValidationError(f"node {i} out of range 0..{g.n - 1}")
    if int(T) < 1:
        raise ValidationError("horizon T must be at least 1")
    if g.degrees[int(i)] == 0:
        raise ValidationError(f"node {i} is isolated")


def _step(A, inv_k, p):
    return A @ (p * inv_k)


def return_prob_exact(g: Graph, i: int, T: int) -> np.ndarray:
    """``x[t] = (W**t)_ii`` for ``t = 0..T``."""
    _check(g, i, T)
    A = g.adjacency_matrix()
    inv_k = 1.0 / np.maximum(g.degrees, 1)
    p = np.zeros(g.n)
    p[i] = 1.0
    x = np.zeros(T + 1)
    x[0] = 1.0
    for t in range(1, T + 1):
        p = _step(A, inv_k, p)
        if t % _FLUSH_EVERY == 0:
            p[p < _FLUSH] = 0.0
        x[t] = p[i]
    return x


def first_return_exact(g: Graph, i: int, T: int, *, with_x: bool = False, check_mass: bool = False) -> ReturnDistribution:
    """Taboo iteration with ``i`` absorbing.

    After each step the mass that landed on ``i`` is recorded as ``y[t]``
    and then removed before the next step. With ``check_mass`` the invariant
    walking + absorbed = 1 is asserted to 1e-12 at every step.
    """
    _check(g, i, T)
    A = g.adjacency_matrix()
    inv_k = 1.0 / np.maximum(g.degrees, 1)
    p = np.zeros(g.n)
    p[i] = 1.0
    y = np.zeros(T + 1)
    absorbed = 0.0
    for t in range(1, T + 1):
        p = _step(A, inv_k, p)
        y[t] = p[i]
        p[i] = 0.0
        if check_mass:
            absorbed += y[t]
            if abs(p.sum() + absorbed - 1.0) > 1e-12:
                raise AssertionError(f"taboo iteration lost mass at step {t}")
        elif t % _FLUSH_EVERY == 0:
            p[p < _FLUSH] = 0.0
    x = return_prob_exact(g, i, T) if with_x else None
    return ReturnDistribution(int(i), y, x)


def first_return_exact_many(g: Graph, nodes, T: int, block: int = 256) -> np.ndarray:
    """First-return distributions of several nodes, ``(len(nodes), T+1)``.

    Same taboo iteration as :func:`first_return_exact`, run on a dense block
    of walkers at once.
    """
    nodes = np.asarray(nodes, dtype=np.int64).reshape(-1)
    for i in nodes:
        _check(g, int(i), T)
    A = g.adjacency_matrix()
    inv_k = (1.0 / np.maximum(g.degrees, 1))[:, None]
    out = np.zeros((len(nodes), T + 1))
    for start in range(0, len(nodes), block):
        idx = nodes[start:start + block]
        cols = np.arange(len(idx))
        P = np.zeros((g.n, len(idx)))
        P[idx, cols] = 1.0
        for t in range(1, T + 1):
            P = A @ (P * inv_k)
            out[start + cols, t] = P[idx, cols]
            P[idx, cols] = 0.0
            if t % _FLUSH_EVERY == 0:
                P[P < _FLUSH] = 0.0
    return out


def f_from_r(x) -> PowerSeries:
    """First-return series from return probabilities: ``F = 1 - 1/R``."""
    c = np.asarray(x.coeffs if isinstance(x, PowerSeries) else x, dtype=np.float64)
    if abs(c[0] - 1.0) > 1e-12:
        raise ValidationError(f"return probabilities must start with x[0] = 1, got {c[0]!r}")
    return 1.0 - ps_recip(PowerSeries(c))


def kac_mean(g: Graph, i: int) -> float:
    """Mean first-return time ``2m / k_i``."""
    if not 0 <= int(i) < g.n:
        raise ValidationError(f"node {i} out of range 0..{g.n - 1}")
    return 2.0 * g.m / g.degrees[int(i)]


def truncated_mean(y, complete_tail: bool = True) -> float:
    """``sum_t t y[t]`` plus, optionally, a geometric tail beyond ``T``.

    The tail ratio is read off the last two nonzero entries of matching
    parity, so period-2 distributions are handled.
    """
    y = np.asarray(y, dtype=np.float64)
    t = np.arange(len(y))
    mean = float(np.dot(t, y))
    nz = np.flatnonzero(y > 0)
    if not complete_tail or len(nz) < 2:
        return mean
    last = int(nz[-1])
    step = 2 if np.all(nz % 2 == last % 2) else 1
    if last - step < 0 or y[last - step] <= 0.0:
        return mean
    q = y[last] / y[last - step]
    if not 0.0 < q < 1.0:
        return mean
    # sum_{s>=1} (last + step*s) * y[last] * q**s
    return mean + y[last] * (last * q / (1 - q) + step * q / (1 - q) ** 2)
