"""Mean-field, tree message-passing and combined approximations.

Messages ``F~_{i<-j}(z)`` live on directed edges. They are stored in CSR
order: the message from ``j`` into ``i`` sits at the slot of ``j`` in row
``i`` of the graph's adjacency, so ``msgs.pairs[p] == (i, j)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConvergenceError, NumericalError, ValidationError
from .graph import Graph
from .report import ReturnReport, TailMean
from .series import DEFAULT_ORDER, DualPair, PowerSeries, ps_binomial_power, ps_recip, recip_rows

__all__ = [
    "MessageMap",
    "mean_field_F",
    "mean_field_report",
    "tree_message_fixed_point",
    "tree_F",
    "f_stats_at_one",
    "tail_mean",
    "tail_mean_array",
    "geometric_correction",
    "combined_F",
    "closed_form_regular",
    "regular_tree_stats",
    "regular_tail_mean",
    "tree_marginal_stats",
    "tree_marginal_series",
]

DUAL_TOL = 1e-12
MAX_SWEEPS = 100_000


@dataclass(eq=False)
class MessageMap:
    """Messages keyed by ``(i, j)``, meaning ``F~_{i<-j}``.

    In ``"series"`` mode ``series[p]`` holds coefficients ``0..T``; in
    ``"dual"`` mode ``val[p], der[p]`` hold ``F~(1)`` and ``F~'(1)``.
    """

    pairs: np.ndarray
    mode: str
    series: np.ndarray | None = None
    val: np.ndarray | None = None
    der: np.ndarray | None = None
    sweeps: int = 0
    residual: float = 0.0
    r: int = 0
    model: object = field(default=None, repr=False)
    _index: dict | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.pairs)

    @property
    def T(self):
        return None if self.series is None else self.series.shape[1] - 1

    def index(self, i: int, j: int) -> int:
        if self._index is None:
            self._index = {(int(a), int(b)): p for p, (a, b) in enumerate(self.pairs)}
        try:
            return self._index[(int(i), int(j))]
        except KeyError:
            raise ValidationError(f"missing message entry for {i}<-{j}") from None

    def __getitem__(self, key):
        p = self.index(*key)
        if self.mode == "series":
            return PowerSeries(self.series[p])
        return DualPair(float(self.val[p]), float(self.der[p]))


def _check_node(g: Graph, i) -> int:
    i = int(i)
    if not 0 <= i < g.n:
        raise ValidationError(f"node {i} out of range 0..{g.n - 1}")
    if g.degrees[i] == 0:
        raise ValidationError(f"node {i} is isolated")
    return i


# ---------------------------------------------------------------------------
# mean field
# ---------------------------------------------------------------------------

def mean_field_F(g: Graph, i: int, T: int = DEFAULT_ORDER) -> PowerSeries:
    """Geometric first-return law with success probability ``pi_i = k_i/2m``."""
    i = _check_node(g, i)
    pi = g.degrees[i] / (2.0 * g.m)
    c = np.zeros(T + 1)
    t = np.arange(1, T + 1)
    c[1:] = (1.0 - pi) ** (t - 1) * pi
    return PowerSeries(c)


def mean_field_report(g: Graph, i: int, T: int = DEFAULT_ORDER) -> ReturnReport:
    i = _check_node(g, i)
    k = int(g.degrees[i])
    return ReturnReport(node=i, y=mean_field_F(g, i, T).coeffs.copy(), k=k, F1=1.0,
                        F1prime=2.0 * g.m / k, h=TailMean.disabled())


# ---------------------------------------------------------------------------
# tree message passing
# ---------------------------------------------------------------------------

def _heads(g: Graph) -> np.ndarray:
    return np.repeat(np.arange(g.n), g.degrees)


def _nonbacktracking(g: Graph) -> sp.csr_matrix:
    """Weighted non-backtracking operator on directed-edge slots.

    Row ``(i<-j)`` has weight ``1/(k_j k_k)`` in column ``(j<-k)`` for every
    neighbour ``k != i`` of ``j``.
    """
    heads = _heads(g)
    tails = g.indices
    deg = g.degrees
    indptr = g.indptr
    cnt = deg[tails]
    rows = np.repeat(np.arange(len(tails)), cnt)
    start = np.repeat(indptr[tails], cnt)
    offs = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
    cols = start + offs
    keep = g.indices[cols] != heads[rows]
    rows, cols = rows[keep], cols[keep]
    j = tails[rows]
    k = g.indices[cols]
    w = 1.0 / (deg[j] * deg[k])
    P = len(tails)
    return sp.csr_matrix((w, (rows, cols)), shape=(P, P))


def _pairs(g: Graph) -> np.ndarray:
    return np.column_stack([_heads(g), g.indices]).astype(np.int64)


def tree_message_fixed_point(
    g: Graph,
    T: int = DEFAULT_ORDER,
    mode: str = "series",
    *,
    schedule: str = "orders",
    tol: float = DUAL_TOL,
    max_sweeps: int = MAX_SWEEPS,
) -> MessageMap:
    """Smallest fixed point of the tree message equations.

    ``F~_{i<-j} = sum_{k in N_j \\ i} z**2 / (k_j k_k (1 - F~_{j<-k}))``

    Series mode
        ``schedule="orders"`` fills coefficient order ``t`` of every message
        from orders ``< t``; this is exactly the limit of synchronous sweeps
        from zero, obtained in one pass. ``schedule="sweeps"`` runs
        ``T//2 + 2`` synchronous sweeps from all-zero messages.
    Dual mode
        Synchronous sweeps of ``(F~(1), F~'(1))`` from zero until the largest
        change is below ``tol``.
    """
    if mode not in ("series", "dual"):
        raise ValidationError(f"unknown mode {mode!r}")
    B = _nonbacktracking(g)
    pairs = _pairs(g)
    P = len(pairs)
    if mode == "dual":
        val, der, sweeps, res = _tree_dual(B, P, tol, max_sweeps)
        return MessageMap(pairs, "dual", val=val, der=der, sweeps=sweeps, residual=res)
    T = int(T)
    if T < 0:
        raise ValidationError("horizon T must be nonnegative")
    if schedule == "orders":
        F = _tree_series_orders(B, P, T)
        sweeps = T // 2 + 1
    elif schedule == "sweeps":
        sweeps = T // 2 + 2
        F = np.zeros((P, T + 1))
        for _ in range(sweeps):
            G = recip_rows(-F + _unit(P, T))
            Fn = np.zeros_like(F)
            if T >= 2:
                Fn[:, 2:] = B @ G[:, : T - 1]
            F = Fn
    else:
        raise ValidationError(f"unknown schedule {schedule!r}")
    return MessageMap(pairs, "series", series=F, sweeps=sweeps)


def _unit(P, T):
    u = np.zeros((P, T + 1))
    u[:, 0] = 1.0
    return u


def _tree_series_orders(B, P, T):
    # F[t], G[t] stored order-major; G = 1/(1-F) = 1 + F G.
    F = np.zeros((T + 1, P))
    G = np.zeros((T + 1, P))
    G[0] = 1.0
    for t in range(1, T + 1):
        if t >= 2:
            F[t] = B @ G[t - 2]
        G[t] = np.einsum("sp,sp->p", F[1 : t + 1], G[t - 1 :: -1][:t])
    return np.ascontiguousarray(F.T)


def _tree_dual(B, P, tol, max_sweeps):
    val = np.zeros(P)
    der = np.zeros(P)
    res = math.inf
    for sweep in range(1, max_sweeps + 1):
        if np.any(val >= 1.0):
            raise ConvergenceError("a message reached F(1) >= 1; no finite fixed point", res, sweep)
        G = 1.0 / (1.0 - val)
        Gd = der * G * G
        bg = B @ G
        nval = bg
        nder = 2.0 * bg + B @ Gd
        if not (np.all(np.isfinite(nval)) and np.all(np.isfinite(nder))):
            raise ConvergenceError("non-finite message values", res, sweep)
        res = max(float(np.max(np.abs(nval - val), initial=0.0)),
                  float(np.max(np.abs(nder - der), initial=0.0)))
        val, der = nval, nder
        if res < tol:
            return val, der, sweep, res
    raise ConvergenceError(f"dual tree messages did not converge in {max_sweeps} sweeps "
                           f"(residual {res:.3g})", res, max_sweeps)


def tree_F(g: Graph, i: int, msgs: MessageMap):
    """Marginal ``F~_i = sum_j z**2 / (k_i k_j (1 - F~_{i<-j}))``.

    Returns a :class:`PowerSeries` for series messages and a
    :class:`DualPair` at ``z = 1`` for dual messages.
    """
    i = _check_node(g, i)
    ki = g.degrees[i]
    nbrs = g.neighbors(i)
    if msgs.mode == "series":
        T = msgs.T
        acc = np.zeros(T + 1)
        for j in nbrs:
            G = ps_recip(1.0 - msgs[i, j]).coeffs
            acc += G / (ki * g.degrees[j])
        return PowerSeries(acc).shift(2)
    z2 = DualPair(1.0, 2.0)
    total = DualPair(0.0, 0.0)
    for j in nbrs:
        total = total + z2 / (ki * int(g.degrees[j])) * (1.0 - msgs[i, j]).recip()
    return total


def f_stats_at_one(g: Graph, i: int, msgs: MessageMap) -> DualPair:
    """``(F~_i(1), F~_i'(1))`` from converged dual-mode messages."""
    if msgs.mode != "dual":
        raise ValidationError("f_stats_at_one needs dual-mode messages")
    return tree_F(g, i, msgs)


def tree_marginal_stats(g: Graph, msgs: MessageMap):
    """Vectorised ``(F~_i(1), F~_i'(1))`` for every node from dual tree messages."""
    if msgs.mode != "dual":
        raise ValidationError("needs dual-mode messages")
    heads = _heads(g)
    w = 1.0 / (g.degrees[heads] * g.degrees[g.indices])
    G = 1.0 / (1.0 - msgs.val)
    Gd = msgs.der * G * G
    val = np.bincount(heads, weights=w * G, minlength=g.n)
    der = np.bincount(heads, weights=w * (2.0 * G + Gd), minlength=g.n)
    return val, der


def tree_marginal_series(g: Graph, nodes, msgs: MessageMap) -> np.ndarray:
    """Tree marginal coefficients for ``nodes`` as a ``(len(nodes), T+1)`` array."""
    if msgs.mode != "series":
        raise ValidationError("needs series-mode messages")
    T = msgs.T
    out = np.zeros((len(nodes), T + 1))
    for row, i in enumerate(nodes):
        i = _check_node(g, i)
        lo, hi = g.indptr[i], g.indptr[i + 1]
        F = msgs.series[lo:hi]
        G = recip_rows(_unit(hi - lo, T) - F)
        w = 1.0 / (g.degrees[i] * g.degrees[g.indices[lo:hi]])
        if T >= 2:
            out[row, 2:] = w @ G[:, : T - 1]
    return out


# ---------------------------------------------------------------------------
# tail correction
# ---------------------------------------------------------------------------

def tail_mean(g: Graph, i: int, stats: DualPair) -> TailMean:
    """``h_i = (2m - k_i F~'(1)) / (k_i - k_i F~(1))``.

    Disabled when ``k_i (1 - F~(1)) <= 1e-10 k_i``: the approximation is
    already recurrent and needs no correction.
    """
    i = _check_node(g, i)
    return _tail_mean(2.0 * g.m, float(g.degrees[i]), stats.val, stats.der)


def _tail_mean(two_m, k, F1, F1p) -> TailMean:
    den = k - k * F1
    if den <= 1e-10 * k:
        return TailMean.disabled()
    h = (two_m - k * F1p) / den
    if h < 0:
        raise NumericalError(f"negative tail mean {h:.6g}: F(1)={F1!r}, F'(1)={F1p!r} inconsistent with 2m={two_m}")
    return TailMean(float(h))


def tail_mean_array(two_m: float, k, F1, F1p) -> np.ndarray:
    """Vectorised tail means; ``nan`` where disabled."""
    k = np.asarray(k, dtype=np.float64)
    F1 = np.asarray(F1, dtype=np.float64)
    F1p = np.asarray(F1p, dtype=np.float64)
    den = k - k * F1
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.where(den > 1e-10 * k, (two_m - k * F1p) / den, np.nan)
    if np.any(h < 0):
        raise NumericalError("negative tail mean encountered")
    return h


def geometric_correction(F1: float, h: TailMean, T: int) -> np.ndarray:
    """Coefficients of ``(z - z F1) / (z + h - z h)`` up to order ``T``.

    Equal to ``(1 - F1)/h * (1 - 1/h)**(t-1)`` for ``t >= 1``; zero when the
    tail mean is disabled.
    """
    c = np.zeros(T + 1)
    if not h.enabled:
        return c
    hh = h.h
    t = np.arange(1, T + 1)
    c[1:] = (1.0 - F1) / hh * (1.0 - 1.0 / hh) ** (t - 1)
    return c


def combined_F(g: Graph, i: int, T: int = DEFAULT_ORDER, *, series_msgs: MessageMap | None = None,
               dual_msgs: MessageMap | None = None) -> ReturnReport:
    """Tree approximation plus the geometric tail correction.

    Messages may be passed in to share them across nodes.
    """
    i = _check_node(g, i)
    if series_msgs is None:
        series_msgs = tree_message_fixed_point(g, T, "series")
    if dual_msgs is None:
        dual_msgs = tree_message_fixed_point(g, mode="dual")
    Ft = tree_F(g, i, series_msgs)
    stats = f_stats_at_one(g, i, dual_msgs)
    h = tail_mean(g, i, stats)
    y = Ft.coeffs + geometric_correction(stats.val, h, Ft.T)
    return ReturnReport(node=i, y=y, k=int(g.degrees[i]), F1=stats.val, F1prime=stats.der, h=h)


# ---------------------------------------------------------------------------
# d-regular closed forms
# ---------------------------------------------------------------------------

def regular_tree_stats(d: int) -> DualPair:
    """``(F~(1), F~'(1)) = (1/(d-1), 2/(d-2))`` on the infinite d-regular tree."""
    if d <= 2:
        raise ValidationError("closed form needs d >= 3")
    return DualPair(1.0 / (d - 1), 2.0 / (d - 2))


def regular_tail_mean(n: int, d: int) -> float:
    """``h = (d-1)(nd - 2n - 2)/(d-2)**2`` for a random d-regular graph."""
    if d == 2:
        raise ValidationError("closed form is singular at d = 2")
    if d < 2:
        raise ValidationError("closed form needs d >= 3")
    return (d - 1) * (n * d - 2 * n - 2) / (d - 2) ** 2


def closed_form_regular(n: int, d: int, T: int = DEFAULT_ORDER) -> PowerSeries:
    """Series of ``2z^2/(d + sqrt(d^2 + 4z^2 - 4dz^2)) + (z - z/(d-1))/(z + h - zh)``."""
    n, d = int(n), int(d)
    h = regular_tail_mean(n, d)
    inner = np.zeros(T + 1)
    inner[0] = float(d * d)
    if T >= 2:
        inner[2] = 4.0 - 4.0 * d
    root = ps_binomial_power(PowerSeries(inner), 0.5)
    tree = (2.0 * ps_recip(float(d) + root)).shift(2)
    return tree + PowerSeries(geometric_correction(1.0 / (d - 1), TailMean(h), T))
