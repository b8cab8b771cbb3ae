"""Message passing on r-neighbourhoods, for graphs with short cycles.

The r-neighbourhood of ``i`` is ``i``, its neighbours, and every node and
edge on a simple path of length at most ``r`` between two neighbours of
``i`` that avoids ``i``. With ``r = 0`` it is the star of ``i`` and every
routine here reduces to the tree approximation.

Walk sums
---------
For a centre ``c`` and a local node set ``L`` (neighbourhood minus ``c``)
the generating function of excursions ``c -> v1 -> ... -> vl -> c`` inside
the neighbourhood is::

    F~_c(z) = z * u (I - D_x A_L)^{-1} D_x e

with ``u_v = A_cv / k_c``, ``e_v = A_vc``, adjacency ``A_L`` restricted to
``L`` and node factors ``x_v = z / (k_v (1 - F~_{c<-v}(z)))``. Messages are
keyed by ``(c, v)`` for every member ``v`` of the neighbourhood of ``c``,
so for ``r >= 1`` they are not limited to edges.

Message neighbourhoods
----------------------
``F~_{i<-u}`` is a walk sum centred on ``u`` over a restricted copy of the
neighbourhood of ``u``. ``rule="edges"`` (default) removes every edge of
the neighbourhood of ``i``, so excursions counted inside the message never
re-use the walk already accounted for at ``i``; when a neighbourhood covers
the whole graph this makes the marginal exact. ``rule="node"`` only deletes
node ``i``; it double counts walks that stay near ``i`` (on the triangle
``y[4] = 1/4`` instead of ``1/8``).
"""
from __future__ import annotations

import math
import warnings
from collections import defaultdict, deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .approx import MessageMap, _check_node, _tail_mean, geometric_correction
from .errors import ConvergenceError, SingularNeighbourhoodError, ValidationError
from .graph import Graph
from .report import ReturnReport
from .series import DEFAULT_ORDER, DualPair, PowerSeries, ps_linear_solve, recip_rows

__all__ = [
    "Neighbourhood",
    "extract_neighborhood",
    "extract_all",
    "CycleModel",
    "cycle_message_fixed_point",
    "cycle_F",
    "final_F",
    "walk_sum_series",
    "neighbourhood_sizes",
    "marginal_series",
    "marginal_stats",
]

MAX_R = 6
DEFAULT_R = 3
RULES = ("edges", "node")


@dataclass(frozen=True, eq=False)
class Neighbourhood:
    """r-neighbourhood of ``center``: sorted ``nodes`` (centre included) and ``edges`` (u < v)."""

    center: int
    r: int
    nodes: np.ndarray
    edges: frozenset
    index: dict = field(repr=False, default_factory=dict)

    def __post_init__(self):
        if not self.index:
            object.__setattr__(self, "index", {int(v): a for a, v in enumerate(self.nodes)})

    @property
    def size(self) -> int:
        return len(self.nodes)


def _limited_distance(g: Graph, sources, banned: int, r: int) -> dict:
    # BFS distance (<= r) from a node set in g with `banned` removed.
    dist = {int(s): 0 for s in sources}
    queue = deque(dist)
    while queue:
        u = queue.popleft()
        du = dist[u]
        if du >= r:
            continue
        for v in g.neighbors(u).tolist():
            if v != banned and v not in dist:
                dist[v] = du + 1
                queue.append(v)
    return dist


def extract_neighborhood(g: Graph, i: int, r: int = DEFAULT_R) -> Neighbourhood:
    """Depth-limited enumeration of ``i``-avoiding simple paths between neighbours of ``i``."""
    i = int(i)
    r = int(r)
    if r < 0:
        raise ValidationError("radius r must be nonnegative")
    if not 0 <= i < g.n:
        raise ValidationError(f"node {i} out of range 0..{g.n - 1}")
    if r > MAX_R:
        raise ValidationError(f"r={r} exceeds the cap of {MAX_R}")
    nbrs = g.neighbors(i).tolist()
    nodes = {i, *nbrs}
    edges = {(min(i, a), max(i, a)) for a in nbrs}
    if r >= 1 and len(nbrs) >= 2:
        is_nbr = set(nbrs)
        dist = _limited_distance(g, nbrs, i, r)
        adj = {}

        def nb(u):
            got = adj.get(u)
            if got is None:
                got = adj[u] = [v for v in g.neighbors(u).tolist() if v != i and v in dist]
            return got

        for a in nbrs:
            # iterative DFS over simple paths starting at a
            path = [a]
            on_path = {a}
            stack = [iter(nb(a))]
            while stack:
                v = next(stack[-1], None)
                if v is None:
                    stack.pop()
                    on_path.discard(path.pop())
                    continue
                if v in on_path:
                    continue
                depth = len(path)  # edges after stepping to v
                if depth + dist[v] > r and v not in is_nbr:
                    continue
                if v in is_nbr:
                    nodes.update(path)
                    nodes.add(v)
                    for x, y in zip(path, path[1:] + [v]):
                        edges.add((min(x, y), max(x, y)))
                if depth < r:
                    path.append(v)
                    on_path.add(v)
                    stack.append(iter(nb(v)))
    return Neighbourhood(i, r, np.array(sorted(nodes), dtype=np.int64), frozenset(edges))


def extract_all(g: Graph, r: int = DEFAULT_R) -> list:
    if r > 4:
        warnings.warn(f"r={r}: neighbourhood extraction cost grows like (k-1)**r", RuntimeWarning, stacklevel=2)
    return [extract_neighborhood(g, i, r) for i in range(g.n)]


def neighbourhood_sizes(nbhds) -> np.ndarray:
    """``(node, |nodes|, |edges|)`` rows for diagnostics."""
    return np.array([(nb.center, nb.size, len(nb.edges)) for nb in nbhds], dtype=np.int64).reshape(-1, 3)


# ---------------------------------------------------------------------------
# local walk systems
# ---------------------------------------------------------------------------

@dataclass
class _System:
    center: int
    local: np.ndarray      # node ids of L
    start: np.ndarray      # 0/1 per local node: adjacent to centre inside the system
    ladj: list             # local edges as (a, b) index pairs, a < b
    xpair: np.ndarray      # message id feeding x_v


def _system(center, edges, pair_index):
    """Walk system centred on ``center`` over the component of ``center`` in ``edges``."""
    adj = defaultdict(list)
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = {center}
    queue = deque([center])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    local = np.array(sorted(seen - {center}), dtype=np.int64)
    pos = {int(v): a for a, v in enumerate(local)}
    start = np.zeros(len(local))
    ladj = []
    for u, v in edges:
        if u == center and v in pos:
            start[pos[v]] = 1.0
        elif v == center and u in pos:
            start[pos[u]] = 1.0
        elif u in pos and v in pos:
            a, b = pos[u], pos[v]
            ladj.append((min(a, b), max(a, b)))
    xpair = np.array([pair_index[(center, int(v))] for v in local], dtype=np.int64)
    return _System(center, local, start, ladj, xpair)


class CycleModel:
    """Neighbourhoods, message pairs and walk systems for one graph and radius.

    Building this is the expensive structural step; the series and dual
    solvers reuse it.
    """

    def __init__(self, g: Graph, r: int = DEFAULT_R, rule: str = "edges"):
        if rule not in RULES:
            raise ValidationError(f"unknown message rule {rule!r}; choose from {RULES}")
        self.g = g
        self.r = int(r)
        self.rule = rule
        self.nbhds = extract_all(g, self.r)
        pairs = [(nb.center, int(v)) for nb in self.nbhds for v in nb.nodes if v != nb.center]
        self.pairs = np.array(pairs, dtype=np.int64).reshape(-1, 2)
        self.pair_index = {p: a for a, p in enumerate(map(tuple, self.pairs.tolist()))}
        self.systems = [self._message_system(int(i), int(u)) for i, u in self.pairs]

    def _message_system(self, i, u):
        nb_u = self.nbhds[u]
        if self.rule == "node":
            edges = [e for e in nb_u.edges if i not in e]
        else:
            drop = self.nbhds[i].edges
            edges = [e for e in nb_u.edges if e not in drop]
        return _System(u, *_system_parts(u, edges, self.pair_index))

    def marginal_system(self, i) -> _System:
        return _System(int(i), *_system_parts(int(i), self.nbhds[int(i)].edges, self.pair_index))


def _system_parts(center, edges, pair_index):
    s = _system(center, edges, pair_index)
    return s.local, s.start, s.ladj, s.xpair


# ---------------------------------------------------------------------------
# dual mode (z = 1)
# ---------------------------------------------------------------------------

class _DualBatch:
    """Systems of equal size stacked for batched dense solves."""

    def __init__(self, systems, ids, g):
        s = len(systems[0].local)
        self.ids = np.asarray(ids, dtype=np.int64)
        nb = len(systems)
        self.s = s
        self.A = np.zeros((nb, s, s))
        self.start = np.zeros((nb, s))
        self.xpair = np.zeros((nb, s), dtype=np.int64)
        self.kv = np.ones((nb, s))
        self.kc = np.empty(nb)
        for b, sy in enumerate(systems):
            for a, c in sy.ladj:
                self.A[b, a, c] = self.A[b, c, a] = 1.0
            self.start[b] = sy.start
            self.xpair[b] = sy.xpair
            self.kv[b] = g.degrees[sy.local]
            self.kc[b] = g.degrees[sy.center]

    def solve(self, val, der):
        if self.s == 0:
            z = np.zeros(len(self.ids))
            return z, z
        mv = val[self.xpair]
        if np.any(mv >= 1.0):
            raise SingularNeighbourhoodError("message value reached 1 (neighbourhood covers graph; reduce r)")
        G = 1.0 / (1.0 - mv)
        Gd = der[self.xpair] * G * G
        x = G / self.kv
        xd = (G + Gd) / self.kv
        eye = np.eye(self.s)
        N = eye - x[:, :, None] * self.A
        try:
            psi = np.linalg.solve(N, (x * self.start)[..., None])[..., 0]
            rhs = xd * (self.start + np.einsum("bij,bj->bi", self.A, psi))
            dpsi = np.linalg.solve(N, rhs[..., None])[..., 0]
        except np.linalg.LinAlgError:
            raise SingularNeighbourhoodError("singular walk matrix at z=1 (neighbourhood covers graph; reduce r)") from None
        if not (np.all(np.isfinite(psi)) and np.all(psi >= -1e-12)):
            raise SingularNeighbourhoodError("walk sum diverges at z=1 (neighbourhood covers graph; reduce r)")
        F = np.einsum("bi,bi->b", self.start, psi) / self.kc
        dF = F + np.einsum("bi,bi->b", self.start, dpsi) / self.kc
        return F, dF


def _batches(systems, ids, g):
    groups = defaultdict(list)
    for sid in ids:
        groups[len(systems[sid].local)].append(sid)
    return [_DualBatch([systems[s] for s in members], members, g) for _, members in sorted(groups.items())]


def _dual_messages(model: CycleModel, tol, max_sweeps):
    P = len(model.pairs)
    batches = _batches(model.systems, range(P), model.g)
    val = np.zeros(P)
    der = np.zeros(P)
    res = math.inf
    for sweep in range(1, max_sweeps + 1):
        nval = np.empty(P)
        nder = np.empty(P)
        for b in batches:
            F, dF = b.solve(val, der)
            nval[b.ids] = F
            nder[b.ids] = dF
        if np.any(nval >= 1.0):
            raise SingularNeighbourhoodError("message F(1) >= 1 (neighbourhood covers graph; reduce r)")
        res = max(float(np.max(np.abs(nval - val), initial=0.0)),
                  float(np.max(np.abs(nder - der), initial=0.0)))
        val, der = nval, nder
        if res < tol:
            return val, der, sweep, res
    raise ConvergenceError(f"dual neighbourhood messages did not converge in {max_sweeps} sweeps "
                           f"(residual {res:.3g})", res, max_sweeps)


def _dual_marginals(model: CycleModel, nodes, val, der):
    systems = [model.marginal_system(i) for i in nodes]
    out_v = np.zeros(len(nodes))
    out_d = np.zeros(len(nodes))
    for b in _batches(systems, range(len(systems)), model.g):
        F, dF = b.solve(val, der)
        out_v[b.ids] = F
        out_d[b.ids] = dF
    return out_v, out_d


# ---------------------------------------------------------------------------
# series mode
# ---------------------------------------------------------------------------

class _Stack:
    """Walk systems concatenated into one sparse block-diagonal state space."""

    def __init__(self, systems, g):
        self.nsys = len(systems)
        sizes = np.array([len(s.local) for s in systems], dtype=np.int64)
        offs = np.zeros(self.nsys + 1, dtype=np.int64)
        np.cumsum(sizes, out=offs[1:])
        S = self.S = int(offs[-1])
        if S:
            self.qidx = np.concatenate([s.xpair for s in systems])
            kv = np.concatenate([g.degrees[s.local] for s in systems]).astype(float)
            self.start = np.concatenate([s.start for s in systems])
        else:
            self.qidx = np.zeros(0, dtype=np.int64)
            kv = np.zeros(0)
            self.start = np.zeros(0)
        self.inv_kv = 1.0 / np.maximum(kv, 1.0)
        rows, cols = [], []
        for sid, sy in enumerate(systems):
            o = offs[sid]
            for a, b in sy.ladj:
                rows += [o + a, o + b]
                cols += [o + b, o + a]
        self.A = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(S, S))
        owner = np.repeat(np.arange(self.nsys), sizes)
        kc = np.array([g.degrees[sy.center] for sy in systems], dtype=float)
        self.U = sp.csr_matrix((self.start / kc[owner], (owner, np.arange(S))), shape=(self.nsys, S))

    def nbytes(self, T):
        return 2 * 8 * (T + 1) * self.S


def _series_orders(stack: _Stack, P: int, T: int):
    """Order-by-order solve; the first ``P`` systems are the messages.

    State ``(system, v)`` carries ``psi_v = x_v (e_v + (A psi)_v)``. Order
    ``t`` of every quantity only needs orders ``< t``, so each coefficient
    is final when computed; this is the limit of synchronous sweeps from
    zero. Returns ``(T+1, nsys)`` coefficients.
    """
    S = stack.S
    F = np.zeros((T + 1, stack.nsys))
    G = np.zeros((T + 1, P))
    G[0] = 1.0
    Gq = np.zeros((T + 1, S))
    Gq[0] = 1.0
    phi = np.zeros((T + 1, S))
    phi[0] = stack.start
    psi = np.zeros(S)
    for t in range(1, T + 1):
        F[t] = stack.U @ psi
        psi = np.einsum("sv,sv->v", Gq[:t], phi[t - 1 :: -1][:t]) * stack.inv_kv
        phi[t] = stack.A @ psi
        G[t] = np.einsum("sp,sp->p", F[1 : t + 1, :P], G[t - 1 :: -1][:t])
        Gq[t] = G[t, stack.qidx]
    return F


def _walk_series(stack: _Stack, Gfull: np.ndarray, T: int):
    """Walk sums of every stacked system for fixed messages ``G = 1/(1-F~)``, shape ``(nsys, T+1)``."""
    S = stack.S
    Gq = np.ascontiguousarray(Gfull[stack.qidx].T) if S else np.zeros((T + 1, 0))
    F = np.zeros((T + 1, stack.nsys))
    phi = np.zeros((T + 1, S))
    phi[0] = stack.start
    psi = np.zeros(S)
    for t in range(1, T + 1):
        F[t] = stack.U @ psi
        psi = np.einsum("sv,sv->v", Gq[:t], phi[t - 1 :: -1][:t]) * stack.inv_kv
        phi[t] = stack.A @ psi
    return np.ascontiguousarray(F.T)


def _recip_one_minus(F):
    u = -F.copy()
    u[:, 0] += 1.0
    return recip_rows(u)


def _series_sweeps(stack: _Stack, P: int, T: int, max_sweeps: int):
    """Synchronous sweeps from zero on full truncated series."""
    F = np.zeros((P, T + 1))
    for sweep in range(1, max_sweeps + 1):
        new = _walk_series(stack, _recip_one_minus(F), T)
        if np.array_equal(new, F):
            return F, sweep
        F = new
    return F, max_sweeps


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def cycle_message_fixed_point(
    g: Graph,
    r: int = DEFAULT_R,
    T: int = DEFAULT_ORDER,
    mode: str = "series",
    *,
    rule: str = "edges",
    schedule: str = "orders",
    model: CycleModel | None = None,
    tol: float = 1e-12,
    max_sweeps: int | None = None,
) -> MessageMap:
    """Fixed point of the neighbourhood message equations.

    Series mode is solved order by order (the limit of synchronous sweeps
    from zero); ``schedule="sweeps"`` runs the synchronous sweeps
    themselves until the truncated series stop changing. Dual mode sweeps ``(F~(1), F~'(1))`` synchronously from zero
    and raises :class:`SingularNeighbourhoodError` when a walk sum diverges.
    """
    if model is None:
        model = CycleModel(g, r, rule)
    if mode == "dual":
        val, der, sweeps, res = _dual_messages(model, tol, 100_000 if max_sweeps is None else max_sweeps)
        mm = MessageMap(model.pairs, "dual", val=val, der=der, sweeps=sweeps, residual=res, r=model.r)
    elif mode == "series":
        T = int(T)
        P = len(model.pairs)
        stack = _Stack(model.systems, g)
        if schedule == "orders":
            F = np.ascontiguousarray(_series_orders(stack, P, T).T)
            sweeps = T // 2 + 1
        elif schedule == "sweeps":
            F, sweeps = _series_sweeps(stack, P, T, max(T // 2 + 3, 1) if max_sweeps is None else max_sweeps)
        else:
            raise ValidationError(f"unknown schedule {schedule!r}")
        mm = MessageMap(model.pairs, "series", series=F, sweeps=sweeps, r=model.r)
    else:
        raise ValidationError(f"unknown mode {mode!r}")
    mm.model = model
    return mm


def _model_of(g, r, msgs, rule="edges"):
    model = getattr(msgs, "model", None)
    if model is None or model.g is not g or model.r != r:
        model = CycleModel(g, r, rule)
    return model


def cycle_F(g: Graph, i: int, r: int, msgs: MessageMap):
    """Neighbourhood marginal ``F~_i``: a PowerSeries or, for dual messages, a DualPair."""
    i = _check_node(g, i)
    model = _model_of(g, r, msgs)
    if msgs.mode == "dual":
        v, d = _dual_marginals(model, [i], msgs.val, msgs.der)
        return DualPair(float(v[0]), float(d[0]))
    return PowerSeries(marginal_series(model, msgs, [i])[0])


def marginal_series(model: CycleModel, msgs: MessageMap, nodes) -> np.ndarray:
    """Uncorrected neighbourhood marginals of ``nodes`` from series messages, ``(len, T+1)``."""
    stack = _Stack([model.marginal_system(int(i)) for i in nodes], model.g)
    return _walk_series(stack, _recip_one_minus(msgs.series), msgs.T)


def marginal_stats(model: CycleModel, msgs: MessageMap, nodes=None):
    """``(F~_i(1), F~_i'(1))`` arrays for ``nodes`` (all when ``None``) from dual messages."""
    if msgs.mode != "dual":
        raise ValidationError("needs dual-mode messages")
    nodes = range(model.g.n) if nodes is None else [int(i) for i in nodes]
    return _dual_marginals(model, list(nodes), msgs.val, msgs.der)


def walk_sum_series(local, start, ladj, x, k_center, T) -> PowerSeries:
    """``z u (I - D_x A)^{-1} D_x e`` by a linear solve over truncated series.

    ``x`` is a list of PowerSeries node factors, one per local node.
    """
    s = len(local)
    if s == 0:
        return PowerSeries.zero(T)
    xs = np.array([np.asarray(xx, dtype=float) for xx in x])
    A = np.zeros((s, s))
    for a, b in ladj:
        A[a, b] = A[b, a] = 1.0
    B = A[:, :, None] * xs[:, None, :]
    rhs = xs * np.asarray(start, dtype=float)[:, None]
    psi = ps_linear_solve(B, rhs)
    total = np.zeros(T + 1)
    for a in range(s):
        if start[a]:
            total += psi[a].coeffs
    return PowerSeries(total / k_center).shift(1)


def final_F(
    g: Graph,
    i: int,
    r: int = DEFAULT_R,
    T: int = DEFAULT_ORDER,
    *,
    rule: str = "edges",
    series_msgs: MessageMap | None = None,
    dual_msgs: MessageMap | None = None,
    model: CycleModel | None = None,
) -> ReturnReport:
    """Neighbourhood approximation plus the geometric tail correction."""
    i = _check_node(g, i)
    if model is None:
        model = getattr(series_msgs, "model", None) or getattr(dual_msgs, "model", None) or CycleModel(g, r, rule)
    if series_msgs is None:
        series_msgs = cycle_message_fixed_point(g, r, T, "series", model=model)
    if dual_msgs is None:
        dual_msgs = cycle_message_fixed_point(g, r, mode="dual", model=model)
    Ft = marginal_series(model, series_msgs, [i])[0]
    v, d = _dual_marginals(model, [i], dual_msgs.val, dual_msgs.der)
    h = _tail_mean(2.0 * g.m, float(g.degrees[i]), float(v[0]), float(d[0]))
    y = Ft + geometric_correction(float(v[0]), h, len(Ft) - 1)
    return ReturnReport(node=i, y=y, k=int(g.degrees[i]), F1=float(v[0]), F1prime=float(d[0]), h=h)
