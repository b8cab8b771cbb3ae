"""Undirected simple graphs, edge-list I/O and the random-graph generators.

Nodes are always the integers ``0..n-1``. A :class:`Graph` is immutable once
built; every array it exposes is read-only.
"""
from __future__ import annotations

import io
import math
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.stats import poisson as _poisson

from .errors import GraphFormatError, ValidationError

__all__ = [
    "Graph",
    "GraphReport",
    "DegreeLaw",
    "load_edge_list",
    "read_edge_list",
    "format_edge_list",
    "write_edge_list",
    "gen_random_regular",
    "gen_gnm",
    "gen_regular_sbm",
    "stationary_distribution",
    "validate",
]


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class Graph:
    """Immutable undirected simple graph on nodes ``0..n-1``.

    Parameters
    ----------
    n : int
        Number of nodes.
    edges : iterable of (u, v)
        Unordered node pairs. Self-loops and repeated pairs raise
        :class:`ValidationError`.
    labels : sequence of int, optional
        Original node ids when the graph was compacted or relabelled;
        ``labels[i]`` is the id node ``i`` had in the source.
    """

    def __init__(self, n: int, edges, labels=None):
        n = int(n)
        if n < 0:
            raise ValidationError("node count must be nonnegative")
        e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
        if e.size == 0:
            e = np.empty((0, 2), dtype=np.int64)
        if e.ndim != 2 or e.shape[1] != 2:
            raise ValidationError("edges must be pairs")
        if e.size and (e.min() < 0 or e.max() >= n):
            raise ValidationError(f"edge endpoint outside 0..{n - 1}")
        if np.any(e[:, 0] == e[:, 1]):
            u = int(e[e[:, 0] == e[:, 1]][0, 0])
            raise ValidationError(f"self-loop at node {u}")
        e = np.sort(e, axis=1)
        order = np.lexsort((e[:, 1], e[:, 0]))
        e = e[order]
        if len(e) > 1:
            dup = np.all(e[1:] == e[:-1], axis=1)
            if dup.any():
                u, v = e[1:][dup][0]
                raise ValidationError(f"duplicate edge {u}-{v}")
        self._n = n
        self._edges = _frozen(e)
        both = np.concatenate([e, e[:, ::-1]]) if len(e) else e
        order = np.lexsort((both[:, 1], both[:, 0]))
        both = both[order]
        self._degrees = _frozen(np.bincount(both[:, 0], minlength=n).astype(np.int64))
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(self._degrees, out=indptr[1:])
        self._indptr = _frozen(indptr)
        self._indices = _frozen(both[:, 1].copy())
        self._labels = None if labels is None else _frozen(np.asarray(labels, dtype=np.int64))
        self._adj = None

    # -- basic attributes -------------------------------------------------
    @property
    def n(self) -> int:
        return self._n

    @property
    def m(self) -> int:
        return len(self._edges)

    @property
    def edges(self) -> np.ndarray:
        """``(m, 2)`` array of edges with ``u < v``, sorted lexicographically."""
        return self._edges

    @property
    def degrees(self) -> np.ndarray:
        return self._degrees

    @property
    def indptr(self) -> np.ndarray:
        return self._indptr

    @property
    def indices(self) -> np.ndarray:
        return self._indices

    @property
    def labels(self):
        return self._labels

    def neighbors(self, i: int) -> np.ndarray:
        """Sorted neighbour array of node ``i``."""
        return self._indices[self._indptr[i]:self._indptr[i + 1]]

    @property
    def adjacency(self) -> list:
        """Per-node sorted neighbour lists."""
        return [self.neighbors(i) for i in range(self._n)]

    def has_edge(self, u: int, v: int) -> bool:
        nb = self.neighbors(u)
        j = np.searchsorted(nb, v)
        return bool(j < len(nb) and nb[j] == v)

    def edge_set(self) -> set:
        return {(int(u), int(v)) for u, v in self._edges}

    def adjacency_matrix(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency matrix in CSR form (cached)."""
        if self._adj is None:
            data = np.ones(len(self._indices), dtype=np.float64)
            self._adj = sp.csr_matrix((data, self._indices, self._indptr), shape=(self._n, self._n))
        return self._adj

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self._n == other._n and np.array_equal(self._edges, other._edges)

    def __hash__(self):
        return hash((self._n, self._edges.tobytes()))

    def __repr__(self):
        return f"Graph(n={self._n}, m={self.m})"


# ---------------------------------------------------------------------------
# edge-list I/O
# ---------------------------------------------------------------------------

def load_edge_list(text) -> Graph:
    """Parse an edge list from a string or text stream.

    One ``u v`` pair per line; ``#`` starts a comment and blank lines are
    skipped. Ids that do not cover ``0..max`` are compacted, keeping the
    original ids in :attr:`Graph.labels`.
    """
    if isinstance(text, str):
        stream: Iterable[str] = io.StringIO(text)
    else:
        stream = text
    pairs = []
    seen = {}
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if len(tok) != 2:
            raise GraphFormatError(f"expected two node ids, got {len(tok)} tokens", lineno)
        try:
            u, v = int(tok[0]), int(tok[1])
        except ValueError:
            raise GraphFormatError(f"malformed node id in {line!r}", lineno) from None
        if u < 0 or v < 0:
            raise GraphFormatError("node ids must be nonnegative", lineno)
        if u == v:
            raise GraphFormatError(f"self-loop at node {u}", lineno)
        key = (min(u, v), max(u, v))
        if key in seen:
            raise GraphFormatError(f"duplicate edge {u} {v} (first on line {seen[key]})", lineno)
        seen[key] = lineno
        pairs.append(key)
    if not pairs:
        raise GraphFormatError("edge list contains no edges")
    ids = np.unique(np.asarray(pairs, dtype=np.int64))
    if ids[-1] + 1 == len(ids):
        return Graph(len(ids), pairs)
    remap = {int(old): new for new, old in enumerate(ids)}
    return Graph(len(ids), [(remap[u], remap[v]) for u, v in pairs], labels=ids)


def read_edge_list(path) -> Graph:
    with open(path) as fh:
        return load_edge_list(fh)


def format_edge_list(g: Graph) -> str:
    """Edge list text with edges sorted lexicographically (``u < v``)."""
    return "".join(f"{u} {v}\n" for u, v in g.edges)


def write_edge_list(g: Graph, dest) -> None:
    text = format_edge_list(g)
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        with open(dest, "w") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# structural checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GraphReport:
    connected: bool
    bipartite: bool
    n_components: int = 1
    labels: object = field(default=None, repr=False)


def validate(g: Graph) -> GraphReport:
    """BFS connectivity and 2-colouring of ``g``.

    Reports only; callers decide what to do with a bipartite or disconnected
    graph. ``labels`` echoes the id mapping of a compacted edge list.
    """
    colour = np.full(g.n, -1, dtype=np.int8)
    bipartite = True
    ncomp = 0
    indptr, indices = g.indptr, g.indices
    for s in range(g.n):
        if colour[s] >= 0:
            continue
        ncomp += 1
        colour[s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            cu = colour[u]
            for v in indices[indptr[u]:indptr[u + 1]]:
                if colour[v] < 0:
                    colour[v] = 1 - cu
                    queue.append(v)
                elif colour[v] == cu:
                    bipartite = False
    return GraphReport(connected=ncomp <= 1, bipartite=bipartite, n_components=ncomp, labels=g.labels)


def stationary_distribution(g: Graph) -> np.ndarray:
    """``pi_i = k_i / 2m``."""
    if g.m == 0:
        raise ValidationError("graph has no edges")
    return g.degrees / (2.0 * g.m)


def _is_connected(n, edges) -> bool:
    if n == 0:
        return True
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    a = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    ncomp, _ = connected_components(a, directed=False)
    return ncomp == 1


# ---------------------------------------------------------------------------
# stub matching
# ---------------------------------------------------------------------------

def _suitable(edges, potential, allowed) -> bool:
    # True when at least one admissible pair among leftover stubs remains.
    if not potential:
        return True
    nodes = list(potential)
    for a in range(len(nodes)):
        for b in range(a):
            s1, s2 = nodes[a], nodes[b]
            if s1 > s2:
                s1, s2 = s2, s1
            if (s1, s2) not in edges and allowed(s1, s2):
                return True
    return False


def _pair_stubs(stubs, rng, allowed=None, max_rounds=1000):
    """Pair stubs uniformly, rejecting loops, repeats and disallowed pairs.

    Rejected stubs go back into the pool and are reshuffled (the
    Steger-Wormald scheme). Returns a set of ``(u, v)`` with ``u < v`` or
    ``None`` when the pool jams.
    """
    if allowed is None:
        allowed = _always
    edges = set()
    stubs = np.asarray(stubs, dtype=np.int64)
    for _ in range(max_rounds):
        if len(stubs) == 0:
            return edges
        stubs = rng.permutation(stubs)
        potential = Counter()
        for s1, s2 in zip(stubs[0::2].tolist(), stubs[1::2].tolist()):
            if s1 > s2:
                s1, s2 = s2, s1
            if s1 != s2 and (s1, s2) not in edges and allowed(s1, s2):
                edges.add((s1, s2))
            else:
                potential[s1] += 1
                potential[s2] += 1
        stubs = np.asarray([u for u, c in potential.items() for _ in range(c)], dtype=np.int64)
        if not _suitable(edges, potential, allowed):
            return _switch_repair(edges, stubs, rng, allowed)
    return None


def _switch_repair(edges, stubs, rng, allowed, max_tries=10000):
    """Place jammed leftover stubs by rewiring random existing edges.

    Stubs ``s1, s2`` and an edge ``(a, b)`` become ``(s1, a), (s2, b)``
    when both new pairs are admissible. Returns ``None`` if no switch is
    found within ``max_tries``.
    """
    pool = rng.permutation(stubs).tolist()
    elist = list(edges)
    while pool:
        s1, s2 = pool.pop(), pool.pop()
        for _ in range(max_tries):
            k = int(rng.integers(len(elist))) if elist else -1
            if k < 0:
                return None
            a, b = elist[k]
            if rng.random() < 0.5:
                a, b = b, a
            e1 = (min(s1, a), max(s1, a))
            e2 = (min(s2, b), max(s2, b))
            if (s1 != a and s2 != b and e1 != e2 and e1 not in edges and e2 not in edges
                    and allowed(*e1) and allowed(*e2)):
                edges.discard(elist[k])
                edges.add(e1)
                edges.add(e2)
                elist[k] = e1
                elist.append(e2)
                break
        else:
            return None
    return edges


def _always(u, v):
    return True


def _rng(seed):
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def gen_random_regular(n: int, d: int, seed=None, max_attempts: int = 1000) -> Graph:
    """Connected simple ``d``-regular graph from configuration-model pairing.

    Loops and multi-edges are rejected during pairing; a disconnected result
    is thrown away and regenerated. Deterministic for a given ``seed``.
    """
    n, d = int(n), int(d)
    if d < 0 or n <= 0:
        raise ValidationError("need n > 0 and d >= 0")
    if (n * d) % 2:
        raise ValidationError(f"n*d must be even (handshake parity); got n={n}, d={d}")
    if d >= n:
        raise ValidationError(f"degree d={d} must be smaller than n={n}")
    rng = _rng(seed)
    stubs = np.repeat(np.arange(n), d)
    for _ in range(max_attempts):
        edges = _pair_stubs(stubs, rng)
        if edges is None:
            continue
        edges = sorted(edges)
        if _is_connected(n, edges):
            return Graph(n, edges)
    raise ValidationError(f"no connected {d}-regular graph on {n} nodes after {max_attempts} attempts")


def gen_gnm(n: int, m: int, seed=None) -> Graph:
    """Uniform G(n, m) sample reduced to its largest connected component.

    The component is relabelled ``0..n'-1`` in increasing order of the
    original ids, which are kept in :attr:`Graph.labels`.
    """
    n, m = int(n), int(m)
    if n <= 0 or m < 0:
        raise ValidationError("need n > 0 and m >= 0")
    if m > n * (n - 1) // 2:
        raise ValidationError(f"m={m} exceeds the n(n-1)/2={n * (n - 1) // 2} possible edges")
    rng = _rng(seed)
    chosen = {}
    while len(chosen) < m:
        need = m - len(chosen)
        uv = rng.integers(0, n, size=(2 * need + 16, 2))
        for u, v in uv.tolist():
            if u == v:
                continue
            key = (u, v) if u < v else (v, u)
            if key not in chosen:
                chosen[key] = None
                if len(chosen) == m:
                    break
    e = np.asarray(list(chosen), dtype=np.int64).reshape(-1, 2)
    a = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    _, comp = connected_components(a, directed=False)
    sizes = np.bincount(comp)
    big = int(np.argmax(sizes))
    keep = np.flatnonzero(comp == big)
    remap = np.full(n, -1, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    e = e[comp[e[:, 0]] == big]
    return Graph(len(keep), remap[e], labels=keep)


def gen_regular_sbm(n: int, d: int, c: int, in_frac: float, seed=None, max_attempts: int = 200) -> Graph:
    """Degree-regular stochastic block model with ``c`` equal groups.

    Node ``v`` belongs to group ``v // (n // c)``. Each node splits its ``d``
    stubs into in-group and out-group stubs by a Binomial(d, in_frac) draw;
    odd in-group stub totals are fixed by moving one stub of a random group
    member. In-group stubs are paired within the group and out-group stubs
    across groups, with loops, repeats and same-group pairs rejected. Every
    node has degree exactly ``d``; the in-group fraction holds in
    expectation.
    """
    n, d, c = int(n), int(d), int(c)
    if c <= 0 or n <= 0 or n % c:
        raise ValidationError(f"n={n} must be a positive multiple of c={c}")
    if (n * d) % 2:
        raise ValidationError(f"n*d must be even; got n={n}, d={d}")
    if not 0.0 <= in_frac <= 1.0:
        raise ValidationError("in_frac must lie in [0, 1]")
    size = n // c
    if d >= n:
        raise ValidationError(f"degree d={d} must be smaller than n={n}")
    rng = _rng(seed)
    group = np.arange(n) // size

    def across(u, v):
        return group[u] != group[v]

    for _ in range(max_attempts):
        if c == 1:
            k_in = np.full(n, d, dtype=np.int64)
        else:
            k_in = rng.binomial(d, in_frac, size=n).astype(np.int64)
            np.minimum(k_in, size - 1, out=k_in)
            for gi in range(c):
                members = np.arange(gi * size, (gi + 1) * size)
                if k_in[members].sum() % 2 == 0:
                    continue
                v = int(rng.choice(members))
                if k_in[v] == 0:
                    k_in[v] += 1
                elif k_in[v] >= min(d, size - 1):
                    k_in[v] -= 1
                else:
                    k_in[v] += 1 if rng.random() < 0.5 else -1
        edges = set()
        ok = True
        for gi in range(c):
            members = np.arange(gi * size, (gi + 1) * size)
            stubs = np.repeat(members, k_in[members])
            part = _pair_stubs(stubs, rng)
            if part is None:
                ok = False
                break
            edges |= part
        if not ok:
            continue
        if c > 1:
            out = np.repeat(np.arange(n), d - k_in)
            part = _pair_stubs(out, rng, allowed=across)
            if part is None:
                continue
            edges |= part
        edges = sorted(edges)
        if _is_connected(n, edges):
            return Graph(n, edges)
    raise ValidationError(
        f"regular SBM infeasible or unlucky: n={n}, d={d}, c={c}, in_frac={in_frac} "
        f"after {max_attempts} attempts"
    )


def sbm_groups(n: int, c: int) -> np.ndarray:
    """Group label of each node as assigned by :func:`gen_regular_sbm`."""
    return np.arange(n) // (n // c)


# ---------------------------------------------------------------------------
# degree laws
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DegreeLaw:
    """Degree distribution ``rho_k`` on ``0..support``.

    Build with :meth:`regular`, :meth:`poisson` or :meth:`explicit`.
    ``param`` holds ``d`` or the Poisson mean; it is ``None`` for explicit
    tables.
    """

    kind: str
    pmf: np.ndarray
    param: float | None = None

    def __post_init__(self):
        p = np.asarray(self.pmf, dtype=np.float64)
        if p.ndim != 1 or len(p) == 0 or np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValidationError("degree probabilities must be finite and nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValidationError(f"degree probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "pmf", _frozen(p))
        if self.mean <= 0:
            raise ValidationError("mean degree must be positive")

    @classmethod
    def regular(cls, d: int) -> "DegreeLaw":
        d = int(d)
        if d < 0:
            raise ValidationError("degree must be nonnegative")
        p = np.zeros(d + 1)
        p[d] = 1.0
        return cls("regular", p, float(d))

    @classmethod
    def poisson(cls, lam: float, tail: float = 1e-17) -> "DegreeLaw":
        lam = float(lam)
        if lam <= 0:
            raise ValidationError("Poisson mean must be positive")
        # extend the support until the neglected tail mass is below `tail`
        kmax = int(lam + 10.0 * math.sqrt(lam) + 10)
        while _poisson.sf(kmax, lam) > tail:
            kmax *= 2
        p = _poisson.pmf(np.arange(kmax + 1), lam)
        p[-1] += 1.0 - p.sum()
        return cls("poisson", p, lam)

    @classmethod
    def explicit(cls, table) -> "DegreeLaw":
        """From a sequence ``rho_0, rho_1, ...`` or a ``{k: rho_k}`` mapping."""
        if isinstance(table, dict):
            kmax = max(int(k) for k in table)
            p = np.zeros(kmax + 1)
            for k, v in table.items():
                p[int(k)] = v
        else:
            p = np.asarray(table, dtype=np.float64)
        return cls("explicit", p)

    @property
    def support(self) -> int:
        return len(self.pmf) - 1

    @property
    def mean(self) -> float:
        if self.kind == "poisson":
            return float(self.param)
        return float(np.dot(np.arange(len(self.pmf)), self.pmf))

    @property
    def size_biased_pmf(self) -> np.ndarray:
        k = np.arange(len(self.pmf))
        q = k * self.pmf
        return q / q.sum()

    def sample(self, rng, size) -> np.ndarray:
        """Degrees drawn from ``rho_k``."""
        if self.kind == "regular":
            return np.full(size, int(self.param), dtype=np.int64)
        if self.kind == "poisson":
            return rng.poisson(self.param, size=size).astype(np.int64)
        return rng.choice(len(self.pmf), size=size, p=self.pmf).astype(np.int64)

    def sample_size_biased(self, rng, size) -> np.ndarray:
        """Degrees drawn from ``k rho_k / <k>``; exact ``1 + Poisson`` for Poisson laws."""
        if self.kind == "regular":
            return np.full(size, int(self.param), dtype=np.int64)
        if self.kind == "poisson":
            return 1 + rng.poisson(self.param, size=size).astype(np.int64)
        return rng.choice(len(self.pmf), size=size, p=self.size_biased_pmf).astype(np.int64)
