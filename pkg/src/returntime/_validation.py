"""Input coercion and checks shared by the estimators and the CLI."""
from __future__ import annotations

import numbers

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError
from .graph import Graph, load_edge_list

__all__ = ["as_graph", "check_nodes", "check_horizon", "check_radius", "check_connected"]


def as_graph(X) -> Graph:
    """Coerce ``X`` into a :class:`Graph`.

    Accepts a Graph, an ``(m, 2)`` integer edge array, a square sparse or
    dense symmetric 0/1 adjacency matrix, edge-list text, or any object with
    ``number_of_nodes()`` and ``edges()`` (a networkx graph, say). Node
    labels of networkx-like objects are mapped to ``0..n-1`` in iteration
    order.
    """
    if isinstance(X, Graph):
        return X
    if isinstance(X, str):
        return load_edge_list(X)
    if hasattr(X, "number_of_nodes") and hasattr(X, "edges"):
        labels = list(X.nodes())
        pos = {v: a for a, v in enumerate(labels)}
        edges = [(pos[u], pos[v]) for u, v in X.edges()]
        return Graph(len(labels), edges, labels=labels)
    if sp.issparse(X):
        A = sp.coo_matrix(X)
        if A.shape[0] != A.shape[1]:
            raise ValidationError(f"adjacency matrix must be square, got {A.shape}")
        return _from_adjacency(A.shape[0], A.row, A.col, A.data)
    a = np.asarray(X)
    if a.ndim == 2 and a.shape[1] == 2 and a.shape[0] != 2:
        if not np.issubdtype(a.dtype, np.integer):
            raise ValidationError("edge array must hold integers")
        n = int(a.max()) + 1 if a.size else 0
        return Graph(n, a)
    if a.ndim == 2 and a.shape[0] == a.shape[1]:
        r, c = np.nonzero(a)
        return _from_adjacency(a.shape[0], r, c, a[r, c])
    raise ValidationError(f"cannot interpret {type(X).__name__} of shape {getattr(a, 'shape', None)} as a graph")


def _from_adjacency(n, rows, cols, data):
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    data = np.asarray(data, dtype=np.float64)
    keep = data != 0
    rows, cols, data = rows[keep], cols[keep], data[keep]
    if np.any(data != 1.0):
        raise ValidationError("adjacency matrix must be 0/1 (unweighted)")
    if np.any(rows == cols):
        raise ValidationError("adjacency matrix has self-loops")
    upper = rows < cols
    fwd = set(zip(rows[upper].tolist(), cols[upper].tolist()))
    back = set(zip(cols[~upper].tolist(), rows[~upper].tolist()))
    if fwd != back:
        raise ValidationError("adjacency matrix must be symmetric")
    return Graph(int(n), sorted(fwd))


def check_nodes(g: Graph, nodes) -> np.ndarray:
    """``None`` means every node; otherwise an int or a 1-d sequence of valid, non-isolated ids."""
    if nodes is None:
        return np.arange(g.n, dtype=np.int64)
    if isinstance(nodes, numbers.Integral):
        nodes = [nodes]
    a = np.asarray(nodes)
    if a.ndim != 1:
        raise ValidationError("nodes must be a 1-d sequence of node ids")
    if a.size and not np.issubdtype(a.dtype, np.integer):
        raise ValidationError("node ids must be integers")
    a = a.astype(np.int64)
    bad = a[(a < 0) | (a >= g.n)]
    if bad.size:
        raise ValidationError(f"node {int(bad[0])} out of range 0..{g.n - 1}")
    iso = a[g.degrees[a] == 0]
    if iso.size:
        raise ValidationError(f"node {int(iso[0])} is isolated")
    return a


def check_horizon(T) -> int:
    if not isinstance(T, numbers.Integral) or isinstance(T, bool) or T < 1:
        raise ValidationError(f"horizon T must be a positive integer, got {T!r}")
    return int(T)


def check_radius(r) -> int:
    from .cycle import MAX_R

    if not isinstance(r, numbers.Integral) or isinstance(r, bool) or not 0 <= r <= MAX_R:
        raise ValidationError(f"radius r must be an integer in 0..{MAX_R}, got {r!r}")
    return int(r)


def check_connected(g: Graph) -> Graph:
    from .graph import validate

    rep = validate(g)
    if not rep.connected:
        raise ValidationError(f"graph is disconnected ({rep.n_components} components); use one component")
    return g
