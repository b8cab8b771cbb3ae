"""Population dynamics for the ensemble distribution of tree messages at z = 1.

A population member ``(F, F', k)`` stands for a message ``F~_{i<-j}`` that
points at a node ``j`` of degree ``k``; ``k`` is drawn size-biased,
``k rho_k / <k>``. The update sums over the ``k - 1`` children of ``j`` (the
cavity excludes the node the message is sent to)::

    F = sum_{u=1}^{k-1} z**2 / (k k_u (1 - F_u))

evaluated with its ``z``-derivative at ``z = 1``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import NumericalError, ValidationError
from .graph import DegreeLaw

__all__ = [
    "Population",
    "popdyn_solve",
    "predict_tail_slopes",
    "SlopeSamples",
    "node_slopes",
    "write_population_csv",
    "write_slopes_csv",
]

DEFAULT_N = 100_000
DEFAULT_SWEEPS = 1000
MIN_N = 1000


@dataclass(eq=False)
class Population:
    """Samples of ``(F(1), F'(1), k)``; ``mean_history[s]`` is the mean of ``F(1)`` after sweep ``s + 1``."""

    val: np.ndarray
    der: np.ndarray
    k: np.ndarray
    sweeps_run: int = 0
    mean_history: list = field(default_factory=list)

    @property
    def N(self) -> int:
        return len(self.val)


@numba.njit(cache=True)
def _sweep_sequential(val, der, kk, knew, members):
    # In place, slot by slot: later slots may read members updated earlier in the sweep.
    pos = 0
    for i in range(val.shape[0]):
        k = knew[i]
        v = 0.0
        d = 0.0
        for _ in range(k - 1):
            j = members[pos]
            pos += 1
            g = 1.0 / (1.0 - val[j])
            term = g / (k * kk[j])
            v += term
            d += term * (2.0 + der[j] * g)
        val[i] = v
        der[i] = d
        kk[i] = k


def _sweep_snapshot(val, der, kk, knew, members):
    # Every slot reads the frozen pre-sweep population.
    rows = np.repeat(np.arange(len(knew)), knew - 1)
    g = 1.0 / (1.0 - val[members])
    term = g / (knew[rows] * kk[members])
    v = np.bincount(rows, weights=term, minlength=len(knew))
    d = np.bincount(rows, weights=term * (2.0 + der[members] * g), minlength=len(knew))
    val[:] = v
    der[:] = d
    kk[:] = knew


def popdyn_solve(
    law: DegreeLaw,
    N: int = DEFAULT_N,
    sweeps: int = DEFAULT_SWEEPS,
    seed=None,
    *,
    mode: str = "sequential",
) -> Population:
    """Run population-dynamics sweeps from a uniform ``[0, 0.5)`` start.

    Members of degree 1 start at their exact value 0 instead.

    Parameters
    ----------
    law : DegreeLaw
    N : int
        Population size, at least 1000.
    sweeps : int
        Number of full sweeps of ``N`` slot updates.
    seed : int or Generator
    mode : {"sequential", "snapshot"}
        ``"sequential"`` overwrites slots in place during a sweep (the
        reference); ``"snapshot"`` updates all slots from a frozen copy.

    Random numbers are drawn per sweep with numpy, so results depend only
    on the seed, not on the kernel.
    """
    if not isinstance(law, DegreeLaw):
        raise ValidationError("law must be a DegreeLaw")
    N = int(N)
    if N < MIN_N:
        raise ValidationError(f"population size must be at least {MIN_N}, got {N}")
    if int(sweeps) < 0:
        raise ValidationError("sweeps must be nonnegative")
    if mode not in ("sequential", "snapshot"):
        raise ValidationError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    val = rng.uniform(0.0, 0.5, size=N)
    der = np.zeros(N)
    kk = law.sample_size_biased(rng, N).astype(np.int64)
    # a message into a leaf has no children and is exactly 0; with this start
    # every later value obeys F <= (k - 1) / k < 1
    val[kk == 1] = 0.0
    pop = Population(val, der, kk)
    kernel = _sweep_sequential if mode == "sequential" else _sweep_snapshot
    for _ in range(int(sweeps)):
        knew = law.sample_size_biased(rng, N).astype(np.int64)
        members = rng.integers(0, N, size=int(np.sum(knew - 1)))
        kernel(val, der, kk, knew, members)
        if not (np.all(np.isfinite(val)) and np.all(np.isfinite(der))):
            raise NumericalError(f"non-finite message after sweep {pop.sweeps_run + 1}; the law has no valid fixed point")
        if np.any(val >= 1.0):
            raise NumericalError(f"message value reached 1 after sweep {pop.sweeps_run + 1}")
        pop.sweeps_run += 1
        pop.mean_history.append(float(val.mean()))
    return pop


@dataclass(eq=False)
class SlopeSamples:
    """Predicted tail slopes with their node degrees; ``skipped`` counts dropped draws."""

    k: np.ndarray
    slope: np.ndarray
    skipped: int = 0

    def by_degree(self) -> dict:
        return {int(d): self.slope[self.k == d] for d in np.unique(self.k)}


def predict_tail_slopes(
    pop: Population,
    law: DegreeLaw,
    n: int,
    samples: int = 10_000,
    seed=None,
    *,
    two_m: float | None = None,
) -> SlopeSamples:
    """Tail slopes of random nodes built from population messages.

    Each sample draws a node degree ``k ~ rho_k`` and ``k`` members, forms
    ``F(1), F'(1)`` of the marginal, and converts
    ``h = (2m - k F'(1)) / (k (1 - F(1)))`` to ``-ln(1 - 1/h)``. By default
    ``2m = n <k>``; ``two_m`` overrides it, for comparing with a concrete
    graph. Degree-zero draws are redrawn away (isolated nodes never return).
    Draws with ``F(1) = 1`` (a finite tree, no tail) or ``h <= 1`` are
    dropped and counted in ``skipped``.
    """
    samples = int(samples)
    if samples < 1:
        raise ValidationError("samples must be positive")
    two_m = float(n) * law.mean if two_m is None else float(two_m)
    rng = np.random.default_rng(seed)
    k = law.sample(rng, samples).astype(np.int64)
    while np.any(k == 0):
        bad = k == 0
        k[bad] = law.sample(rng, int(bad.sum()))
    slope = _slopes_for_degrees(pop, k, two_m, rng)
    ok = ~np.isnan(slope)
    return SlopeSamples(k[ok], slope[ok], int(samples - ok.sum()))


def node_slopes(pop: Population, degrees, two_m: float, seed=None) -> np.ndarray:
    """One predicted slope per node of a concrete graph, given its degree; ``nan`` when dropped."""
    k = np.asarray(degrees, dtype=np.int64)
    if np.any(k < 1):
        raise ValidationError("node degrees must be positive")
    return _slopes_for_degrees(pop, k, float(two_m), np.random.default_rng(seed))


def _slopes_for_degrees(pop, k, two_m, rng):
    n = len(k)
    rows = np.repeat(np.arange(n), k)
    members = rng.integers(0, pop.N, size=len(rows))
    g = 1.0 / (1.0 - pop.val[members])
    term = g / (k[rows] * pop.k[members])
    F1 = np.bincount(rows, weights=term, minlength=n)
    F1p = np.bincount(rows, weights=term * (2.0 + pop.der[members] * g), minlength=n)
    kf = k.astype(np.float64)
    denom = kf * (1.0 - F1)
    live = denom > 1e-10 * kf  # F(1) = 1: finite component, no geometric tail
    h = np.full(n, np.nan)
    h[live] = (two_m - kf[live] * F1p[live]) / denom[live]
    out = np.full(n, np.nan)
    ok = live & (h > 1.0)
    out[ok] = -np.log1p(-1.0 / h[ok])
    return out


def write_population_csv(pop: Population, fh) -> None:
    """Columns F_val, F_der, k."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["F_val", "F_der", "k"])
    for v, d, k in zip(pop.val.tolist(), pop.der.tolist(), pop.k.tolist()):
        w.writerow([format(v, ".17g"), format(d, ".17g"), k])


def write_slopes_csv(s: SlopeSamples, fh) -> None:
    """Columns k, slope."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["k", "slope"])
    for k, sl in zip(s.k.tolist(), s.slope.tolist()):
        w.writerow([k, format(sl, ".17g")])

