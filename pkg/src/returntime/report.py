"""Per-node result bundles and their CSV layout."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .exact import ReturnDistribution
from .series import DualPair

__all__ = ["TailMean", "ReturnReport", "corrected_stats", "write_reports_csv", "fmt"]


def fmt(x) -> str:
    """Full-precision float text (17 significant digits); blank for None."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


@dataclass(frozen=True)
class TailMean:
    """Mean of the geometric tail correction, or disabled.

    Disabled means the uncorrected approximation is already recurrent
    (``F(1) = 1``), so no correction is added.
    """

    h: float = math.nan

    @classmethod
    def disabled(cls) -> "TailMean":
        return cls(math.nan)

    @property
    def enabled(self) -> bool:
        return not math.isnan(self.h)

    def __float__(self):
        if not self.enabled:
            raise ValueError("tail mean is disabled")
        return self.h


@dataclass(frozen=True, eq=False)
class ReturnReport(ReturnDistribution):
    """Approximate first-return distribution of one node plus its statistics.

    ``F1`` and ``F1prime`` are ``F(1)`` and ``F'(1)`` of the uncorrected
    (tree or neighbourhood) generating function; after the tail correction
    the totals are 1 and ``2m/k`` by construction, see :func:`corrected_stats`.
    """

    k: int = 0
    F1: float = math.nan
    F1prime: float = math.nan
    h: TailMean = TailMean()
    fit: object = None

    @property
    def slope(self):
        return None if self.fit is None else self.fit.slope

    def total_stats(self) -> DualPair:
        return corrected_stats(DualPair(self.F1, self.F1prime), self.h)


def corrected_stats(stats: DualPair, h: TailMean) -> DualPair:
    """``(F(1), F'(1))`` of ``F~(z) + (z - z F~(1)) / (z + h - z h)`` by dual arithmetic."""
    if not h.enabled:
        return stats
    z = DualPair.variable(1.0)
    a = stats.val
    return stats + (z - z * a) / (z + h.h - z * h.h)


def write_reports_csv(reports, fh) -> None:
    """Long CSV: one row per (node, t) carrying the node's statistics.

    Columns: node, k, F1, F1prime, h, slope, t_lo, t_hi, r2, t, y.
    """
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["node", "k", "F1", "F1prime", "h", "slope", "t_lo", "t_hi", "r2", "t", "y"])
    for r in reports:
        fit = r.fit
        head = [
            r.node,
            r.k,
            fmt(r.F1),
            fmt(r.F1prime),
            fmt(r.h.h) if r.h.enabled else "",
            fmt(fit.slope) if fit else "",
            fit.window[0] if fit else "",
            fit.window[1] if fit else "",
            fmt(fit.r2) if fit else "",
        ]
        y = np.asarray(r.y)
        for t in range(1, len(y)):
            w.writerow(head + [t, fmt(y[t])])
