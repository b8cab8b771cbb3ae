"""Exponential tail slopes, fitted or predicted from the tail mean.

Slopes use natural logs: ``y[t] ~ C exp(-slope * t)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .report import TailMean

__all__ = ["TailFit", "fit_tail_slope", "slope_from_h", "MIN_POINTS"]

MIN_POINTS = 20


@dataclass(frozen=True)
class TailFit:
    """Least-squares tail fit over ``window = (t_lo, t_hi)``."""

    slope: float
    window: tuple
    r2: float


def fit_tail_slope(y, floor: float = 1e-14, window_frac: float = 0.5) -> TailFit:
    """Fit ``ln y[t]`` against ``t`` over the trailing part of the tail.

    Parameters
    ----------
    y : array_like
        Distribution indexed by ``t``; ``y[0]`` is ignored.
    floor : float
        Entries at or below this are excluded (underflow and noise).
    window_frac : float
        Fraction of the qualifying entries, counted from the end, that
        enter the fit.

    If every odd entry is zero (period-2 walks) only even ``t`` are used, so
    the fitted line is not pulled down by the zeros.
    """
    y = np.asarray(y, dtype=np.float64)
    if not 0.0 < window_frac <= 1.0:
        raise ValidationError("window_frac must lie in (0, 1]")
    t = np.arange(len(y))
    keep = (t >= 1) & (y > floor)
    if len(y) > 2 and not np.any(y[1::2] > floor) and np.any(y[2::2] > floor):
        keep &= t % 2 == 0
    idx = np.flatnonzero(keep)
    if len(idx) < MIN_POINTS:
        raise ValidationError(f"tail fit needs at least {MIN_POINTS} entries above {floor:g}, got {len(idx)}")
    idx = idx[len(idx) - max(int(math.ceil(window_frac * len(idx))), 2):]
    if len(idx) < 2:
        raise ValidationError("tail fit window holds fewer than two points")
    tt = t[idx].astype(np.float64)
    ly = np.log(y[idx])
    grad, icpt = np.polyfit(tt, ly, 1)
    resid = ly - (grad * tt + icpt)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - float(np.sum(resid**2)) / ss_tot)
    return TailFit(float(-grad), (int(idx[0]), int(idx[-1])), min(r2, 1.0))


def slope_from_h(h) -> float:
    """Decay rate ``-ln(1 - 1/h)`` of a geometric tail with mean ``h``.

    For large ``h`` this is ``1/h`` to leading order.
    """
    if isinstance(h, TailMean):
        if not h.enabled:
            raise ValidationError("tail mean is disabled; no geometric tail")
        h = h.h
    h = float(h)
    if not h > 1.0:
        raise ValidationError(f"tail mean must exceed 1, got {h!r}")
    return -math.log1p(-1.0 / h)
