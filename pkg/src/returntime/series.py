"""Truncated power series and first-order dual numbers.

A :class:`PowerSeries` holds the coefficients of ``z**0 .. z**T`` in double
precision; anything beyond order ``T`` is discarded. A :class:`DualPair`
carries a value and a first derivative, which is all that is needed to get
``F(1)`` and ``F'(1)`` exactly without summing a series.
"""
from __future__ import annotations

from dataclasses import dataclass
from numbers import Real

import numpy as np
from scipy.special import binom

from .errors import SingularSystemError, ValidationError

__all__ = [
    "DEFAULT_ORDER",
    "PowerSeries",
    "DualPair",
    "ps_mul",
    "ps_recip",
    "ps_linear_solve",
    "ps_binomial_power",
    "recip_rows",
    "dual_linear_solve",
]

DEFAULT_ORDER = 200

_PIVOT_TOL = 1e-12
_DUAL_TOL = 1e-14


class PowerSeries:
    """Real power series truncated after order ``T``."""

    __slots__ = ("_c",)

    def __init__(self, coeffs):
        c = np.array(coeffs, dtype=np.float64, copy=True).reshape(-1)
        if len(c) == 0:
            raise ValidationError("a series needs at least the constant coefficient")
        if not np.all(np.isfinite(c)):
            raise ValidationError("series coefficients must be finite")
        c.setflags(write=False)
        self._c = c

    @classmethod
    def _wrap(cls, c):
        # trusted construction from a fresh float array
        obj = object.__new__(cls)
        c.setflags(write=False)
        obj._c = c
        return obj

    @classmethod
    def zero(cls, T: int = DEFAULT_ORDER) -> "PowerSeries":
        return cls._wrap(np.zeros(T + 1))

    @classmethod
    def one(cls, T: int = DEFAULT_ORDER) -> "PowerSeries":
        c = np.zeros(T + 1)
        c[0] = 1.0
        return cls._wrap(c)

    @classmethod
    def monomial(cls, k: int, T: int = DEFAULT_ORDER, coef: float = 1.0) -> "PowerSeries":
        c = np.zeros(T + 1)
        if k <= T:
            c[k] = coef
        return cls._wrap(c)

    @property
    def coeffs(self) -> np.ndarray:
        return self._c

    @property
    def T(self) -> int:
        return len(self._c) - 1

    def __len__(self):
        return len(self._c)

    def __getitem__(self, t):
        return self._c[t]

    def __iter__(self):
        return iter(self._c)

    def __repr__(self):
        head = ", ".join(f"{x:.6g}" for x in self._c[:6])
        more = ", ..." if len(self._c) > 6 else ""
        return f"PowerSeries([{head}{more}], T={self.T})"

    def _coerce(self, other):
        if isinstance(other, PowerSeries):
            if other.T != self.T:
                raise ValidationError(f"truncation orders differ: {self.T} vs {other.T}")
            return other._c
        if isinstance(other, Real):
            c = np.zeros_like(self._c)
            c[0] = float(other)
            return c
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return PowerSeries._wrap(self._c + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return PowerSeries._wrap(self._c - o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return PowerSeries._wrap(o - self._c)

    def __neg__(self):
        return PowerSeries._wrap(-self._c)

    def __mul__(self, other):
        if isinstance(other, Real):
            return PowerSeries._wrap(self._c * float(other))
        if isinstance(other, PowerSeries):
            return ps_mul(self, other)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Real):
            return PowerSeries._wrap(self._c / float(other))
        if isinstance(other, PowerSeries):
            return ps_mul(self, ps_recip(other))
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, Real):
            return ps_recip(self) * float(other)
        return NotImplemented

    def recip(self) -> "PowerSeries":
        return ps_recip(self)

    def shift(self, k: int) -> "PowerSeries":
        """Multiply by ``z**k`` (``k >= 0``), dropping orders above ``T``."""
        c = np.zeros_like(self._c)
        if k <= self.T:
            c[k:] = self._c[: len(c) - k]
        return PowerSeries._wrap(c)

    def __call__(self, z: float) -> float:
        """Evaluate the truncated polynomial at ``z``."""
        return float(np.polynomial.polynomial.polyval(z, self._c))

    def allclose(self, other, atol=1e-12, rtol=0.0) -> bool:
        return np.allclose(self._c, np.asarray(other, dtype=float), atol=atol, rtol=rtol)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self._c, dtype=dtype)


def _as_coeffs(a):
    return a.coeffs if isinstance(a, PowerSeries) else np.asarray(a, dtype=np.float64)


def ps_mul(a: PowerSeries, b: PowerSeries) -> PowerSeries:
    """Cauchy product truncated at the shared order ``T``."""
    if a.T != b.T:
        raise ValidationError(f"truncation orders differ: {a.T} vs {b.T}")
    return PowerSeries._wrap(np.convolve(a.coeffs, b.coeffs)[: a.T + 1])


def ps_recip(a: PowerSeries) -> PowerSeries:
    """``1/a`` by forward substitution; needs a nonzero constant term."""
    c = a.coeffs
    if c[0] == 0.0:
        raise ValidationError("reciprocal of a series with zero constant term")
    T = len(c) - 1
    b = np.zeros(T + 1)
    b[0] = 1.0 / c[0]
    for t in range(1, T + 1):
        b[t] = -np.dot(c[1 : t + 1], b[t - 1 :: -1][:t]) / c[0]
    return PowerSeries._wrap(b)


def recip_rows(a: np.ndarray) -> np.ndarray:
    """Row-wise series reciprocal of a ``(rows, T+1)`` coefficient array."""
    a = np.asarray(a, dtype=np.float64)
    if np.any(a[:, 0] == 0.0):
        raise ValidationError("reciprocal of a series with zero constant term")
    T = a.shape[1] - 1
    b = np.zeros_like(a)
    b[:, 0] = 1.0 / a[:, 0]
    for t in range(1, T + 1):
        b[:, t] = -np.einsum("rs,rs->r", a[:, 1 : t + 1], b[:, t - 1 :: -1][:, :t]) / a[:, 0]
    return b


def ps_binomial_power(a: PowerSeries, alpha: float) -> PowerSeries:
    """``a**alpha`` for ``a[0] > 0`` via the binomial series of ``(1+u)**alpha``.

    With ``a = a0 (1 + u)`` and ``u(0) = 0`` the sum
    ``a0**alpha * sum_j binom(alpha, j) u**j`` terminates after ``T`` terms.
    """
    c = a.coeffs
    if c[0] <= 0.0:
        raise ValidationError("binomial power needs a positive constant term")
    T = len(c) - 1
    a0 = c[0]
    u = c / a0
    u[0] = 0.0
    out = np.zeros(T + 1)
    out[0] = 1.0
    upow = np.zeros(T + 1)
    upow[0] = 1.0
    for j in range(1, T + 1):
        upow = np.convolve(upow, u)[: T + 1]
        if not upow.any():
            break
        out += binom(alpha, j) * upow
    return PowerSeries._wrap(out * a0**alpha)


def ps_linear_solve(B, v, *, T: int | None = None) -> list:
    """Solve ``(I - B) x = v`` over the ring of series truncated at ``T``.

    Parameters
    ----------
    B : square nested sequence of PowerSeries, or array ``(s, s, T+1)``
    v : sequence of PowerSeries, or array ``(s, T+1)``

    Gaussian elimination with partial pivoting on the constant terms. A pivot
    below ``1e-12`` raises :class:`SingularSystemError`; in walk-sum use this
    means the neighbourhood covers the whole graph.
    """
    if isinstance(B, np.ndarray):
        Bc = np.array(B, dtype=np.float64)
    else:
        Bc = np.array([[_as_coeffs(b) for b in row] for row in B], dtype=np.float64)
    if isinstance(v, np.ndarray):
        rhs = np.array(v, dtype=np.float64)
    else:
        rhs = np.array([_as_coeffs(x) for x in v], dtype=np.float64)
    s = rhs.shape[0]
    if Bc.shape[:2] != (s, s) or Bc.shape[2] != rhs.shape[1]:
        raise ValidationError(f"shape mismatch: B {Bc.shape}, v {rhs.shape}")
    L = rhs.shape[1]
    M = -Bc
    M[np.arange(s), np.arange(s), 0] += 1.0

    def mul(x, y):
        return np.convolve(x, y)[:L]

    for col in range(s):
        piv = col + int(np.argmax(np.abs(M[col:, col, 0])))
        if abs(M[piv, col, 0]) <= _PIVOT_TOL:
            raise SingularSystemError(
                "singular constant-term matrix (neighbourhood covers graph; reduce r)"
            )
        if piv != col:
            M[[col, piv]] = M[[piv, col]]
            rhs[[col, piv]] = rhs[[piv, col]]
        inv = ps_recip(PowerSeries._wrap(M[col, col].copy())).coeffs
        for row in range(col + 1, s):
            if not M[row, col].any():
                continue
            f = mul(M[row, col], inv)
            for k in range(col, s):
                M[row, k] -= mul(f, M[col, k])
            rhs[row] -= mul(f, rhs[col])
    x = np.zeros_like(rhs)
    for row in range(s - 1, -1, -1):
        acc = rhs[row].copy()
        for k in range(row + 1, s):
            acc -= mul(M[row, k], x[k])
        x[row] = mul(acc, ps_recip(PowerSeries._wrap(M[row, row].copy())).coeffs)
    return [PowerSeries._wrap(r) for r in x]


@dataclass(frozen=True)
class DualPair:
    """Value and first derivative of a function at a point (here ``z = 1``).

    Arithmetic follows the first-order Taylor rules, e.g.
    ``(a, a') * (b, b') = (ab, a'b + ab')``.
    """

    val: float
    der: float = 0.0

    @staticmethod
    def _lift(x):
        if isinstance(x, DualPair):
            return x
        if isinstance(x, Real):
            return DualPair(float(x), 0.0)
        return None

    def __add__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return DualPair(self.val + o.val, self.der + o.der)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return DualPair(self.val - o.val, self.der - o.der)

    def __rsub__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return o - self

    def __neg__(self):
        return DualPair(-self.val, -self.der)

    def __mul__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return DualPair(self.val * o.val, self.der * o.val + self.val * o.der)

    __rmul__ = __mul__

    def recip(self) -> "DualPair":
        if abs(self.val) <= _DUAL_TOL:
            raise ZeroDivisionError("reciprocal of a dual number with zero value")
        return DualPair(1.0 / self.val, -self.der / self.val**2)

    def __truediv__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return self * o.recip()

    def __rtruediv__(self, other):
        o = self._lift(other)
        if o is None:
            return NotImplemented
        return o * self.recip()

    def __iter__(self):
        yield self.val
        yield self.der

    @classmethod
    def variable(cls, at: float = 1.0) -> "DualPair":
        """The identity function ``z`` at ``z = at``."""
        return cls(float(at), 1.0)


def dual_linear_solve(A, dA, b, db):
    """Solve ``A x = b`` and its derivative ``A x' = b' - A' x``.

    Works on stacked systems: ``A`` of shape ``(..., s, s)`` and ``b`` of
    shape ``(..., s)``. Returns ``(x, x')``.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    x = np.linalg.solve(A, b[..., None])[..., 0]
    rhs = np.asarray(db) - np.einsum("...ij,...j->...i", np.asarray(dA), x)
    dx = np.linalg.solve(A, rhs[..., None])[..., 0]
    return x, dx
