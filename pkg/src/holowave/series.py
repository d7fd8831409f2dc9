"""Truncated power-series arithmetic in one variable.

A :class:`PowerSeries` holds the coefficients ``c[0..K]`` of
``sum_k c[k] x**k`` and all operations truncate at the common order ``K``.
The operator assembly and the boundary peeling both run on top of this
small engine.
"""

from __future__ import annotations

import numpy as np


class PowerSeries:
    """Truncated power series ``sum_{k<=order} c_k x^k``."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs, order: int | None = None):
        c = np.asarray(coeffs, dtype=float).ravel()
        if order is not None:
            out = np.zeros(order + 1)
            m = min(order + 1, c.size)
            out[:m] = c[:m]
            c = out
        if c.size == 0:
            c = np.zeros(1)
        self.coeffs = c

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    @classmethod
    def constant(cls, value: float, order: int) -> "PowerSeries":
        c = np.zeros(order + 1)
        c[0] = value
        return cls(c)

    @classmethod
    def monomial(cls, power: int, order: int, value: float = 1.0) -> "PowerSeries":
        c = np.zeros(order + 1)
        if power <= order:
            c[power] = value
        return cls(c)

    def truncate(self, order: int) -> "PowerSeries":
        return PowerSeries(self.coeffs, order)

    def _coerce(self, other) -> "PowerSeries":
        if isinstance(other, PowerSeries):
            if other.order != self.order:
                return other.truncate(self.order)
            return other
        return PowerSeries.constant(float(other), self.order)

    def __add__(self, other):
        o = self._coerce(other)
        return PowerSeries(self.coeffs + o.coeffs)

    __radd__ = __add__

    def __neg__(self):
        return PowerSeries(-self.coeffs)

    def __sub__(self, other):
        o = self._coerce(other)
        return PowerSeries(self.coeffs - o.coeffs)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, PowerSeries):
            return PowerSeries(self.coeffs * float(other))
        o = self._coerce(other)
        return PowerSeries(np.convolve(self.coeffs, o.coeffs)[: self.order + 1])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, PowerSeries):
            return PowerSeries(self.coeffs / float(other))
        return self * self._coerce(other).reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def reciprocal(self) -> "PowerSeries":
        """Multiplicative inverse; requires a nonzero constant term."""
        c = self.coeffs
        if c[0] == 0.0:
            raise ZeroDivisionError("series with zero constant term has no reciprocal")
        out = np.zeros_like(c)
        out[0] = 1.0 / c[0]
        for k in range(1, c.size):
            out[k] = -np.dot(c[1 : k + 1], out[k - 1 :: -1][:k]) / c[0]
        return PowerSeries(out)

    def power(self, exponent: float) -> "PowerSeries":
        """Real power of a series with positive constant term.

        Uses the recurrence obtained from ``y' s = exponent * s' y``.
        """
        c = self.coeffs
        if c[0] <= 0.0:
            raise ValueError("real power needs a positive constant term")
        out = np.zeros_like(c)
        out[0] = c[0] ** exponent
        for k in range(1, c.size):
            j = np.arange(1, k + 1)
            out[k] = np.sum((exponent * j - (k - j)) * c[j] * out[k - j]) / (k * c[0])
        return PowerSeries(out)

    def sqrt(self) -> "PowerSeries":
        return self.power(0.5)

    def derivative(self) -> "PowerSeries":
        """Term-wise derivative, padded back to the same order."""
        c = self.coeffs
        d = np.zeros_like(c)
        d[:-1] = c[1:] * np.arange(1, c.size)
        return PowerSeries(d)

    def x_times(self, power: int = 1) -> "PowerSeries":
        """Multiply by ``x**power`` (negative powers need vanishing low terms)."""
        c = self.coeffs
        if power >= 0:
            out = np.zeros_like(c)
            out[power:] = c[: c.size - power] if power else c
            return PowerSeries(out)
        k = -power
        if np.any(np.abs(c[:k]) > 1e-12 * max(1.0, np.max(np.abs(c)))):
            raise ValueError(f"cannot divide by x^{k}: low-order terms do not vanish")
        out = np.zeros_like(c)
        out[: c.size - k] = c[k:]
        return PowerSeries(out)

    def __call__(self, x):
        """Horner evaluation at scalar or array ``x``."""
        x = np.asarray(x, dtype=float)
        acc = np.zeros_like(x) + self.coeffs[-1]
        for ck in self.coeffs[-2::-1]:
            acc = acc * x + ck
        return acc

    def derivative_values(self, x):
        return self.derivative()(x)

    def leading_power(self, tol: float = 0.0) -> int | None:
        """Index of the first coefficient exceeding ``tol`` in magnitude."""
        nz = np.nonzero(np.abs(self.coeffs) > tol)[0]
        return int(nz[0]) if nz.size else None

    def __repr__(self) -> str:
        return f"PowerSeries({self.coeffs.tolist()})"
