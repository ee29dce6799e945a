"""Truncated power series in double precision.

A :class:`Series` stores the Taylor coefficients of a function about
``base_point``: ``coeffs[j]`` multiplies ``(x - base_point)**j``.  All
operations truncate at the common order.  Reversion uses Newton iteration on
formal series, which doubles the number of correct coefficients per sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, CriticalPointError, DomainError, SingularSeriesError

__all__ = [
    "Series",
    "series_arith",
    "series_compose",
    "series_elementary",
    "invert_series",
    "constant",
    "variable",
]


@dataclass(frozen=True, eq=False)
class Series:
    base_point: float
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ContractError("coeffs must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(c)):
            raise ContractError("series coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "base_point", float(self.base_point))

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    def __repr__(self):
        return f"Series(base_point={self.base_point!r}, coeffs={self.coeffs.tolist()!r})"

    def __call__(self, x):
        """Evaluate the truncated polynomial at ``x`` (Horner)."""
        t = np.asarray(x, dtype=float) - self.base_point
        out = np.zeros_like(t) + self.coeffs[-1]
        for c in self.coeffs[-2::-1]:
            out = out * t + c
        return out

    def derivative(self) -> "Series":
        j = np.arange(1, self.coeffs.size)
        d = self.coeffs[1:] * j
        return Series(self.base_point, np.append(d, 0.0) if d.size else [0.0])

    def shifted(self, value: float) -> "Series":
        """Same series with the constant term replaced by ``value``."""
        c = self.coeffs.copy()
        c[0] = value
        return Series(self.base_point, c)

    def _coerce(self, other):
        if isinstance(other, Series):
            return other
        return constant(float(other), self.base_point, self.order)

    def __add__(self, other):
        return series_arith(self, self._coerce(other), "add")

    __radd__ = __add__

    def __sub__(self, other):
        return series_arith(self, self._coerce(other), "sub")

    def __rsub__(self, other):
        return series_arith(self._coerce(other), self, "sub")

    def __mul__(self, other):
        if not isinstance(other, Series):
            return Series(self.base_point, self.coeffs * float(other))
        return series_arith(self, other, "mul")

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Series):
            return Series(self.base_point, self.coeffs / float(other))
        return series_arith(self, other, "div")

    def __rtruediv__(self, other):
        return series_arith(self._coerce(other), self, "div")

    def __neg__(self):
        return Series(self.base_point, -self.coeffs)

    def __pow__(self, k: int):
        if int(k) != k or k < 0:
            raise ContractError("only non-negative integer powers are supported")
        out = constant(1.0, self.base_point, self.order)
        base = self
        k = int(k)
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out


def constant(value: float, base_point: float = 0.0, order: int = 0) -> Series:
    c = np.zeros(order + 1)
    c[0] = value
    return Series(base_point, c)


def variable(base_point: float, order: int) -> Series:
    """The identity function x about ``base_point``."""
    c = np.zeros(order + 1)
    c[0] = base_point
    if order >= 1:
        c[1] = 1.0
    return Series(base_point, c)


def _mul(a: np.ndarray, b: np.ndarray, order: int) -> np.ndarray:
    return np.convolve(a, b)[: order + 1]


def _div(a: np.ndarray, b: np.ndarray, order: int) -> np.ndarray:
    if b[0] == 0.0:
        raise SingularSeriesError("division by a series with zero constant term")
    out = np.zeros(order + 1)
    for k in range(order + 1):
        acc = a[k] - np.dot(out[:k], b[k:0:-1])
        out[k] = acc / b[0]
    return out


def series_arith(a: Series, b: Series, op: str) -> Series:
    if a.order != b.order:
        m = min(a.order, b.order)
        a = Series(a.base_point, a.coeffs[: m + 1])
        b = Series(b.base_point, b.coeffs[: m + 1])
    if not math.isclose(a.base_point, b.base_point, rel_tol=1e-12, abs_tol=1e-12):
        raise ContractError(f"base points differ: {a.base_point} vs {b.base_point}")
    J = a.order
    if op == "add":
        c = a.coeffs + b.coeffs
    elif op == "sub":
        c = a.coeffs - b.coeffs
    elif op == "mul":
        c = _mul(a.coeffs, b.coeffs, J)
    elif op == "div":
        c = _div(a.coeffs, b.coeffs, J)
    else:
        raise ContractError(f"unknown series operation {op!r}")
    return Series(a.base_point, c)


def series_compose(outer: Series, inner: Series) -> Series:
    """Taylor coefficients of ``outer(inner(x))`` about ``inner.base_point``."""
    c0 = inner.coeffs[0]
    if not math.isclose(c0, outer.base_point, rel_tol=1e-12, abs_tol=1e-12):
        raise ContractError(
            f"inner(base) = {c0} does not match outer base point {outer.base_point}"
        )
    J = min(outer.order, inner.order)
    dt = inner.coeffs[: J + 1].copy()
    dt[0] = 0.0
    out = np.zeros(J + 1)
    out[0] = outer.coeffs[J]
    for k in range(J - 1, -1, -1):
        out = _mul(out, dt, J)
        out[0] += outer.coeffs[k]
    return Series(inner.base_point, out)


def series_elementary(f: str, center: float, order: int, alpha: float | None = None) -> Series:
    """Taylor series of an elementary function about ``center``.

    ``f`` is one of ``arctan``, ``sin``, ``cos``, ``exp``, ``ln1p`` or
    ``pow_alpha``; the last two are ``ln(1+x)`` and ``(1+x)**alpha``.
    """
    J = int(order)
    k = np.arange(J + 1)
    fact = np.array([math.factorial(int(i)) for i in k], dtype=float)
    if f == "sin":
        c = np.sin(center + k * math.pi / 2) / fact
    elif f == "cos":
        c = np.cos(center + k * math.pi / 2) / fact
    elif f == "exp":
        c = math.exp(center) / fact
    elif f == "arctan":
        c = np.zeros(J + 1)
        c[0] = math.atan(center)
        if J >= 1:
            denom = np.zeros(J)
            denom[0] = 1.0 + center * center
            if J >= 2:
                denom[1] = 2.0 * center
            if J >= 3:
                denom[2] = 1.0
            one = np.zeros(J)
            one[0] = 1.0
            d = _div(one, denom, J - 1)
            c[1:] = d / np.arange(1, J + 1)
    elif f == "ln1p":
        if not center > -1.0:
            raise DomainError(f"ln1p is singular at center {center} <= -1")
        q = 1.0 + center
        c = np.zeros(J + 1)
        c[0] = math.log(q)
        kk = k[1:]
        c[1:] = (-1.0) ** (kk + 1) / (kk * q**kk)
    elif f == "pow_alpha":
        if alpha is None:
            raise ContractError("pow_alpha needs alpha")
        q = 1.0 + center
        if not q > 0.0:
            if float(alpha).is_integer() and alpha >= 0:
                return _int_power(center, int(alpha), J)
            raise DomainError(f"(1+x)^alpha is not analytic at center {center}")
        c = np.zeros(J + 1)
        c[0] = q**alpha
        for j in range(1, J + 1):
            c[j] = c[j - 1] * (alpha - j + 1) / (j * q)
    else:
        raise ContractError(f"unknown elementary function {f!r}")
    return Series(center, c)


def _int_power(center, p, J):
    base = variable(center, J) + 1.0
    s = base**p
    return Series(center, s.coeffs)


def invert_series(G: Series, order: int | None = None) -> Series:
    """Revert ``xi = G(w)`` about ``w0 = G.base_point``.

    Returns the series of ``w(xi)`` about ``xi0 = G.coeffs[0]``.  Raises
    :class:`CriticalPointError` if ``G'(w0) = 0``.
    """
    J = G.order if order is None else int(order)
    if J > G.order:
        raise ContractError(f"requested order {J} exceeds G's order {G.order}")
    g = np.array(G.coeffs[: J + 1])
    scale = max(1.0, float(np.max(np.abs(g[1:])))) if J >= 1 else 1.0
    if J >= 1 and abs(g[1]) <= 1e-13 * scale:
        raise CriticalPointError(
            f"G'(w0) = {float(g[1])!r} vanishes at w0 = {G.base_point}; the branch is not "
            "analytically invertible there"
        )
    out = np.zeros(J + 1)
    out[0] = G.base_point
    if J == 0:
        return Series(g[0], out)

    gs = Series(0.0, np.concatenate([[0.0], g[1:]]))
    dgs = gs.derivative()
    s = np.zeros(J + 1)
    s[1] = 1.0
    h = np.zeros(J + 1)
    h[1] = 1.0 / g[1]
    sweeps = int(math.ceil(math.log2(J + 1))) + 2
    for _ in range(sweeps):
        hs = Series(0.0, h)
        resid = series_compose(gs, hs).coeffs - s
        slope = series_compose(dgs, hs).coeffs
        h = h - _div(resid, slope, J)
        h[0] = 0.0
    out[1:] = h[1:]
    out[1] = 1.0 / g[1]
    return Series(g[0], out)
