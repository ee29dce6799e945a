"""Exterior radial solutions via explicit first integrals.

For a radial solution write ``u'(r)/r = alpha + kappa * W(r)``.  In every case
the ODE for ``W`` separates into ``G(W(r)) = c r^-n``, so on a monotone branch
``W(r) = w(c r^-n)`` with ``w`` the branch inverse of ``G``.  Then

    u(r)   = c2 r^2 + c0 + kappa * int_inf^r (w(c t^-n) - w(0)) t dt
    u''(r) = alpha + kappa * (W - n xi / G'(W)),      xi = c r^-n

with ``c2 = (alpha + kappa w(0)) / 2``.  Expanding ``w`` in powers of ``xi``
gives the series at infinity ``c_{-j} = -kappa w_j / (n j - 2)``.

=========  ==========  ===========  ===========================================
case       alpha       kappa        G(w)
=========  ==========  ===========  ===========================================
MA         0           1            w^n - C'
Small      -a-b        2b           C' w^n - (w-1)^n       (C0 < 0)
Small      b-a         -2b          same with C' -> 1/C'   (C0 > 0, u = -ubar - a r^2)
Inverse    -1          1/C'         w^n - n w^(n-1)        (C' != 0)
Inverse    -1          1            sign(w)|w|^(n-1)       (C' == 0, constant c^(n-1))
Large      -a          b            (w^2+1)^((n-1)/2) (w cos(phi) - sin(phi))
SPL        0           1            (w^2+1)^((n-1)/2) (w cos(Theta) - sin(Theta))
=========  ==========  ===========  ===========================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from . import kernels
from .errors import (
    ContractError,
    CriticalPointError,
    NoSolutionError,
    NumericalError,
    RangeError,
)
from .operator_family import Case, Operator
from .power_series import Series, invert_series, series_compose, series_elementary, variable

SERIES_ORDER = 30
QUAD_NODES = 64
P2_TOL = 1e-12
R_MIN_DEFAULT = 1.25

__all__ = [
    "FirstIntegral",
    "Branch",
    "Expansion",
    "RadialSolution",
    "build_first_integral",
    "branch_catalog",
    "default_branch",
    "invert_numeric",
    "expansion_coefficients",
    "build_solution",
    "measure_branch_exponent",
]


@dataclass(frozen=True, eq=False)
class FirstIntegral:
    op: Operator
    code: int
    param: float
    alpha: float
    kappa: float
    w_singularities: tuple
    description: str
    reflected: bool = False

    def _code_at(self, w):
        if self.code == kernels.LARGE_RIGHT:
            return np.where(np.asarray(w) > -1.0, kernels.LARGE_RIGHT, kernels.LARGE_LEFT)
        return None

    def _eval(self, w):
        w = np.asarray(w, dtype=float)
        n = float(self.op.n)
        if self.code == kernels.LARGE_RIGHT:
            gr, dr = kernels.evaluate(kernels.LARGE_RIGHT, n, self.param, w)
            gl, dl = kernels.evaluate(kernels.LARGE_LEFT, n, self.param, w)
            right = w > -1.0
            return np.where(right, gr, gl), np.where(right, dr, dl)
        return kernels.evaluate(self.code, n, self.param, w)

    def G(self, w):
        g = self._eval(w)[0]
        return g if np.ndim(g) else float(g)

    def dG(self, w):
        d = self._eval(w)[1]
        return d if np.ndim(d) else float(d)


def build_first_integral(op: Operator) -> FirstIntegral:
    n = op.n
    if op.case is Case.MA:
        return FirstIntegral(op, kernels.MA, op.Cprime, 0.0, 1.0, (), "W^n - C' = c r^-n")
    if op.case is Case.SMALL:
        if abs(op.C0) == 0.0 or op.Cprime == 1.0:
            raise NoSolutionError(
                "the small-tau equation with C0 = 0 has no solution on the exterior domain"
            )
        a, b = op.a, op.b
        if op.C0 < 0:
            return FirstIntegral(op, kernels.SMALL, op.Cprime, -a - b, 2 * b, (1.0,),
                                 "C' W^n - (W-1)^n = c r^-n")
        return FirstIntegral(op, kernels.SMALL, 1.0 / op.Cprime, b - a, -2 * b, (1.0,),
                             "C' W^n - (W-1)^n = c r^-n for the reflected function",
                             reflected=True)
    if op.case is Case.INVERSE:
        Cp = op.Cprime
        if Cp == 0.0:
            return FirstIntegral(op, kernels.INVERSE_ZERO, 0.0, -1.0, 1.0, (0.0,),
                                 "sign(W)|W|^(n-1) = sign(c)|c|^(n-1) r^-n")
        return FirstIntegral(op, kernels.INVERSE, float(n), -1.0, 1.0 / Cp, (0.0, n - 1.0),
                             "W^n - n W^(n-1) = c r^-n, W = C'(u'/r + 1)")
    if op.case is Case.LARGE:
        return FirstIntegral(op, kernels.LARGE_RIGHT, op.Cprime, -op.a, op.b, (-1.0,),
                             "(W^2+1)^((n-1)/2) (W cos(pi/4+Theta) - sin(pi/4+Theta)) = c r^-n")
    return FirstIntegral(op, kernels.SPL, op.C0, 0.0, 1.0, (),
                         "(W^2+1)^((n-1)/2) (W cos(Theta) - sin(Theta)) = c r^-n")


@dataclass(eq=False)
class Branch:
    p: int
    w_interval: tuple
    xi_interval: tuple
    w_at_zero: Optional[float]
    analytic_at_zero: bool
    monotone: str
    fi: FirstIntegral = field(repr=False)
    code: int = field(repr=False, default=0)
    xi_names: tuple = ("Xi_1", "Xi_2")
    admissible: bool = False
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def increasing(self) -> bool:
        return self.monotone == "increasing"

    def G(self, w):
        g = kernels.evaluate(self.code, float(self.fi.op.n), self.fi.param, np.asarray(w, float))[0]
        return g if np.ndim(g) else float(g)

    def dG(self, w):
        d = kernels.evaluate(self.code, float(self.fi.op.n), self.fi.param, np.asarray(w, float))[1]
        return d if np.ndim(d) else float(d)

    # -- series data -----------------------------------------------------------------

    def g_series(self, order: int = SERIES_ORDER) -> Series:
        """Taylor series of G about w_at_zero (constant term forced to 0)."""
        key = ("g", order)
        if key not in self._cache:
            s = _g_taylor(self, self.w_at_zero, order)
            self._cache[key] = s.shifted(0.0)
        return self._cache[key]

    def w_series(self, order: int = SERIES_ORDER) -> Series:
        key = ("w", order)
        if key not in self._cache:
            if not self.analytic_at_zero:
                raise CriticalPointError(
                    f"branch p={self.p} is not analytic at xi = 0 (G'(w(0)) = 0 or w(0) "
                    "is a branch endpoint)"
                )
            self._cache[key] = invert_series(self.g_series(order))
        return self._cache[key]

    def _series_radius(self):
        if "rho" not in self._cache:
            self._cache["rho"] = _calibrate_radius(self)
        return self._cache["rho"]

    # -- inversion -------------------------------------------------------------------

    def _bracket(self, xmin, xmax):
        lo, hi = self.w_interval
        s = 1.0 if self.increasing else -1.0
        anchor = self.w_at_zero
        if anchor is None or not np.isfinite(anchor):
            anchor = hi - 1.0 if np.isfinite(hi) else (lo + 1.0 if np.isfinite(lo) else 0.0)
        if not np.isfinite(lo):
            d = 1.0
            lo = anchor - d
            need = xmin if s > 0 else xmax
            while s * (self.G(lo) - need) >= 0:
                d *= 2.0
                lo = anchor - d
                if d > 1e300:
                    raise NumericalError("could not bracket the branch inverse from below")
        if not np.isfinite(hi):
            d = 1.0
            hi = anchor + d
            need = xmax if s > 0 else xmin
            while s * (self.G(hi) - need) <= 0:
                d *= 2.0
                hi = anchor + d
                if d > 1e300:
                    raise NumericalError("could not bracket the branch inverse from above")
        return lo, hi

    def _root(self, xi):
        xi = np.asarray(xi, dtype=float)
        if xi.size == 0:
            return xi.copy()
        lo, hi = self._bracket(float(xi.min()), float(xi.max()))
        return kernels.invert_branch(self.code, float(self.fi.op.n), self.fi.param, xi,
                                     lo, hi, self.increasing)

    def check_range(self, xi, what="xi"):
        xi = np.asarray(xi, dtype=float)
        lo, hi = self.xi_interval
        if xi.size == 0:
            return
        if np.any(~np.isfinite(xi)):
            raise RangeError(f"{what} must be finite", bound=None)
        tol_lo = 1e-14 * max(1.0, abs(lo)) if np.isfinite(lo) else 0.0
        tol_hi = 1e-14 * max(1.0, abs(hi)) if np.isfinite(hi) else 0.0
        if xi.min() < lo - tol_lo:
            raise RangeError(
                f"{what} = {float(xi.min())!r} below {self.xi_names[0]} = {float(lo)!r} on branch p={self.p}",
                bound=self.xi_names[0],
            )
        if xi.max() > hi + tol_hi:
            raise RangeError(
                f"{what} = {float(xi.max())!r} above {self.xi_names[1]} = {float(hi)!r} on branch p={self.p}",
                bound=self.xi_names[1],
            )

    def delta_w(self, xi):
        """w(xi) - w(0), accurate in relative terms as xi -> 0."""
        xi = np.asarray(xi, dtype=float)
        out = np.empty_like(xi)
        w0 = self.w_at_zero
        if self.analytic_at_zero:
            rho = self._series_radius()
            small = np.abs(xi) < rho
            if small.any():
                c = self.w_series().coeffs.copy()
                c[0] = 0.0
                out[small] = np.polynomial.polynomial.polyval(xi[small], c)
            big = ~small
            if big.any():
                out[big] = self._root(xi[big]) - w0
        else:
            out[...] = self._root(xi) - w0
        return out

    def invert(self, xi):
        xi = np.asarray(xi, dtype=float)
        w = self.delta_w(xi) + self.w_at_zero
        lo, hi = self.w_interval
        return np.clip(w, lo, hi)

    def G_from_delta(self, dw):
        """G(w(0) + dw), evaluated through the Taylor series when dw is small."""
        dw = np.asarray(dw, dtype=float)
        out = np.asarray(self.G(self.w_at_zero + dw), dtype=float).copy()
        if self.analytic_at_zero:
            rg = self._cache.get("rg")
            if rg is None:
                rg = _coeff_radius(self.g_series().coeffs)
                self._cache["rg"] = rg
            small = np.abs(dw) < 0.1 * rg
            if np.any(small):
                c = self.g_series().coeffs
                out = np.where(small, np.polynomial.polynomial.polyval(dw, c), out)
        return out


def _coeff_radius(c):
    J = len(c) - 1
    vals = []
    for j in range(max(2, J // 2), J + 1):
        if c[j] != 0.0:
            vals.append(abs(c[j]) ** (-1.0 / j))
    return min(vals) if vals else math.inf


def _calibrate_radius(br: Branch) -> float:
    """Largest |xi| at which the truncated inverse series agrees with root finding."""
    c = br.w_series().coeffs.copy()
    c[0] = 0.0
    rho = 0.25 * _coeff_radius(c)
    lo, hi = br.xi_interval
    rho = min(rho, 0.5 * abs(lo) if np.isfinite(lo) else rho, 0.5 * abs(hi) if np.isfinite(hi) else rho)
    if not np.isfinite(rho):
        rho = 1.0
    for _ in range(60):
        probe = np.array([-rho, rho])
        probe = probe[(probe > lo) & (probe < hi)]
        series = np.polynomial.polynomial.polyval(probe, c)
        root = br._root(probe) - br.w_at_zero
        tol = 1e-13 * np.abs(root) + 1e-14 * max(1.0, abs(br.w_at_zero))
        if np.all(np.abs(series - root) <= tol):
            return rho
        rho *= 0.7
    return 0.0


def _g_taylor(br: Branch, w0: float, order: int) -> Series:
    n = br.fi.op.n
    v = variable(w0, order)
    code = br.code
    p = br.fi.param
    if code == kernels.MA:
        return v**n - p
    if code == kernels.SMALL:
        return p * v**n - (v - 1.0) ** n
    if code == kernels.INVERSE:
        return v**n - n * v ** (n - 1)
    if code == kernels.INVERSE_ZERO:
        return v ** (n - 1)
    if code == kernels.LARGE_RIGHT:
        K = math.pi / 4 + p + (n - 1) * math.pi / 4
    elif code == kernels.LARGE_LEFT:
        K = math.pi / 4 + p - 3 * (n - 1) * math.pi / 4
    else:
        K = p
    at = series_elementary("arctan", w0, order)
    phi = K - (n - 1) * at
    phi0 = phi.coeffs[0]
    cos_s = series_compose(series_elementary("cos", phi0, order), phi)
    sin_s = series_compose(series_elementary("sin", phi0, order), phi)
    sq = v * v
    m = series_compose(series_elementary("pow_alpha", sq.coeffs[0], order, alpha=0.5 * (n - 1)), sq)
    return m * (v * cos_s - sin_s)


# ---------------------------------------------------------------------------------------
# branch catalogue


def _mk(fi, p, w_iv, w0, monotone, code, names=("Xi_1", "Xi_2"), analytic=True, admissible=False):
    br = Branch(p=p, w_interval=tuple(float(x) for x in w_iv), xi_interval=(0.0, 0.0),
                w_at_zero=None if w0 is None else float(w0), analytic_at_zero=analytic,
                monotone=monotone, fi=fi, code=code, xi_names=names, admissible=admissible)
    br.xi_interval = _xi_range(br)
    return br


def _xi_range(br: Branch):
    inc = br.increasing

    def end(w, upper):
        if w == br.w_at_zero:
            return 0.0
        if np.isfinite(w):
            return br.G(w)
        # G -> +inf at the top of an increasing branch, etc.
        return math.inf if (upper == inc) else -math.inf

    lo_w, hi_w = br.w_interval
    a = end(lo_w, upper=False)
    b = end(hi_w, upper=True)
    return (a, b) if inc else (b, a)


def _arctan_window(lo, hi, A_lo, A_hi):
    """Intersect the arctan-interval (lo, hi) with (A_lo, A_hi) and map back by tan."""
    L, H = max(lo, A_lo), min(hi, A_hi)
    if not L < H:
        return None

    def t(x):
        if x <= -math.pi / 2:
            return -math.inf
        if x >= math.pi / 2:
            return math.inf
        return math.tan(x)

    return t(L), t(H)


def branch_catalog(fi: FirstIntegral) -> list:
    op = fi.op
    n = op.n
    pi = math.pi
    out = []
    if op.case is Case.MA:
        w0 = op.Cprime ** (1.0 / n)
        out.append(_mk(fi, 1, (0.0, math.inf), w0, "increasing", kernels.MA, ("-C'", "+inf"),
                       admissible=True))
    elif op.case is Case.SMALL:
        Cg = fi.param
        w_star = 1.0 / (1.0 - Cg ** (1.0 / (n - 1)))
        w0 = 1.0 / (1.0 - Cg ** (1.0 / n))
        out.append(_mk(fi, 1, (w_star, math.inf), w0, "decreasing", kernels.SMALL, ("-inf", "Xi"),
                       admissible=True))
    elif op.case is Case.INVERSE:
        if fi.code == kernels.INVERSE_ZERO:
            out.append(_mk(fi, 1, (-math.inf, math.inf), 0.0, "increasing", kernels.INVERSE_ZERO,
                           ("-inf", "+inf"), analytic=False, admissible=True))
        else:
            pos = op.Cprime > 0
            out.append(_mk(fi, 1, (n - 1.0, math.inf), float(n), "increasing", kernels.INVERSE,
                           ("-(n-1)^(n-1)", "+inf"), admissible=pos))
            out.append(_mk(fi, 2, (0.0, n - 1.0), 0.0, "decreasing", kernels.INVERSE,
                           ("-(n-1)^(n-1)", "0"), analytic=False))
            mono = "increasing" if n % 2 == 1 else "decreasing"
            names = ("-inf", "0") if n % 2 == 1 else ("0", "+inf")
            out.append(_mk(fi, 3, (-math.inf, 0.0), 0.0, mono, kernels.INVERSE, names,
                           analytic=False, admissible=not pos))
    elif op.case is Case.LARGE:
        Cp = op.Cprime
        if abs(Cp - n * pi / 4) > 1e-12:
            w0 = math.tan(pi / 4 + Cp / n)
            if w0 > -1.0:
                iv = _arctan_window(-pi / 4, pi / 2, pi / 4 + (Cp - pi / 4) / (n - 1),
                                    pi / 4 + (Cp + pi / 2) / (n - 1))
                if iv is not None:
                    out.append(_mk(fi, 1, iv, w0, "increasing", kernels.LARGE_RIGHT,
                                   admissible=True))
            else:
                iv = _arctan_window(-pi / 2, -pi / 4, (Cp - pi / 2) / (n - 1) - 3 * pi / 4,
                                    (Cp - pi / 4) / (n - 1) - 3 * pi / 4)
                if iv is not None:
                    out.append(_mk(fi, 1, iv, w0, "decreasing", kernels.LARGE_LEFT,
                                   admissible=True))
        if abs(Cp + (n - 2) * pi / 2) <= P2_TOL:
            hi = math.tan(-(n - 2) * pi / (4 * (n - 1)))
            out.append(_mk(fi, 2, (-1.0, hi), -1.0, "decreasing", kernels.LARGE_RIGHT,
                           ("Xi_3", "0")))
        elif abs(Cp - (n - 2) * pi / 2) <= P2_TOL:
            lo = -math.inf if n <= 4 else math.tan(-(n + 2) * pi / (4 * (n - 1)))
            out.append(_mk(fi, 2, (lo, -1.0), -1.0, "increasing", kernels.LARGE_LEFT,
                           ("Xi_4", "0")))
    else:
        C0 = op.C0
        iv = _arctan_window(-pi / 2, pi / 2, (C0 - pi / 2) / (n - 1), (C0 + pi / 2) / (n - 1))
        out.append(_mk(fi, 1, iv, math.tan(C0 / n), "increasing", kernels.SPL, admissible=True))
    return out


def default_branch(fi: FirstIntegral) -> Branch:
    """The branch compatible with the admissibility condition of the case."""
    cat = branch_catalog(fi)
    for br in cat:
        if br.admissible:
            return br
    if not cat:
        raise NoSolutionError("no monotone branch of the first integral passes through xi = 0")
    return cat[0]


def invert_numeric(branch: Branch, xi):
    """Branch inverse w(xi) by series near 0, bracketed bisection plus Newton elsewhere."""
    scalar = np.ndim(xi) == 0
    xi = np.asarray(xi, dtype=float)
    branch.check_range(xi)
    w = branch.invert(xi)
    return float(w) if scalar else w


# ---------------------------------------------------------------------------------------
# expansion


@dataclass(frozen=True, eq=False)
class Expansion:
    n: int
    c: float
    c2: float
    c0: float
    tail_coeffs: np.ndarray
    J: int

    def tail(self, r):
        r = np.asarray(r, dtype=float)
        x = self.c * r ** (-self.n)
        s = np.zeros_like(x)
        for ck in self.tail_coeffs[::-1]:
            s = (s + ck) * x
        return r * r * s

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return self.c2 * r * r + self.c0 + self.tail(r)


def expansion_coefficients(branch: Branch, op: Operator, c: float, J: int, c0: float = 0.0) -> Expansion:
    if J < 1:
        raise ContractError("J must be >= 1")
    if not branch.analytic_at_zero:
        raise CriticalPointError(f"branch p={branch.p} has no power-series expansion at xi = 0")
    fi = branch.fi
    n = op.n
    ws = branch.w_series(max(J, SERIES_ORDER)).coeffs
    j = np.arange(1, J + 1)
    tail = -fi.kappa * ws[1 : J + 1] / (n * j - 2.0)
    if c == 0.0:
        tail = np.zeros(J)
    c2 = 0.5 * (fi.alpha + fi.kappa * branch.w_at_zero)
    return Expansion(n=n, c=float(c), c2=c2, c0=float(c0), tail_coeffs=tail, J=int(J))


# ---------------------------------------------------------------------------------------
# radial solution


@dataclass(eq=False)
class RadialSolution:
    op: Operator
    branch: Branch
    c: float
    c0: float
    r_min: float
    xi_const: float
    r_ref: Optional[float] = None
    _jac: tuple = field(default=None, repr=False)

    @property
    def fi(self):
        return self.branch.fi

    @property
    def c2(self) -> float:
        return 0.5 * (self.fi.alpha + self.fi.kappa * self.branch.w_at_zero)

    def xi(self, r):
        return self.xi_const * np.asarray(r, dtype=float) ** (-self.op.n)

    def _check_r(self, r):
        r = np.asarray(r, dtype=float)
        if r.size and r.min() < self.r_min * (1 - 1e-12):
            raise RangeError(f"r = {float(r.min())!r} below r_min = {self.r_min!r}", bound="r_min")
        return r

    def delta_W(self, r):
        return self.branch.delta_w(self.xi(self._check_r(r)))

    def W(self, r):
        return self.branch.w_at_zero + self.delta_W(r)

    def du(self, r):
        r = self._check_r(r)
        return r * (2.0 * self.c2 + self.fi.kappa * self.delta_W(r))

    def d2u(self, r):
        r = self._check_r(r)
        xi = self.xi(r)
        dw = self.branch.delta_w(xi)
        w = self.branch.w_at_zero + dw
        with np.errstate(divide="ignore", invalid="ignore"):
            corr = np.where(xi == 0.0, 0.0, n_over(self.op.n, xi, self.branch.dG(w)))
        return 2.0 * self.c2 + self.fi.kappa * (dw - corr)

    def tail(self, r):
        """u(r) - c2 r^2 - c0."""
        r = self._check_r(r)
        if self.c == 0.0:
            return np.zeros_like(r)
        if self.branch.analytic_at_zero:
            return self.fi.kappa * self._tail_inf(r)
        return self.fi.kappa * self._tail_ref(r)

    def u(self, r):
        r = np.asarray(r, dtype=float)
        return self.c2 * r * r + self.c0 + self.tail(r)

    __call__ = u

    def _tail_inf(self, r):
        # int_inf^r dw(c t^-n) t dt = -(1/n) int_0^R g(s) s^(-2/n) ds, R = r^-n,
        # g(s) = dw(c s)/s, with fixed Gauss-Jacobi nodes so the result is smooth in r
        n = self.op.n
        beta = -2.0 / n
        if self._jac is None:
            self._jac = roots_jacobi(QUAD_NODES, 0.0, beta)
        x, wt = self._jac
        R = r.reshape(-1, 1) ** (-n)
        s = 0.5 * R * (1.0 + x)
        g = self.branch.delta_w(self.xi_const * s) / s
        val = -(1.0 / n) * (0.5 * R[:, 0]) ** (1.0 + beta) * (g @ wt)
        return val.reshape(r.shape)

    def _tail_ref(self, r):
        # non-analytic branch: the tail is not integrable at infinity; integrate from r_ref
        if self.op.case is Case.INVERSE and self.fi.code == kernels.INVERSE_ZERO:
            n = self.op.n
            e = (n - 2.0) / (n - 1.0)
            return self.c / e * (r**e - self.r_ref**e)
        x, wt = roots_legendre(QUAD_NODES)
        t0 = math.log(self.r_ref)
        t1 = np.log(r).reshape(-1, 1)
        half = 0.5 * (t1 - t0)
        t = t0 + half * (1.0 + x)
        tau = np.exp(t)
        f = self.branch.delta_w(self.xi(tau)) * tau * tau
        return (half[:, 0] * (f @ wt)).reshape(r.shape)

    def eigenvalues(self, r):
        """(u'', u'/r, ..., u'/r) at a scalar radius."""
        r = float(r)
        lam = np.full(self.op.n, float(self.du(np.array([r]))[0] / r))
        lam[0] = float(self.d2u(np.array([r]))[0])
        return lam

    def value(self, x):
        """u at points x in R^n (last axis)."""
        x = np.asarray(x, dtype=float)
        return self.u(np.linalg.norm(x, axis=-1))

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        r = float(np.linalg.norm(x))
        lam = self.eigenvalues(r)
        e = x / r
        return lam[1] * np.eye(self.op.n) + (lam[0] - lam[1]) * np.outer(e, e)

    def first_integral_check(self, r):
        """|G(W(r)) r^n / c - 1| (absolute mismatch when c = 0)."""
        r = self._check_r(r)
        dw = self.delta_W(r)
        if self.fi.code == kernels.INVERSE_ZERO:
            g = self.branch.G(self.branch.w_at_zero + dw)
        else:
            g = self.branch.G_from_delta(dw)
        if self.xi_const == 0.0:
            return np.abs(g)
        return np.abs(g * r ** self.op.n / self.xi_const - 1.0)

    def expansion(self, J: int) -> Expansion:
        return expansion_coefficients(self.branch, self.op, self.c, J, self.c0)


def n_over(n, xi, dg):
    return n * xi / dg


def build_solution(branch: Branch, op: Operator, c: float, c0: float = 0.0,
                   r_min: float = R_MIN_DEFAULT) -> RadialSolution:
    if not r_min >= 1.0:
        raise RangeError(f"r_min = {r_min!r} must be >= 1", bound="r_min")
    c = float(c)
    xi_const = c
    if branch.fi.code == kernels.INVERSE_ZERO:
        xi_const = math.copysign(abs(c) ** (op.n - 1), c)
    edge = xi_const * r_min ** (-op.n)
    branch.check_range(np.array([edge]), what=f"c * r_min^-n (c = {c!r})")
    lo, hi = branch.xi_interval
    if not (lo < edge < hi) and edge != 0.0:
        raise RangeError(f"c * r_min^-n = {float(edge)!r} is on the boundary of the branch range",
                         bound=branch.xi_names[0] if edge <= lo else branch.xi_names[1])
    if c != 0.0 and xi_const != 0.0:
        # side of 0 the branch can reach
        if (xi_const > 0 and not hi > 0) or (xi_const < 0 and not lo < 0):
            bound = branch.xi_names[1] if xi_const > 0 else branch.xi_names[0]
            raise RangeError(f"c = {c!r} has the wrong sign for branch p={branch.p}", bound=bound)
    r_ref = None if branch.analytic_at_zero else float(r_min)
    return RadialSolution(op=op, branch=branch, c=c, c0=float(c0), r_min=float(r_min),
                          xi_const=xi_const, r_ref=r_ref)


def measure_branch_exponent(branch: Branch, lo: float = 1e-8, hi: float = 1e-4, num: int = 25) -> float:
    """Log-log slope of |w(xi) - w(0)| against |xi| on the side of 0 the branch covers."""
    if branch.analytic_at_zero:
        return 1.0
    a, b = branch.xi_interval
    sign = 1.0 if b > 0 else -1.0
    mag = np.geomspace(lo, hi, num)
    dw = np.abs(branch._root(sign * mag) - branch.w_at_zero)
    slope, _ = np.polyfit(np.log(mag), np.log(dw), 1)
    return float(slope)
