"""Spherical-harmonic tools for exterior Poisson problems.

Harmonics are orthonormal for the *normalised* sphere measure (total mass 1),
so the degree-0 harmonic is the constant 1 and a radial function projects to
its own value.  For ``n = 3`` the full real basis is available; for other
dimensions only the eigenvalue ladder and zonal (axially symmetric) modes.

Mode equation for ``v = sum a_{k,m}(r) Y_{k,m}`` with source ``g``:

    a'' + (n-1)/r a' - k(k+n-2)/r^2 a = b_{k,m}(r)

Homogeneous solutions are ``r^k`` and ``r^(2-n-k)`` with Wronskian
``(2-n-2k) r^(1-n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.special import eval_gegenbauer, roots_gegenbauer, roots_legendre, sph_harm_y

from .errors import ContractError, DomainError, NotDecayingError
from .ode_oracle import hessian_fd, loglog_slope, tail_quadrature
from .operator_family import DF_matrix, Operator

__all__ = [
    "HarmonicBasis",
    "ModeFunction",
    "HarmonicTail",
    "FastDecaySolution",
    "DecayReport",
    "project_modes",
    "solve_mode",
    "fast_decay_poisson",
    "harmonic_tail_decompose",
    "affine_decompose",
    "linearization_coefficients",
    "matrix_sqrt",
    "decay_report",
    "ladder",
    "multiplicity",
]


def ladder(k: int, n: int) -> int:
    return k * (k + n - 2)


def multiplicity(k: int, n: int) -> int:
    """Dimension of degree-k spherical harmonics on S^(n-1)."""
    if k == 0:
        return 1
    return math.comb(k + n - 1, n - 1) - math.comb(k + n - 3, n - 1)


class HarmonicBasis:
    """Real orthonormal spherical harmonics up to degree ``K_max`` with a product quadrature.

    ``n_theta`` Gauss-Legendre nodes in cos(theta) and ``2 n_theta``
    equispaced azimuths integrate products of degree up to ``2 n_theta - 1``
    exactly; the default oversamples so projections of smooth non-polynomial
    data alias only at round-off level.
    """

    def __init__(self, n: int = 3, K_max: int = 4, n_theta: int | None = None):
        if n < 3:
            raise DomainError("dimension must be >= 3")
        self.n = n
        self.K_max = int(K_max)
        if n == 3:
            self.labels = [(k, m) for k in range(self.K_max + 1) for m in range(-k, k + 1)]
        else:
            self.labels = [(k, 0) for k in range(self.K_max + 1)]
        nt = n_theta if n_theta is not None else max(self.K_max + 1, 24)
        if nt < self.K_max + 1:
            raise ContractError("n_theta must be at least K_max + 1")
        self.n_theta = nt
        if n == 3:
            t, wt = roots_legendre(nt)
            nphi = 2 * nt
            phi = 2 * np.pi * np.arange(nphi) / nphi
            T, P = np.meshgrid(t, phi, indexing="ij")
            s = np.sqrt(1.0 - T**2)
            self.directions = np.stack([s * np.cos(P), s * np.sin(P), T], axis=-1).reshape(-1, 3)
            self.weights = (np.outer(wt, np.full(nphi, 1.0 / nphi)) / 2.0).ravel()
        else:
            lam = 0.5 * (n - 2)
            t, wt = roots_gegenbauer(nt, lam)
            wt = wt / wt.sum()
            d = np.zeros((nt, n))
            d[:, 0] = np.sqrt(1.0 - t**2)
            d[:, -1] = t
            self.directions = d
            self.weights = wt
        self._Y = self.evaluate(self.directions)

    @property
    def size(self) -> int:
        return len(self.labels)

    def eigenvalue(self, k: int) -> int:
        return ladder(k, self.n)

    def multiplicity(self, k: int) -> int:
        return multiplicity(k, self.n)

    def index(self, k: int, m: int = 0) -> int:
        return self.labels.index((k, m))

    def evaluate(self, x) -> np.ndarray:
        """Basis values at points x (projected to the unit sphere), shape (N, size)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = np.linalg.norm(x, axis=1)
        u = x / r[:, None]
        out = np.empty((len(u), self.size))
        if self.n == 3:
            polar = np.arccos(np.clip(u[:, 2], -1.0, 1.0))
            az = np.arctan2(u[:, 1], u[:, 0])
            for i, (k, m) in enumerate(self.labels):
                Y = sph_harm_y(k, abs(m), polar, az) * math.sqrt(4 * math.pi)
                if m == 0:
                    out[:, i] = Y.real
                elif m > 0:
                    out[:, i] = math.sqrt(2.0) * Y.real
                else:
                    out[:, i] = math.sqrt(2.0) * Y.imag
        else:
            lam = 0.5 * (self.n - 2)
            t = u[:, -1]
            for i, (k, _) in enumerate(self.labels):
                # zonal harmonic normalised to unit mean square
                norm = math.sqrt(multiplicity(k, self.n)) / eval_gegenbauer(k, lam, 1.0)
                out[:, i] = norm * eval_gegenbauer(k, lam, t)
        return out

    def gram(self) -> np.ndarray:
        Y = self._Y
        return (Y * self.weights[:, None]).T @ Y


def _call(v, pts):
    try:
        vals = np.asarray(v(pts), dtype=float)
        if vals.shape == (len(pts),):
            return vals
    except (TypeError, ValueError):
        pass
    return np.array([float(v(p)) for p in pts])


def project_modes(v, r: float, basis: HarmonicBasis) -> np.ndarray:
    """Coefficients b_{k,m}(r) = mean over the sphere of v(r theta) Y_{k,m}(theta)."""
    vals = _call(v, r * basis.directions)
    return (basis.weights * vals) @ basis._Y


# ---------------------------------------------------------------------------------------
# mode solutions


@dataclass(frozen=True, eq=False)
class ModeFunction:
    k: int
    m: int
    n: int
    provenance: str
    _eval: object = field(repr=False)

    def a(self, r):
        return self._eval(np.asarray(r, dtype=float), 0)

    __call__ = a

    def da(self, r):
        return self._eval(np.asarray(r, dtype=float), 1)

    def d2a(self, r):
        return self._eval(np.asarray(r, dtype=float), 2)

    def residual(self, r, b):
        """a'' + (n-1)/r a' - Lambda_k a / r^2 - b(r)."""
        r = np.asarray(r, dtype=float)
        L = ladder(self.k, self.n)
        bv = np.array([b(float(x)) for x in np.ravel(r)]).reshape(r.shape)
        return self.d2a(r) + (self.n - 1) / r * self.da(r) - L / r**2 * self.a(r) - bv


def _integral_from_inf(f, r, decay):
    if decay >= -1.0:
        raise ContractError(f"kernel decays like t^{decay}, not integrable at infinity")
    return tail_quadrature(f, r, decay)


def _integral_from(f, r0, r):
    # absolute floor at round-off of the integrand scale, for increments passing through 0
    floor = 1e-14 * abs(r - r0) * max(abs(f(r0)), abs(f(r)), abs(f(0.5 * (r0 + r))))
    val, _ = quad(f, r0, r, epsabs=floor, epsrel=1e-12, limit=400)
    return val


class _Cumulative:
    """Memoised antiderivative: new points are reached from a nearby cached one.

    ``inward`` integrals start at infinity and are only continued towards
    smaller radii (continuing outward would cancel), the others only outward.
    """

    def __init__(self, f, anchor, inward: bool):
        self.f = f
        self.anchor = anchor
        self.inward = inward
        self.xs: list[float] = []
        self.vals: dict[float, float] = {}

    def __call__(self, x: float) -> float:
        if x in self.vals:
            return self.vals[x]
        ok = [y for y in self.xs if (y > x if self.inward else y < x) and abs(math.log(x / y)) <= 1.0]
        if ok:
            y = min(ok, key=lambda t: abs(math.log(t / x)))
            val = self.vals[y] + _integral_from(self.f, y, x)
        else:
            val = self.anchor(x)
        self.xs.append(x)
        self.vals[x] = val
        return val

    def warm(self, xs):
        for x in sorted(set(xs), reverse=self.inward):
            self(x)


def solve_mode(k: int, n: int, b, k1: float, r=None, m: int = 0, lower: float = 2.0) -> ModeFunction:
    """Fast-decay particular solution of the degree-k mode equation.

    For ``k < k1 - n`` both variation-of-parameters integrals start at
    infinity; otherwise the ``r^(2-n-k)`` kernel starts at ``lower`` (2 by
    default), which only adds a decaying homogeneous solution.
    """
    if not k1 > 2:
        raise ContractError(f"k1 = {k1!r} must exceed 2 for a decaying solution")
    k = int(k)
    wr = 2.0 - n - 2.0 * k
    low_k = k < k1 - n
    p2 = k + n - 1  # weight in the r^(2-n-k) kernel
    p1 = 1 - k  # weight in the r^k kernel

    f2 = lambda t: t**p2 * b(t)
    f1 = lambda t: t**p1 * b(t)
    if low_k:
        I2 = _Cumulative(f2, lambda x: _integral_from_inf(f2, x, p2 - k1), inward=True)
    else:
        I2 = _Cumulative(f2, lambda x: _integral_from(f2, lower, x), inward=False)
    I1 = _Cumulative(f1, lambda x: _integral_from_inf(f1, x, p1 - k1), inward=True)

    e2 = 2.0 - n - k

    def ev(r, order):
        flat = np.ravel(r)
        out = np.empty(flat.shape)
        I1.warm(flat.tolist())
        I2.warm(flat.tolist())
        for i, x in enumerate(flat):
            x = float(x)
            i1, i2 = I1(x), I2(x)
            if order == 0:
                val = x**e2 * i2 - x**k * i1
            elif order == 1:
                val = e2 * x ** (e2 - 1) * i2 - k * x ** (k - 1) * i1
            else:
                val = e2 * (e2 - 1) * x ** (e2 - 2) * i2 - k * (k - 1) * x ** (k - 2) * i1
            out[i] = val / wr
            if order == 2:
                out[i] += b(x)
        return out.reshape(np.shape(r))

    return ModeFunction(k=k, m=m, n=n, provenance="fast_decay_lowk" if low_k else "fast_decay_highk",
                        _eval=ev)


# ---------------------------------------------------------------------------------------
# fast-decay Poisson solutions


@dataclass(frozen=True)
class DecayReport:
    slope: float
    log_adjusted_slope: float
    expected: float
    log_case: bool
    accepted: bool
    used_log_bound: bool


def decay_report(v, k1: float, k2: float, n: int, r_lo: float = 1e2, r_hi: float = 1e4,
                 num: int = 40, directions=None, tol: float = 0.15) -> DecayReport:
    """Sup-norm decay slope of v against the bound r^(2-k1) (ln r)^k2.

    When ``k1 - n`` is a positive integer the bound carries one more power of
    ``ln r``; the ln-adjusted slope is then also accepted.
    """
    r = np.geomspace(r_lo, r_hi, num)
    dirs = np.eye(n) if directions is None else np.asarray(directions)
    sup = np.array([np.max(np.abs(_call(v, ri * dirs))) for ri in r])
    expected = 2.0 - k1
    slope = loglog_slope(r, sup / np.log(r) ** k2)
    d = k1 - n
    log_case = d >= 1 and abs(d - round(d)) < 1e-12
    adj = loglog_slope(r, sup / np.log(r) ** (k2 + 1))
    plain_ok = abs(slope - expected) <= tol
    log_ok = log_case and abs(adj - expected) <= tol
    return DecayReport(slope, adj, expected, log_case, plain_ok or log_ok, (not plain_ok) and log_ok)


class FastDecaySolution:
    """v = sum_k a_{k,m}(r) Y_{k,m}(theta), each mode from :func:`solve_mode`."""

    def __init__(self, g, k1, k2, basis: HarmonicBasis, r_sample=(2.0, 4.0, 8.0), tol=1e-14):
        self.g = g
        self.k1 = float(k1)
        self.k2 = float(k2)
        self.basis = basis
        n = basis.n

        @lru_cache(maxsize=None)
        def coeffs(t):
            return project_modes(g, t, basis)

        self._coeffs = coeffs
        scale = max(np.max(np.abs(coeffs(float(t)))) for t in r_sample) or 1.0
        self.modes = {}
        for i, (k, m) in enumerate(basis.labels):
            probe = max(abs(coeffs(float(t))[i]) for t in r_sample)
            if probe <= tol * scale:
                continue
            self.modes[(k, m)] = solve_mode(k, n, lambda t, i=i: coeffs(float(t))[i], self.k1, m=m)
        energy = [abs(coeffs(float(r_sample[0]))[i]) for i, (k, _) in enumerate(basis.labels)
                  if k == basis.K_max]
        self.truncation_energy = float(np.sqrt(np.sum(np.square(energy)))) if energy else 0.0

    def _parts(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = np.linalg.norm(x, axis=1)
        Y = self.basis.evaluate(x)
        return x, r, Y

    def __call__(self, x):
        x, r, Y = self._parts(x)
        out = np.zeros(len(x))
        for (k, m), mode in self.modes.items():
            out += mode.a(r) * Y[:, self.basis.index(k, m)]
        return out

    def laplacian(self, x):
        """Mode-wise Laplacian a'' + (n-1)a'/r - Lambda a / r^2 summed against Y."""
        x, r, Y = self._parts(x)
        n = self.basis.n
        out = np.zeros(len(x))
        for (k, m), mode in self.modes.items():
            L = ladder(k, n)
            lap = mode.d2a(r) + (n - 1) / r * mode.da(r) - L / r**2 * mode.a(r)
            out += lap * Y[:, self.basis.index(k, m)]
        return out

    def laplacian_residual(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.laplacian(x) - _call(self.g, x)

    def decay(self, **kw) -> DecayReport:
        return decay_report(self, self.k1, self.k2, self.basis.n, **kw)


def fast_decay_poisson(g, k1: float, k2: float, basis: HarmonicBasis) -> FastDecaySolution:
    if not k1 > 2:
        raise ContractError(f"k1 = {k1!r} must exceed 2")
    return FastDecaySolution(g, k1, k2, basis)


# ---------------------------------------------------------------------------------------
# harmonic tails


@dataclass
class HarmonicTail:
    n: int
    labels: list
    coefficients: dict
    constant: float
    growing: dict
    remainder_max: float
    remainder_slope: float
    radii: tuple
    Q: np.ndarray | None = None

    def __call__(self, y):
        """Tail sum at points y (in the decomposition's own coordinates)."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        r = np.linalg.norm(y, axis=1)
        basis = self._basis
        Y = basis.evaluate(y)
        out = np.full(len(y), self.constant)
        for (k, m), c in self.coefficients.items():
            out += c * r ** (2 - self.n - k) * Y[:, basis.index(k, m)]
        return out

    def degree_norms(self) -> dict:
        out = {}
        for (k, _), c in self.coefficients.items():
            out[k] = out.get(k, 0.0) + c * c
        return {k: math.sqrt(v) for k, v in out.items()}


def harmonic_tail_decompose(v, k3: int, k1: int, basis: HarmonicBasis, radii=(1e2, 2e2, 4e2),
                            allow_constant: bool = False, growth_tol: float = 1e-8,
                            remainder_radii=None) -> HarmonicTail:
    """Fit ``C1 r^k + C2 r^(2-n-k)`` per mode for ``k in [max(0,k3-n), k1-n-1]``.

    The decaying amplitudes ``C2`` are the tail coefficients.  A growing
    amplitude ``C1`` above ``growth_tol`` (for ``k = 0`` the constant mode,
    unless ``allow_constant``) raises :class:`NotDecayingError`.
    """
    n = basis.n
    k_lo = max(0, int(k3) - n)
    k_hi = int(k1) - n - 1
    if k_hi > basis.K_max:
        raise ContractError(f"basis degree {basis.K_max} below required {k_hi}")
    radii = tuple(float(R) for R in radii)
    proj = np.array([project_modes(v, R, basis) for R in radii])
    coeffs, growing = {}, {}
    constant = 0.0
    for i, (k, m) in enumerate(basis.labels):
        if k < k_lo or k > k_hi:
            continue
        R = np.array(radii)
        A = np.stack([R**k, R ** (2.0 - n - k)], axis=1)
        # the two columns differ by orders of magnitude; fit in scaled units
        scale = np.linalg.norm(A, axis=0)
        sol, *_ = np.linalg.lstsq(A / scale, proj[:, i], rcond=None)
        c1, c2 = sol / scale
        if k == 0 and allow_constant:
            constant = float(c1)
        elif abs(c1) > growth_tol:
            raise NotDecayingError(
                f"mode (k={k}, m={m}) has growing amplitude {c1:.3e} > {growth_tol:g}"
            )
        else:
            growing[(k, m)] = float(c1)
        coeffs[(k, m)] = float(c2)
    tail = HarmonicTail(n=n, labels=list(basis.labels), coefficients=coeffs, constant=constant,
                        growing=growing, remainder_max=0.0, remainder_slope=float("nan"),
                        radii=radii)
    tail._basis = basis
    rr = np.geomspace(radii[0], radii[-1] * 10, 12) if remainder_radii is None else np.asarray(remainder_radii)
    dirs = basis.directions[:: max(1, len(basis.directions) // 200)]
    rem, size = [], []
    for R in rr:
        vals = _call(v, R * dirs)
        rem.append(np.max(np.abs(vals - tail(R * dirs))))
        size.append(np.max(np.abs(vals)))
    rem, size = np.array(rem), np.array(size)
    tail.remainder_max = float(rem.max())
    # fit the slope only when every sample sits clearly above round-off in v
    if np.all(rem > 64 * np.finfo(float).eps * np.maximum(size, 1e-300)):
        tail.remainder_slope = loglog_slope(rr, rem)
    return tail


def matrix_sqrt(M) -> np.ndarray:
    """Symmetric positive square root via the symmetric eigensolver."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DomainError("matrix_sqrt needs a square matrix")
    if not np.allclose(M, M.T, rtol=0, atol=1e-12 * max(1.0, np.abs(M).max())):
        raise DomainError("matrix is not symmetric")
    lam, V = np.linalg.eigh(0.5 * (M + M.T))
    if lam.min() <= 0:
        raise DomainError(f"matrix is not positive definite (min eigenvalue {lam.min():.3e})")
    return (V * np.sqrt(lam)) @ V.T


def affine_decompose(v, a_inf, k3: int, k1: int, basis: HarmonicBasis, **kw) -> HarmonicTail:
    """Decompose ``V(y) = v(Q y)``, ``Q = a_inf^(1/2)``.

    Coefficients multiply ``(x^T a_inf^-1 x)^((2-n-k)/2) Y(a_inf^-1/2 x / |.|)``
    in the original coordinates.
    """
    Q = matrix_sqrt(a_inf)

    def V(y):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        return _call(v, y @ Q.T)

    tail = harmonic_tail_decompose(V, k3, k1, basis, **kw)
    tail.Q = Q
    return tail


def linearization_coefficients(op: Operator, u, A, x, h: float | None = None, hess=None,
                               nodes: int = 16) -> np.ndarray:
    """a_ij(x) = int_0^1 DF(A + t D^2 v(x)) dt with v = u - x^T A x / 2."""
    A = np.asarray(A, dtype=float)
    x = np.asarray(x, dtype=float)
    if hess is not None:
        H = np.asarray(hess(x), dtype=float)
    else:
        step = h if h is not None else 1e-4 * max(1.0, np.linalg.norm(x))
        H = hessian_fd(u, x, step)
    D = H - A
    t, w = roots_legendre(nodes)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    out = np.zeros_like(A)
    for ti, wi in zip(t, w):
        try:
            out += wi * DF_matrix(op, A + ti * D)
        except DomainError as exc:
            raise DomainError(f"inadmissible spectrum at t = {ti:.6f}: {exc}") from exc
    return 0.5 * (out + out.T)
