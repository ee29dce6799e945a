"""Legendre and affine reductions between members of the operator family.

* Small tau: with ``U = u + (a+b)|x|^2/2`` and its Legendre transform ``v``,
  ``u~ = |x~|^2/2 - 2b v`` solves a Monge-Ampere type equation
  ``sum ln l~_i = 2b C0 / sqrt(a^2+1)`` with ``l~ = (l+a-b)/(l+a+b)``.
* tau = pi/4: the Legendre transform of ``u + |x|^2/2`` solves
  ``-Laplace u~ = C0 / sqrt(2)``.
* Large tau: ``v = u/b + a|x|^2/(2b)`` solves the special Lagrangian equation
  with constant ``b C0 / sqrt(a^2+1) + n pi/4``.

Everything here works on radial profiles, where the Legendre transform is
a one-dimensional monotone change of variable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import ContractError, ConvexityError, RangeError
from .ode_oracle import pde_residual
from .operator_family import Case, Operator, make_operator
from .radial_solver import RadialSolution

__all__ = [
    "RadialProfile",
    "ReductionReport",
    "Substitution",
    "profile_from_solution",
    "legendre_radial",
    "eigenvalue_map_small",
    "verify_ma_reduction",
    "verify_poisson_reduction",
    "reduce_case_iv",
    "verify_case_iv",
]


@dataclass
class RadialProfile:
    """Samples of a radial function ``U(r)`` and its first two derivatives.

    ``dU_fn`` (optional) is an exact derivative used to polish inverse
    interpolation of ``s = U'(r)``.
    """

    r_grid: np.ndarray
    U: np.ndarray
    dU: np.ndarray
    d2U: np.ndarray
    convex: Optional[np.ndarray] = None
    U_fn: Optional[Callable] = field(default=None, repr=False)
    dU_fn: Optional[Callable] = field(default=None, repr=False)
    d2U_fn: Optional[Callable] = field(default=None, repr=False)
    domain: Optional[tuple] = None

    def __post_init__(self):
        self.r_grid = np.asarray(self.r_grid, dtype=float)
        self.U = np.asarray(self.U, dtype=float)
        self.dU = np.asarray(self.dU, dtype=float)
        self.d2U = np.asarray(self.d2U, dtype=float)
        if np.any(np.diff(self.r_grid) <= 0):
            raise ContractError("r_grid must be strictly increasing")
        if not (len(self.U) == len(self.dU) == len(self.d2U) == len(self.r_grid)):
            raise ContractError("profile arrays differ in length")

    def consistency(self) -> float:
        """Relative mismatch between U and the cumulative integral of U'."""
        integ = cumulative_simpson(self.dU, x=self.r_grid, initial=0.0)
        diff = (self.U - self.U[0]) - integ
        return float(np.max(np.abs(diff)) / max(1.0, np.max(np.abs(self.U))))

    def laplacian(self, n: int) -> np.ndarray:
        return self.d2U + (n - 1) * self.dU / self.r_grid

    def radius_for_slope(self, s, tol: float = 1e-10):
        """Solve ``U'(r) = s`` by monotone interpolation, then bracketed polishing."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        order = np.argsort(self.dU)
        guess = PchipInterpolator(self.dU[order], self.r_grid[order], extrapolate=False)(s)
        if self.dU_fn is None:
            return guess
        out = np.empty_like(s)
        lo, hi = self.domain if self.domain is not None else (self.r_grid[0], self.r_grid[-1])
        for i, (si, gi) in enumerate(zip(s, guess)):
            f = lambda r: float(np.ravel(self.dU_fn(r))[0]) - si
            r = gi
            if np.isfinite(r):
                for _ in range(50):
                    step = f(r) / float(np.ravel(self.d2U_fn(r))[0]) if self.d2U_fn else 0.0
                    rn = r - step
                    if not lo <= rn <= hi or step == 0.0:
                        break
                    r = rn
                    if abs(step) <= tol * abs(r):
                        break
            if not (np.isfinite(r) and abs(f(r)) <= tol * max(1.0, abs(si))):
                r = brentq(f, lo, hi, xtol=tol * hi, rtol=4 * np.finfo(float).eps)
            out[i] = r
        return out


def profile_from_solution(sol: RadialSolution, r_grid, shift: float = 0.0,
                          scale: float = 1.0) -> RadialProfile:
    """Profile of ``scale * u + shift r^2 / 2``, keeping exact callables for inversion."""
    r = np.asarray(r_grid, dtype=float)
    U_fn = lambda t: scale * sol.u(np.asarray(t, dtype=float)) + 0.5 * shift * np.asarray(t) ** 2
    dU_fn = lambda t: scale * sol.du(np.atleast_1d(np.asarray(t, dtype=float))) + shift * np.asarray(t)
    d2U_fn = lambda t: scale * sol.d2u(np.atleast_1d(np.asarray(t, dtype=float))) + shift
    return RadialProfile(r, U_fn(r), dU_fn(r), d2U_fn(r), U_fn=U_fn, dU_fn=dU_fn, d2U_fn=d2U_fn,
                         domain=(sol.r_min, 4.0 * r[-1]))


def legendre_radial(p: RadialProfile, shift: float = 0.0, strict: bool = True) -> RadialProfile:
    """Legendre transform of ``U + shift r^2/2`` on a radial profile.

    The result lives on ``s = U'(r)`` with ``v(s) = r s - U``, ``v'(s) = r`` and
    ``v''(s) = 1/U''``.  With ``strict=False`` a gradient map that is monotone
    but not convex (``U''`` of one sign, ``U'/r`` of one sign) is accepted.
    """
    r = p.r_grid
    U = p.U + 0.5 * shift * r**2
    dU = p.dU + shift * r
    d2U = p.d2U + shift
    convex = (d2U > 0) & (dU / r > 0)
    if strict:
        if not convex.all():
            i = int(np.argmin(convex))
            raise ConvexityError(
                f"shifted profile not strictly convex at r = {float(r[i])!r} (U'' = {d2U[i]:.3e}, U'/r = {dU[i] / r[i]:.3e})",
                radius=float(r[i]),
            )
    else:
        for arr, name in ((d2U, "U''"), (dU, "U'")):
            if not (np.all(arr > 0) or np.all(arr < 0)):
                i = int(np.argmin(np.abs(arr)))
                raise ConvexityError(f"{name} changes sign near r = {r[i]!r}", radius=float(r[i]))
    s = dU
    order = np.argsort(s)
    v = r * s - U
    out = RadialProfile(s[order], v[order], r[order], (1.0 / d2U)[order], convex=convex[order])
    if p.dU_fn is not None:
        src = RadialProfile(r, U, dU, d2U,
                            U_fn=lambda t: p.U_fn(t) + 0.5 * shift * np.asarray(t) ** 2,
                            dU_fn=lambda t: p.dU_fn(t) + shift * np.asarray(t),
                            d2U_fn=lambda t: p.d2U_fn(t) + shift, domain=p.domain)

        def inv(t):
            t = np.atleast_1d(np.asarray(t, dtype=float))
            return src.radius_for_slope(t)

        out.dU_fn = inv
        out.U_fn = lambda t: inv(t) * np.asarray(t) - src.U_fn(inv(t))
        out.d2U_fn = lambda t: 1.0 / src.d2U_fn(inv(t))
    return out


def eigenvalue_map_small(lam, a: float, b: float):
    """l~ = (l+a-b)/(l+a+b) = 1 - 2b/(l+a+b), in (0, 1) for l > -a+b."""
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(lam_arr <= -a + b):
        raise RangeError(f"eigenvalue {float(lam_arr.min())!r} <= -a+b = {-a + b!r}", bound="-a+b")
    out = 1.0 - 2.0 * b / (lam_arr + a + b)
    if not np.all((out > 0) & (out < 1)):
        raise RangeError("mapped eigenvalue outside (0, 1)", bound="(0,1)")
    return float(out) if np.ndim(lam) == 0 else out


@dataclass
class ReductionReport:
    name: str
    passed: bool
    residual_max: float
    tolerance: float
    details: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "residual_max": self.residual_max,
                "tolerance": self.tolerance, "details": self.details, "flags": list(self.flags)}


def _fd_second(f, s, h):
    # five-point second derivative
    return (-f(s + 2 * h) + 16 * f(s + h) - 30 * f(s) + 16 * f(s - h) - f(s - 2 * h)) / (12 * h * h)


def _fd_first(f, s, h):
    return (-f(s + 2 * h) + 8 * f(s + h) - 8 * f(s - h) + f(s - 2 * h)) / (12 * h)


def verify_ma_reduction(op: Operator, sol: RadialSolution, r_grid=None, tol: float = 1e-6) -> ReductionReport:
    """Check the Small-tau reduction on a radial solution."""
    if op.case is not Case.SMALL:
        raise ContractError(f"Small-tau operator required, got {op.case.value}")
    a, b = op.a, op.b
    r = np.geomspace(2.0, 100.0, 25) if r_grid is None else np.asarray(r_grid, dtype=float)
    lam = np.array([sol.eigenvalues(ri) for ri in r])
    flags = []
    if np.any(lam <= -a + b):
        raise ContractError("solution violates D^2u > (-a+b)I")
    lt = eigenvalue_map_small(lam, a, b)
    target = 2.0 * b * op.C0 / op.scale
    resid = np.abs(np.log(lt).sum(axis=1) - target)

    # transformed profile, second route: derivatives of v(s) by finite differences
    prof = profile_from_solution(sol, r, shift=a + b)
    tr = legendre_radial(prof, 0.0)
    s = tr.r_grid
    h = 1e-3 * s
    vpp = _fd_second(tr.U_fn, s, h)
    vp = tr.dU_fn(s)
    lt_num = np.stack([1.0 - 2 * b * vpp, 1.0 - 2 * b * vp / s], axis=1)
    lt_alg = np.stack([lt[:, 0], lt[:, 1]], axis=1)[np.argsort(prof.dU)]
    map_gap = float(np.max(np.abs(lt_num - lt_alg)))

    Cp = math.exp(target)
    bound = 2.0 * b / (1.0 - Cp) - a - b if Cp < 1 else float("inf")
    margin = float(lam.min() - bound)
    in_range = bool(np.all((lt >= Cp * (1 - 1e-12)) & (lt <= 1.0)))
    if margin <= 0:
        flags.append("eigenvalue lower bound violated")
    if not in_range:
        flags.append("mapped eigenvalues outside [C', 1]")
    rmax = float(resid.max())
    passed = rmax <= tol and map_gap <= tol and margin > 0 and in_range
    return ReductionReport("ma_reduction", passed, rmax, tol,
                           {"map_gap": map_gap, "lower_bound": bound, "margin": margin,
                            "Cprime": Cp, "target": target}, flags)


def verify_poisson_reduction(op: Operator, sol: RadialSolution, r_grid=None, tol: float = 1e-6) -> ReductionReport:
    """Check that the Legendre transform of ``u + |x|^2/2`` has Laplacian ``-C0/sqrt(2)``.

    ``C0 >= 0`` is flagged; the gradient map is then monotone but not convex and
    the transform is taken in the generalised sense.
    """
    if op.case is not Case.INVERSE:
        raise ContractError(f"tau = pi/4 operator required, got {op.case.value}")
    n = op.n
    r = np.geomspace(2.0, 100.0, 25) if r_grid is None else np.asarray(r_grid, dtype=float)
    flags = []
    if op.C0 >= 0:
        flags.append("C0 >= 0: condition D^2u > -I cannot hold")
    prof = profile_from_solution(sol, r, shift=1.0)
    tr = legendre_radial(prof, 0.0, strict=op.C0 < 0)
    lap = tr.laplacian(n)
    target = -op.C0 / math.sqrt(2.0)
    resid = np.abs(lap - target)
    s = tr.r_grid
    h = 1e-3 * np.abs(s)
    lap_num = _fd_second(tr.U_fn, s, h) + (n - 1) * _fd_first(tr.U_fn, s, h) / s
    terms = np.maximum(np.abs(tr.d2U), np.abs((n - 1) * tr.dU / s))
    num_gap = float(np.max(np.abs(lap_num - target) / np.maximum(1.0, terms)))
    hess_max = float(np.max(np.maximum(tr.d2U, tr.dU / s)))
    if op.C0 < 0 and hess_max > target * (1 + 1e-12):
        flags.append("Hessian bound D^2u~ <= -C0/sqrt(2) violated")
    rmax = float(resid.max())
    passed = rmax <= tol and num_gap <= 1e-6 and not (op.C0 < 0 and hess_max > target * (1 + 1e-12))
    return ReductionReport("poisson_reduction", passed, rmax, tol,
                           {"target": target, "fd_gap": num_gap, "hessian_max": hess_max}, flags)


@dataclass(frozen=True)
class Substitution:
    a: float
    b: float
    C0_spl: float
    supercritical: bool
    description: str

    def v(self, u_val, x):
        x = np.asarray(x, dtype=float)
        return u_val / self.b + self.a / (2 * self.b) * np.sum(x * x, axis=-1)

    def u(self, v_val, x):
        x = np.asarray(x, dtype=float)
        return self.b * v_val - 0.5 * self.a * np.sum(x * x, axis=-1)

    def eigen(self, lam):
        return (np.asarray(lam, dtype=float) + self.a) / self.b


def reduce_case_iv(op: Operator):
    """SPL operator and substitution ``v = u/b + (a/2b)|x|^2`` for a Large-tau operator."""
    if op.case is not Case.LARGE:
        raise ContractError(f"Large-tau operator required, got {op.case.value}")
    n = op.n
    C = op.b * op.C0 / op.scale + n * math.pi / 4
    spl = make_operator(math.pi / 2, n, C)
    sub = Substitution(a=op.a, b=op.b, C0_spl=C, supercritical=abs(C) > (n - 2) * math.pi / 2,
                       description=f"v = u/{op.b:.17g} + ({op.a:.17g}/(2*{op.b:.17g}))|x|^2")
    return spl, sub


def verify_case_iv(op: Operator, sol: RadialSolution, points=None, h: float = 1e-3,
                   tol: float = 1e-6) -> ReductionReport:
    """Substitute a radial Large-tau solution and check the SPL equation pointwise."""
    spl, sub = reduce_case_iv(op)
    n = op.n
    if points is None:
        rng = np.random.default_rng(0)
        d = rng.normal(size=(8, n))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        points = d * np.geomspace(2.0, 20.0, 8)[:, None]
    points = np.asarray(points, dtype=float)
    v = lambda x: sub.v(sol.value(x), x)
    res = np.array([abs(pde_residual(spl, v, x, h * max(1.0, np.linalg.norm(x)))) for x in points])
    gaps = []
    for x in points:
        lam_u = sol.eigenvalues(np.linalg.norm(x))
        lam_v = np.linalg.eigvalsh(sol.hessian(x) / sub.b + (sub.a / sub.b) * np.eye(n))
        gaps.append(np.max(np.abs(np.sort(sub.eigen(lam_u)) - lam_v)))
    eig_gap = float(max(gaps))
    rmax = float(res.max())
    return ReductionReport("case_iv_reduction", rmax <= tol and eig_gap <= 1e-10, rmax, tol,
                           {"C0_spl": sub.C0_spl, "supercritical": sub.supercritical,
                            "eigen_gap": eig_gap}, [])
