"""Per-parameter-point checks shared by the CLI and the test suite.

Each check returns a :class:`Check` with the measured value, its tolerance
and a verdict; :func:`run_suite` runs all that apply to a solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ExpansionError
from .ode_oracle import HighPrecisionBranch, integrate_flow, loglog_slope, pde_residual
from .operator_family import Case, Operator, make_operator
from .radial_solver import RadialSolution
from .transforms import verify_case_iv, verify_ma_reduction, verify_poisson_reduction

__all__ = [
    "Check",
    "SuiteResult",
    "check_conservation",
    "check_pde_residual",
    "check_series_coefficients",
    "remainder_slopes",
    "check_remainder_slopes",
    "check_reduction",
    "run_suite",
    "random_exterior_points",
    "AsymptoticReport",
    "asymptotic_decomposition",
]


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool
    details: dict = field(default_factory=dict)

    def as_dict(self):
        return {"value": self.value, "tolerance": self.tolerance, "pass": bool(self.passed),
                **self.details}


@dataclass
class SuiteResult:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed(self) -> list:
        return [c.name for c in self.checks if not c.passed]

    def as_dict(self):
        return {"pass": self.passed, "failed": self.failed,
                "checks": {c.name: c.as_dict() for c in self.checks}}


def random_exterior_points(n: int, count: int, r_lo: float = 2.0, r_hi: float = 20.0, seed: int = 0):
    """Directions uniform on the sphere, radii log-uniform in [r_lo, r_hi]."""
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(count, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = np.exp(rng.uniform(math.log(r_lo), math.log(r_hi), size=count))
    return d * r[:, None]


def check_conservation(sol: RadialSolution, r0: float = 2.0, r1: float = 100.0, tol: float = 1e-8,
                       ode_tol: float = 1e-12) -> Check:
    """Integrate the raw radial ODE from the solver's W(r0) and test G(W) r^n / c along it."""
    br = sol.branch
    W0 = float(sol.W(np.array([r0]))[0])
    trace = integrate_flow(sol.op, W0, r0, r1, tol=ode_tol, branch=br)
    r = trace.r_grid
    if sol.xi_const == 0.0:
        err = np.abs(trace.deviation)
    else:
        g = br.G_from_delta(trace.deviation) if br.analytic_at_zero else br.G(trace.W_values)
        err = np.abs(g * r ** sol.op.n / sol.xi_const - 1.0)
    val = float(err.max())
    return Check("conservation", val, tol, val <= tol, {"r_range": [r0, r1]})


def check_pde_residual(sol: RadialSolution, op: Operator | None = None, count: int = 100,
                       tol: float = 1e-6, seed: int = 0, r_hi: float = 20.0) -> Check:
    """Finite-difference residual |F(lambda(D^2u)) - C0| at random exterior points.

    ``op`` defaults to the solution's operator; passing a perturbed one is the
    negative control.
    """
    op = sol.op if op is None else op
    pts = random_exterior_points(sol.op.n, count, max(2.0, sol.r_min + 0.5), r_hi, seed)
    res = []
    for x in pts:
        h = 1e-3 * max(1.0, float(np.linalg.norm(x)))
        res.append(abs(pde_residual(op, sol.value, x, h)))
    val = float(max(res))
    return Check("pde_residual", val, tol, val <= tol, {"points": count})


def _hp(sol: RadialSolution, dps: int = 60) -> HighPrecisionBranch:
    key = ("_hp", dps)
    cache = sol.branch._cache
    if key not in cache:
        cache[key] = HighPrecisionBranch(sol.branch, dps=dps)
    return cache[key]


def check_series_coefficients(sol: RadialSolution, J: int = 6, tol: float = 1e-10) -> Check:
    """Double-precision Taylor coefficients of the branch inverse against multiprecision."""
    hp = _hp(sol)
    ref = [float(x) for x in hp.taylor(J)]
    got = sol.branch.w_series().coeffs[: J + 1]
    scale = max(1.0, max(abs(x) for x in ref))
    err = max(abs(a - b) for a, b in zip(got, ref)) / scale
    return Check("series_coefficients", err, tol, err <= tol, {"J": J})


def remainder_slopes(sol: RadialSolution, Js=(1, 2, 3), r_lo: float = 1e2, r_hi: float = 1e4,
                     num: int = 12, perturb: dict | None = None):
    """Measured slopes of |tail - truncated expansion| with the expected ``2 - n j*``.

    ``j*`` is the first index above ``J`` whose coefficient is nonzero.  The
    coefficients come from ``c_{-j} = -kappa w_j / (n j - 2)`` with ``w_j``
    evaluated in multiprecision, so the remainder is resolved far below double
    round-off; ``perturb = {"j": j, "relative": eps}`` scales one coefficient.
    """
    hp = _hp(sol)
    mp = hp.ctx
    n = sol.op.n
    Jmax = max(Js) + 4
    wj = hp.taylor(Jmax)
    kappa = mp.mpf(sol.fi.kappa)
    c = mp.mpf(sol.c)
    coef = [None] + [-kappa * wj[j] / (n * j - 2) for j in range(1, Jmax + 1)]
    if perturb:
        j = int(perturb.get("j", 1))
        coef[j] = coef[j] * (1 + mp.mpf(perturb.get("relative", 1e-3)))
    r = np.geomspace(r_lo, r_hi, num)
    tail = hp.tail(sol.c, r)
    scale = max(abs(x) for x in coef[1:]) or mp.one
    out = []
    for J in Js:
        rem = []
        for ri, ti in zip(r, tail):
            R = mp.mpf(ri)
            s = mp.zero
            for j in range(1, J + 1):
                s += coef[j] * c**j * R ** (2 - n * j)
            rem.append(float(ti - s))
        jstar = next((j for j in range(J + 1, Jmax + 1) if abs(coef[j]) > scale * mp.mpf(10) ** (-40)), None)
        expected = 2.0 - n * jstar if jstar is not None else float("-inf")
        if all(x == 0.0 for x in rem):
            slope = float("-inf")
        else:
            slope = loglog_slope(r, rem)
        out.append({"J": J, "slope": slope, "expected": expected, "nominal": 2.0 - n * (J + 1)})
    return out


def check_remainder_slopes(sol: RadialSolution, Js=(1, 2, 3), tol: float = 0.1, **kw) -> Check:
    rows = remainder_slopes(sol, Js, **kw)
    worst = max(abs(r["slope"] - r["expected"]) for r in rows)
    return Check("remainder_slopes", float(worst), tol, worst <= tol, {"rows": rows})


def check_reduction(sol: RadialSolution, tol: float = 1e-6) -> Check | None:
    op = sol.op
    if op.case is Case.SMALL and op.C0 < 0:
        rep = verify_ma_reduction(op, sol, tol=tol)
    elif op.case is Case.INVERSE and op.C0 < 0:
        rep = verify_poisson_reduction(op, sol, tol=tol)
    elif op.case is Case.LARGE:
        rep = verify_case_iv(op, sol, tol=tol)
    else:
        return None
    return Check("reduction", rep.residual_max, tol, rep.passed,
                 {"reduction": rep.name, "flags": rep.flags})


def run_suite(sol: RadialSolution, tolerance_scale: float = 1.0, perturb: dict | None = None,
              slopes: bool = True) -> SuiteResult:
    """All applicable checks for one solution.

    ``perturb`` injects a negative control: ``{"target": "C0", "relative": eps}``
    checks the residual against a shifted constant, ``{"target": "coefficient",
    "j": j, "relative": eps}`` perturbs one expansion coefficient.
    """
    s = float(tolerance_scale)
    perturb = perturb or {}
    checks = []
    op_check = None
    if perturb.get("target") == "C0":
        op = sol.op
        eps = float(perturb.get("relative", 1e-3))
        op_check = make_operator(op.tau, op.n, op.C0 + eps * max(abs(op.C0), 1.0))
    checks.append(check_pde_residual(sol, op_check, tol=1e-6 * s))
    try:
        checks.append(check_conservation(sol, tol=1e-8 * s))
    except ExpansionError as exc:
        checks.append(Check("conservation", float("inf"), 1e-8 * s, False, {"error": str(exc)}))
    if slopes and sol.branch.analytic_at_zero and sol.c != 0.0:
        checks.append(check_series_coefficients(sol, tol=1e-10 * s))
        coef_perturb = perturb if perturb.get("target") == "coefficient" else None
        checks.append(check_remainder_slopes(sol, tol=0.1 * s, perturb=coef_perturb))
    red = check_reduction(sol, tol=1e-6 * s)
    if red is not None:
        checks.append(red)
    return SuiteResult(checks)


@dataclass
class AsymptoticReport:
    c0: float
    coefficients: dict
    expected_amplitude: float
    amplitude_error: float
    remainder_slope: float
    slope_bound: float
    a_inf: np.ndarray
    passed: bool

    def as_dict(self):
        return {
            "pass": bool(self.passed),
            "c0": self.c0,
            "coefficients": [{"k": k, "m": m, "value": v} for (k, m), v in sorted(self.coefficients.items())],
            "expected_amplitude": self.expected_amplitude,
            "amplitude_error": self.amplitude_error,
            "remainder_slope": self.remainder_slope,
            "slope_bound": self.slope_bound,
            "a_inf": self.a_inf.tolist(),
        }


def asymptotic_decomposition(sol: RadialSolution, K_max: int = 2, radii=(1e3, 2e3, 4e3),
                             remainder_radii=None, amp_tol: float = 1e-5,
                             slope_slack: float = 0.2) -> AsymptoticReport:
    """Recover the harmonic tail of ``v = u - x^T A x / 2`` in the stretched frame of ``DF(A)``.

    For a radial solution ``A = 2 c2 I`` and ``v = c0 + tail(|x|)`` exactly, so
    ``v`` is evaluated from the split representation without cancellation.
    The leading amplitude is compared with ``c_{-1} c s^((2-n)/2)`` where
    ``DF(A) = s I``.
    """
    from .exterior_laplace import HarmonicBasis, affine_decompose
    from .operator_family import DF_matrix

    op = sol.op
    n = op.n
    A = 2.0 * sol.c2 * np.eye(n)
    a_inf = DF_matrix(op, A)

    def v(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return sol.c0 + sol.tail(np.linalg.norm(x, axis=1))

    basis = HarmonicBasis(n, K_max)
    s = float(np.mean(np.diag(a_inf)))
    if remainder_radii is None:
        remainder_radii = np.geomspace(3.0 * s ** -0.5 * max(1.0, sol.r_min), 30.0 * s ** -0.5, 12)
    tail = affine_decompose(v, a_inf, n, 2 * n, basis, radii=[R * s ** -0.5 for R in radii],
                            allow_constant=True, remainder_radii=remainder_radii)
    if sol.c == 0.0 or not sol.branch.analytic_at_zero:
        expected = 0.0 if sol.c == 0.0 else float("nan")
    else:
        c1 = float(sol.expansion(1).tail_coeffs[0])
        expected = c1 * sol.c * s ** ((2.0 - n) / 2.0)
    got = tail.coefficients.get((0, 0), 0.0)
    err = abs(got - expected) / max(abs(expected), 1e-300) if expected else abs(got)
    others = max([abs(val) for key, val in tail.coefficients.items() if key != (0, 0)], default=0.0)
    bound = 2.0 - 2.0 * n + slope_slack
    slope = tail.remainder_slope
    slope_ok = (not math.isfinite(slope) and tail.remainder_max <= 1e-12) or slope <= bound
    passed = err <= amp_tol and others <= amp_tol * max(1.0, abs(expected)) and slope_ok
    return AsymptoticReport(tail.constant, dict(tail.coefficients), expected, err, slope, bound,
                            a_inf, passed)
