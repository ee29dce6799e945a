"""Independent oracles for the radial constructions.

* :func:`integrate_flow` integrates the un-reduced radial ODE for ``u'/r``
  straight from the operator definition, with no first integral involved.
* :func:`tail_quadrature` evaluates ``int_inf^r f`` by compactification.
* :func:`hessian_fd` / :func:`pde_residual` give finite-difference residuals.
* :class:`HighPrecisionBranch` recomputes the branch inverse, its Taylor
  coefficients and the radial tail in multiprecision for remainder tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.integrate import quad, solve_ivp

from .errors import ContractError, DomainError, SingularityError
from .operator_family import Case, Operator, eigen_term, eigen_term_inverse, evaluate_F
from .radial_solver import Branch, build_first_integral, default_branch

__all__ = [
    "OdeTrace",
    "integrate_flow",
    "tail_quadrature",
    "hessian_fd",
    "pde_residual",
    "HighPrecisionBranch",
    "loglog_slope",
]


@dataclass(frozen=True)
class OdeTrace:
    r_grid: np.ndarray
    W_values: np.ndarray
    tolerance: float
    method: str
    center: float = 0.0

    @property
    def deviation(self) -> np.ndarray:
        """W - center, integrated directly so it keeps relative accuracy as W -> center."""
        return self.W_values - self.center


def _flow_rhs(op: Operator, alpha: float, kappa: float):
    n = op.n

    def phi(w):
        lam = alpha + kappa * w
        y = op.C0 - (n - 1) * float(eigen_term(op, lam))
        l1 = eigen_term_inverse(op, y)
        return (l1 - lam) / kappa

    return phi


def integrate_flow(op: Operator, W0: float, r0: float, r1: float, tol: float = 1e-10,
                   r_out=None, branch: Branch | None = None) -> OdeTrace:
    """Integrate ``r W' = Phi(W)`` in ``t = ln r`` from ``r0`` to ``r1``.

    ``W`` is the first-integral variable of the case (``u'/r = alpha + kappa W``).
    The deviation ``d = W - w(0)`` is integrated with a relative error test so
    the trace stays accurate where ``W`` is close to its limit.
    """
    if not (r1 > r0 >= 1.0):
        raise ContractError(f"need r1 > r0 >= 1, got r0={r0!r}, r1={r1!r}")
    fi = build_first_integral(op)
    br = branch if branch is not None else default_branch(fi)
    center = br.w_at_zero
    phi = _flow_rhs(op, fi.alpha, fi.kappa)
    last = {"t": math.log(r0)}

    def rhs(t, y):
        last["t"] = t
        try:
            v = phi(center + y[0])
        except (DomainError, ZeroDivisionError, OverflowError) as exc:
            raise SingularityError(f"flow left the admissible set at r = {math.exp(t)!r}: {exc}",
                                   radius=math.exp(t)) from exc
        if not math.isfinite(v) or abs(v) > 1e12:
            raise SingularityError(f"flow right-hand side blew up at r = {math.exp(t)!r}",
                                   radius=math.exp(t))
        return [v]

    t_span = (math.log(r0), math.log(r1))
    r_out = np.geomspace(r0, r1, 64) if r_out is None else np.asarray(r_out, dtype=float)
    d0 = W0 - center
    if d0 == 0.0:
        # the equilibrium W = w(0): the c = 0 solution
        return OdeTrace(r_grid=r_out.copy(), W_values=np.full(r_out.shape, float(center)),
                        tolerance=tol, method="equilibrium", center=center)
    with np.errstate(over="ignore", invalid="ignore"):
        sol = solve_ivp(rhs, t_span, [d0], method="RK45", rtol=tol,
                        atol=max(abs(d0), 1e-300) * tol * 1e-6, t_eval=np.log(r_out),
                        dense_output=False)
    if sol.status != 0:
        raise SingularityError(f"integration stopped: {sol.message}", radius=math.exp(last["t"]))
    return OdeTrace(r_grid=np.exp(sol.t), W_values=center + sol.y[0], tolerance=tol,
                    method="RK45 (Dormand-Prince 5(4))", center=center)


def tail_quadrature(f, r: float, decay_hint: float) -> float:
    """Signed integral ``int_{+inf}^{r} f(t) dt`` for ``|f(t)| <= C t^decay_hint``.

    Uses ``t = r s^(-1/k)`` with ``k = -decay_hint - 1`` so that the
    transformed integrand on (0, 1] stays bounded.
    """
    if not decay_hint < -1.0:
        raise ContractError(f"decay_hint = {decay_hint!r} is not integrable at infinity")
    k = -decay_hint - 1.0

    def g(s):
        if s == 0.0:
            return 0.0
        t = r * s ** (-1.0 / k)
        return f(t) * t / (k * s)

    val, _ = quad(g, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=400)
    return -val


def hessian_fd(u, x, h: float) -> np.ndarray:
    """Second-order central-difference Hessian; symmetric by construction."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if not h > 0:
        raise ContractError("h must be positive")
    E = np.eye(n) * h
    pts = [x]
    for i in range(n):
        pts += [x + E[i], x - E[i]]
    for i in range(n):
        for j in range(i + 1, n):
            pts += [x + E[i] + E[j], x + E[i] - E[j], x - E[i] + E[j], x - E[i] - E[j]]
    P = np.array(pts)
    try:
        vals = np.asarray(u(P), dtype=float)
        if vals.shape != (len(P),):
            raise ValueError
    except (ValueError, TypeError):
        vals = np.array([float(u(p)) for p in P])
    H = np.empty((n, n))
    f0 = vals[0]
    for i in range(n):
        H[i, i] = (vals[1 + 2 * i] - 2 * f0 + vals[2 + 2 * i]) / (h * h)
    k = 1 + 2 * n
    for i in range(n):
        for j in range(i + 1, n):
            pp, pm, mp_, mm = vals[k : k + 4]
            H[i, j] = H[j, i] = (pp - pm - mp_ + mm) / (4 * h * h)
            k += 4
    return H


def pde_residual(op: Operator, u, x, h: float) -> float:
    H = hessian_fd(u, x, h)
    lam = np.linalg.eigvalsh(H)
    return evaluate_F(op, lam) - op.C0


def loglog_slope(r, y) -> float:
    """Least-squares slope of ln|y| against ln r."""
    r = np.asarray(r, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    slope, _ = np.polyfit(np.log(r), np.log(y), 1)
    return float(slope)


# ---------------------------------------------------------------------------------------
# multiprecision oracle


class HighPrecisionBranch:
    """Multiprecision copy of one analytic branch.

    ``G`` is rebuilt from the operator definition (the large-tau phase uses
    ``arctan((w-1)/(w+1))`` directly rather than the one-sided identities,
    except at the expansion point ``w = -1`` where only a one-sided form is
    analytic), the
    inverse is polished by Newton from the double-precision root, and the tail
    integral is computed with tanh-sinh quadrature.
    """

    def __init__(self, branch: Branch, dps: int = 80):
        self.branch = branch
        self.fi = branch.fi
        self.op = branch.fi.op
        self.dps = dps
        self.ctx = mpmath.MPContext()
        self.ctx.dps = dps
        mp = self.ctx
        op = self.op
        n = op.n
        self.n = n
        if op.case is Case.MA:
            C = mp.e ** (n * mp.mpf(op.C0))
            self._G = lambda w: w**n - C
        elif op.case is Case.SMALL:
            a = mp.cot(mp.mpf(op.tau))
            b = mp.sqrt(abs(a * a - 1))
            C = mp.e ** (2 * b * mp.mpf(op.C0) / mp.sqrt(a * a + 1))
            if self.fi.reflected:
                C = 1 / C
            self._G = lambda w: C * w**n - (w - 1) ** n
        elif op.case is Case.INVERSE:
            self._G = lambda w: w**n - n * w ** (n - 1)
        elif op.case is Case.LARGE:
            a = mp.cot(mp.mpf(op.tau))
            b = mp.sqrt(abs(a * a - 1))
            C = b * mp.mpf(op.C0) / mp.sqrt(a * a + 1)

            if abs(branch.w_at_zero + 1.0) > 1e-12:
                def G(w):
                    th = C - (n - 1) * mp.atan((w - 1) / (w + 1))
                    ph = mp.pi / 4 + th
                    return (w * w + 1) ** (mp.mpf(n - 1) / 2) * (w * mp.cos(ph) - mp.sin(ph))
            else:
                # expansion point w = -1: use the one-sided analytic phase of the branch
                shift = -mp.pi / 4 if branch.w_interval[0] >= -1.0 else 3 * mp.pi / 4

                def G(w):
                    ph = mp.pi / 4 + C - (n - 1) * (mp.atan(w) + shift)
                    return (w * w + 1) ** (mp.mpf(n - 1) / 2) * (w * mp.cos(ph) - mp.sin(ph))

            self._G = G
        else:
            C0 = mp.mpf(op.C0)

            def G(w):
                th = C0 - (n - 1) * mp.atan(w)
                return (w * w + 1) ** (mp.mpf(n - 1) / 2) * (w * mp.cos(th) - mp.sin(th))

            self._G = G
        with mp.workdps(dps + 160):
            self.w0 = self.solve(mp.zero, float(branch.w_at_zero))

    def G(self, w):
        return self._G(self.ctx.mpf(w))

    def solve(self, xi, seed):
        mp = self.ctx
        w = mp.mpf(seed)
        xi = mp.mpf(xi)
        tiny = mp.eps * 16
        for _ in range(60):
            step = (self._G(w) - xi) / mp.diff(self._G, w)
            w -= step
            if abs(step) <= abs(w) * tiny or step == 0:
                break
        return w

    def dw(self, xi):
        """w(xi) - w(0) with full relative accuracy, raising the working precision as xi -> 0."""
        mp = self.ctx
        xi = mp.mpf(xi)
        if xi == 0:
            return mp.zero
        extra = max(0, int(-mp.log10(abs(xi)))) + 10
        with mp.workdps(mp.dps + extra):
            seed = float(self.branch.delta_w(np.array([float(xi)]))[0])
            if seed == 0.0:
                seed = xi * self.branch.w_series().coeffs[1]
            d = mp.mpf(seed)
            tiny = mp.eps * 16
            w0 = self.w0
            for _ in range(60):
                step = (self._G(w0 + d) - xi) / mp.diff(self._G, w0 + d)
                d -= step
                if abs(step) <= abs(d) * tiny or step == 0:
                    break
        return +d

    def w(self, xi):
        return self.w0 + self.dw(xi)

    def taylor(self, J: int):
        """w_j = w^(j)(0)/j!, j = 0..J: Taylor coefficients of G at w(0), then series reversion."""
        mp = self.ctx
        with mp.workdps(self.dps + 10 * J):
            g = mp.taylor(self._G, self.w0, J)
            g[0] = mp.zero
            w = [mp.zero] * (J + 1)
            w[1] = 1 / g[1]
            for m in range(2, J + 1):
                # coefficient of xi^m in sum_k g_k W^k with w_m still zero
                rest = mp.zero
                power = [mp.zero] * (m + 1)
                power[0] = mp.one
                for k in range(1, m + 1):
                    nxt = [mp.zero] * (m + 1)
                    for i in range(m + 1):
                        if power[i]:
                            for j in range(1, m + 1 - i):
                                nxt[i + j] += power[i] * w[j]
                    power = nxt
                    if k >= 2:
                        rest += g[k] * power[m]
                w[m] = -rest / g[1]
        out = [+x for x in w]
        out[0] = +self.w0
        return out

    def tail(self, c: float, r_grid):
        """kappa * int_inf^r (w(c t^-n) - w(0)) t dt = -kappa int_0^(1/r) dw(c y^n) y^-3 dy."""
        mp = self.ctx
        n = self.n
        c = mp.mpf(c)
        kappa = mp.mpf(self.fi.kappa)
        ys = [1 / mp.mpf(float(r)) for r in r_grid]
        order = sorted(range(len(ys)), key=lambda i: ys[i])

        def integrand(y):
            if y == 0:
                return c * self._w1 if n == 3 else mp.zero
            return self.dw(c * y**n) / y**3

        out = [None] * len(ys)
        acc = mp.zero
        y_prev = mp.zero
        for i in order:
            acc += mp.quad(integrand, [y_prev, ys[i]], method="gauss-legendre")
            y_prev = ys[i]
            out[i] = -kappa * acc
        return out

    @property
    def _w1(self):
        return self.ctx.mpf(self.branch.w_series().coeffs[1])
