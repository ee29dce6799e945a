"""The five-case operator family F_tau acting on Hessian eigenvalues.

Cases by ``tau``:

=========  ==================  ===========================================
case       tau                 F_tau(lambda)
=========  ==================  ===========================================
MA         0                   (1/n) sum ln(lambda_i)
SMALL      (0, pi/4)           sqrt(a^2+1)/(2b) sum ln((l+a-b)/(l+a+b))
INVERSE    pi/4                -sqrt(2) sum 1/(1+lambda_i)
LARGE      (pi/4, pi/2)        sqrt(a^2+1)/b sum arctan((l+a-b)/(l+a+b))
SPL        pi/2                sum arctan(lambda_i)
=========  ==================  ===========================================

with ``a = cot(tau)`` and ``b = sqrt(|cot(tau)^2 - 1|)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ContractError, DomainError, RangeError

TAU_TOL = 1e-12


class Case(str, enum.Enum):
    MA = "MA"
    SMALL = "Small"
    INVERSE = "Inverse"
    LARGE = "Large"
    SPL = "SPL"


@dataclass(frozen=True)
class Operator:
    tau: float
    n: int
    C0: float
    case: Case
    a: Optional[float]
    b: Optional[float]
    Cprime: float

    @property
    def scale(self) -> float:
        """sqrt(a^2+1) for the two interior cases."""
        return math.sqrt(self.a * self.a + 1.0)


def classify(tau: float) -> Case:
    if tau < -TAU_TOL or tau > math.pi / 2 + TAU_TOL:
        raise DomainError(f"tau={tau!r} outside [0, pi/2]")
    if abs(tau) <= TAU_TOL:
        return Case.MA
    if abs(tau - math.pi / 4) <= TAU_TOL:
        return Case.INVERSE
    if abs(tau - math.pi / 2) <= TAU_TOL:
        return Case.SPL
    return Case.SMALL if tau < math.pi / 4 else Case.LARGE


def make_operator(tau: float, n: int, C0: float) -> Operator:
    """Build an :class:`Operator`, deriving ``a``, ``b`` and the reduced constant C'."""
    if int(n) != n or n < 3:
        raise DomainError(f"dimension n={n!r} must be an integer >= 3")
    n = int(n)
    if not math.isfinite(C0):
        raise DomainError("C0 must be finite")
    case = classify(tau)
    a = b = None
    if case is Case.MA:
        tau = 0.0
        Cp = math.exp(n * C0)
    elif case is Case.INVERSE:
        tau = math.pi / 4
        Cp = -C0 / math.sqrt(2.0)
    elif case is Case.SPL:
        tau = math.pi / 2
        if not abs(C0) < n * math.pi / 2:
            raise RangeError(
                f"C0={C0!r} outside (-n*pi/2, n*pi/2) = ({-n * math.pi / 2}, {n * math.pi / 2})",
                bound="n*pi/2",
            )
        Cp = C0
    else:
        a = 1.0 / math.tan(tau)
        b = math.sqrt(abs(a * a - 1.0))
        s = math.sqrt(a * a + 1.0)
        if case is Case.SMALL:
            Cp = math.exp(2.0 * b * C0 / s)
        else:
            Cp = b * C0 / s
            if not abs(Cp) < n * math.pi / 2:
                raise RangeError(
                    f"b*C0/sqrt(a^2+1)={Cp!r} outside (-n*pi/2, n*pi/2)", bound="n*pi/2"
                )
    return Operator(tau=float(tau), n=n, C0=float(C0), case=case, a=a, b=b, Cprime=Cp)


def _as_lambda(op: Operator, lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (op.n,):
        raise ContractError(f"expected {op.n} eigenvalues, got shape {lam.shape}")
    return lam


def _check_domain(op: Operator, lam: np.ndarray) -> None:
    case = op.case
    for i, x in enumerate(lam):
        if not math.isfinite(x):
            raise DomainError(f"lambda[{i}]={float(x)!r} is not finite")
        if case is Case.MA and not x > 0:
            raise DomainError(f"lambda[{i}]={float(x)!r} must be > 0 (Monge-Ampere)")
        elif case is Case.SMALL and not (x > -op.a + op.b or x < -op.a - op.b):
            raise DomainError(
                f"lambda[{i}]={float(x)!r} inside [-a-b, -a+b] = [{-op.a - op.b}, {-op.a + op.b}]"
            )
        elif case is Case.INVERSE and x == -1.0:
            raise DomainError(f"lambda[{i}] = -1 is singular")
        elif case is Case.LARGE and x == -op.a - op.b:
            raise DomainError(f"lambda[{i}] = -a-b is singular")


def eigen_term(op: Operator, lam):
    """Per-eigenvalue summand f with F_tau(lambda) = sum_i f(lambda_i).  No domain checks."""
    lam = np.asarray(lam, dtype=float)
    case = op.case
    if case is Case.MA:
        return np.log(lam) / op.n
    if case is Case.SMALL:
        a, b = op.a, op.b
        return op.scale / (2 * b) * np.log((lam + a - b) / (lam + a + b))
    if case is Case.INVERSE:
        return -math.sqrt(2.0) / (1.0 + lam)
    if case is Case.LARGE:
        a, b = op.a, op.b
        return op.scale / b * np.arctan((lam + a - b) / (lam + a + b))
    return np.arctan(lam)


def eigen_term_inverse(op: Operator, y: float) -> float:
    """Solve f(lambda) = y for the single eigenvalue lambda."""
    case = op.case
    if case is Case.MA:
        return math.exp(op.n * y)
    if case is Case.INVERSE:
        if y == 0.0:
            raise DomainError("f(lambda) = 0 has no solution in the inverse case")
        return -math.sqrt(2.0) / y - 1.0
    if case is Case.SPL:
        if not abs(y) < math.pi / 2:
            raise DomainError(f"arctan(lambda) = {y!r} outside (-pi/2, pi/2)")
        return math.tan(y)
    a, b = op.a, op.b
    if case is Case.SMALL:
        q = math.exp(2 * b * y / op.scale)
    else:
        t = b * y / op.scale
        if not abs(t) < math.pi / 2:
            raise DomainError(f"arctan argument {t!r} outside (-pi/2, pi/2)")
        q = math.tan(t)
    if q == 1.0:
        raise DomainError("eigenvalue at infinity")
    return (q * (a + b) - (a - b)) / (1.0 - q)


def eigen_term_derivative(op: Operator, lam):
    lam = np.asarray(lam, dtype=float)
    case = op.case
    if case is Case.MA:
        return 1.0 / (op.n * lam)
    if case is Case.SMALL:
        return op.scale / ((lam + op.a) ** 2 - op.b**2)
    if case is Case.INVERSE:
        return math.sqrt(2.0) / (1.0 + lam) ** 2
    if case is Case.LARGE:
        return op.scale / ((lam + op.a) ** 2 + op.b**2)
    return 1.0 / (1.0 + lam * lam)


def evaluate_F(op: Operator, lam: Sequence[float]) -> float:
    lam = _as_lambda(op, lam)
    _check_domain(op, lam)
    return float(np.sum(eigen_term(op, lam)))


def gradient_F(op: Operator, lam: Sequence[float]) -> np.ndarray:
    """Closed-form dF/dlambda_i; the full sqrt(a^2+1) prefactor is kept in the interior cases."""
    lam = _as_lambda(op, lam)
    _check_domain(op, lam)
    return eigen_term_derivative(op, lam)


def DF_matrix(op: Operator, A) -> np.ndarray:
    """Matrix derivative of M -> F_tau(lambda(M)) at a symmetric matrix ``A``.

    Spectral construction ``sum_i f'(lambda_i) v_i v_i^T`` over an orthonormal
    eigenbasis of ``A``; repeated eigenvalues need no special treatment.
    """
    A = np.asarray(A, dtype=float)
    if A.shape != (op.n, op.n):
        raise ContractError(f"expected {op.n}x{op.n} matrix, got {A.shape}")
    if not np.allclose(A, A.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise ContractError("DF_matrix requires a symmetric matrix")
    lam, V = np.linalg.eigh(0.5 * (A + A.T))
    d = gradient_F(op, lam)
    return (V * d) @ V.T


@dataclass(frozen=True)
class AdmissibilityReport:
    satisfied: bool
    condition_id: str
    margin: float


def check_admissibility(op: Operator, lam: Sequence[float], K: float = 1e6,
                        eps_n: float = 0.0) -> AdmissibilityReport:
    """Evaluate the Hessian lower-bound (or phase) condition matching ``op.case``.

    ``K`` and ``eps_n`` are the free constants of the special Lagrangian
    conditions; they also enter the large-tau condition.
    """
    lam = np.asarray(lam, dtype=float)
    lo = float(np.min(lam))
    n = op.n
    if op.case is Case.MA:
        return AdmissibilityReport(lo > 0, "i", lo)
    if op.case is Case.SMALL:
        m = lo - (-op.a + op.b)
        return AdmissibilityReport(m > 0, "ii", m)
    if op.case is Case.INVERSE:
        m = lo + 1.0
        return AdmissibilityReport(m > 0, "iii", m)

    if op.case is Case.LARGE:
        a, b = op.a, op.b
        floor = -(a + b * K) if n <= 4 else -(a + b / math.sqrt(3.0) + b * eps_n)
        base = lo + a + b
        m_a = min(base, lo - floor)
        m_b = min(base, abs(op.Cprime + n * math.pi / 4) - (n - 2) * math.pi / 2)
        ids = ("iv_a", "iv_b")
    else:
        floor = -K if n <= 4 else -(1.0 / math.sqrt(3.0) + eps_n)
        m_a = lo - floor
        m_b = abs(op.C0) - (n - 2) * math.pi / 2
        ids = ("v_a", "v_b")
    if m_a > 0:
        return AdmissibilityReport(True, ids[0], m_a)
    if m_b > 0:
        return AdmissibilityReport(True, ids[1], m_b)
    if m_a >= m_b:
        return AdmissibilityReport(False, ids[0], m_a)
    return AdmissibilityReport(False, ids[1], m_b)
