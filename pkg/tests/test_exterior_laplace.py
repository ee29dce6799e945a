import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import special_ortho_group

from exterior_expansion.errors import ContractError, DomainError, NotDecayingError
from exterior_expansion.exterior_laplace import (
    HarmonicBasis,
    affine_decompose,
    decay_report,
    fast_decay_poisson,
    harmonic_tail_decompose,
    ladder,
    linearization_coefficients,
    matrix_sqrt,
    multiplicity,
    project_modes,
    solve_mode,
)
from exterior_expansion.ode_oracle import hessian_fd, loglog_slope
from exterior_expansion.operator_family import DF_matrix, evaluate_F, make_operator

from conftest import solution

B3 = HarmonicBasis(3, 4)


def radius(x):
    return np.linalg.norm(np.atleast_2d(x), axis=1)


def mode(basis, k, m):
    i = basis.index(k, m)
    return lambda x: basis.evaluate(x)[:, i]


def test_ladder_and_multiplicity():
    assert [ladder(k, 3) for k in range(4)] == [0, 2, 6, 12]
    assert [multiplicity(k, 3) for k in range(5)] == [1, 3, 5, 7, 9]
    assert ladder(2, 5) == 10
    assert multiplicity(2, 4) == 9


def test_gram_identity():
    b = HarmonicBasis(3, 8)
    assert np.max(np.abs(b.gram() - np.eye(b.size))) <= 1e-10
    assert b.size == 81
    b4 = HarmonicBasis(4, 6)
    assert np.max(np.abs(b4.gram() - np.eye(b4.size))) <= 1e-10


def test_project_single_mode():
    for k, m in [(0, 0), (1, -1), (2, 1), (3, 3)]:
        c = project_modes(mode(B3, k, m), 1.0, B3)
        i = B3.index(k, m)
        assert_allclose(c[i], 1.0, atol=1e-12)
        assert np.max(np.abs(np.delete(c, i))) <= 1e-12


def test_project_radial():
    c = project_modes(lambda x: np.exp(-radius(x)) + 0.0 * x[:, 0], 2.0, B3)
    assert_allclose(c[0], math.exp(-2), rtol=1e-14)
    assert np.max(np.abs(c[1:])) <= 1e-12


def test_project_planted():
    Y1 = mode(B3, 1, 0)
    v = lambda x: radius(x) ** -1 + 3 * radius(x) ** -2 * Y1(x)
    r = 2.0
    c = project_modes(v, r, B3)
    assert_allclose([c[0] * r, c[B3.index(1, 0)] * r**2], [1.0, 3.0], rtol=1e-13)


def test_solve_mode_monomials():
    r = np.geomspace(2, 100, 7)
    a = solve_mode(0, 3, lambda t: t**-5, 5)
    assert_allclose(a(r), r**-3 / 6, rtol=1e-9)
    a = solve_mode(1, 3, lambda t: t**-6, 6)
    assert_allclose(a(r), r**-4 / 10, rtol=1e-9)
    a = solve_mode(2, 3, lambda t: 0.0, 5)
    assert np.all(a(r) == 0.0)


def test_solve_mode_contract():
    with pytest.raises(ContractError):
        solve_mode(0, 3, lambda t: t**-2, 2.0)


@pytest.mark.parametrize("k,k1", [(0, 5), (1, 5), (2, 5), (3, 5), (0, 6.5), (2, 4.5)])
def test_mode_residual(k, k1):
    b = lambda t: t**-k1 * math.cos(math.log(t))
    a = solve_mode(k, 3, b, k1)
    r = np.geomspace(2, 1e4, 200)
    res = a.residual(r, b)
    scale = np.abs(r**-k1)
    assert np.max(np.abs(res) / scale) <= 1e-8
    assert a.provenance == ("fast_decay_lowk" if k < k1 - 3 else "fast_decay_highk")


@pytest.mark.parametrize("n", [3, 4, 5])
def test_homogeneous_ladder(n):
    r = np.geomspace(1.5, 50, 30)
    for k in range(5):
        L = ladder(k, n)
        for e in (k, 2 - n - k):
            op = e * (e - 1) * r ** (e - 2) + (n - 1) / r * e * r ** (e - 1) - L / r**2 * r**e
            assert np.max(np.abs(op) / r ** (e - 2)) <= 1e-12


def test_fast_decay_radial():
    g = lambda x: radius(x) ** -5.0
    v = fast_decay_poisson(g, 5, 0, B3)
    pts = np.array([[2.0, 0, 0], [0, 7.0, 1.0], [30.0, -4.0, 2.0]])
    assert_allclose(v(pts), radius(pts) ** -3 / 6, rtol=1e-9)
    assert np.max(np.abs(v.laplacian_residual(pts))) <= 1e-8
    rep = v.decay(num=12)
    assert abs(rep.slope + 3) <= 0.15 and rep.accepted


def test_fast_decay_dipole():
    Y1 = mode(B3, 1, 0)
    v = fast_decay_poisson(lambda x: radius(x) ** -6.0 * Y1(x), 6, 0, B3)
    pts = np.array([[2.0, 1.0, 0.5], [0, 7.0, 1.0], [3.0, -4.0, 12.0]])
    assert_allclose(v(pts), radius(pts) ** -4 * Y1(pts) / 10, rtol=1e-9, atol=1e-14)
    assert set(v.modes) == {(1, 0)}


def test_fast_decay_log_case():
    v = fast_decay_poisson(lambda x: radius(x) ** -6.0, 6, 0, B3)
    rep = v.decay(num=12)
    assert rep.log_case
    assert rep.accepted


def test_log_dichotomy():
    # k = 2 = k1 - n puts a genuine ln r into the mode; accepted only because k1 - n is an integer
    Y2 = mode(B3, 2, 0)
    v = fast_decay_poisson(lambda x: radius(x) ** -5.0 * Y2(x), 5, 0, B3)
    rep = v.decay(num=12)
    assert rep.log_case and rep.accepted
    r = np.geomspace(1e2, 1e4, 12)
    # variation of parameters with the r^-3 kernel started at 2
    exact = -(np.log(r / 2) + 0.2) * r**-3 / 5
    assert_allclose(v.modes[(2, 0)].a(r), exact, rtol=1e-9)
    # the same r^-3 ln r profile is rejected once k1 - n is not an integer
    prof = lambda x: radius(x) ** -3.0 * np.log(radius(x))
    rep2 = decay_report(prof, 5.0 + 1e-9, 0, 3, num=12, tol=0.1)
    assert not rep2.log_case and not rep2.accepted
    rep3 = decay_report(prof, 5.0, 0, 3, num=12, tol=0.1)
    assert rep3.log_case and rep3.used_log_bound and rep3.accepted


def test_derivative_decay_one_power_lower():
    g = lambda x: radius(x) ** -5.0 * (1 + x[:, 2] / radius(x))
    v = fast_decay_poisson(g, 5, 0, B3)
    r = np.geomspace(1e2, 1e3, 8)
    e = np.array([0.6, 0.0, 0.8])
    h = 1e-3 * r
    d = [(v((ri + hi) * e[None]) - v((ri - hi) * e[None]))[0] / (2 * hi) for ri, hi in zip(r, h)]
    slope = loglog_slope(r, np.array(d))
    assert abs(slope - (1 - 5)) <= 0.2


def test_truncation_energy():
    v = fast_decay_poisson(lambda x: radius(x) ** -5.0, 5, 0, B3)
    assert v.truncation_energy <= 1e-12
    b = HarmonicBasis(3, 2)
    v = fast_decay_poisson(lambda x: radius(x) ** -5.0 * mode(b, 2, 1)(x), 5, 0, b)
    assert v.truncation_energy > 1e-3


def test_tail_planted():
    Y1 = mode(B3, 1, -1)
    v = lambda x: 2 / radius(x) + 5 * radius(x) ** -2 * Y1(x)
    tail = harmonic_tail_decompose(v, 3, 6, B3)
    assert_allclose(tail.coefficients[(0, 0)], 2.0, rtol=1e-10)
    assert_allclose(tail.coefficients[(1, -1)], 5.0, rtol=1e-10)
    others = [abs(c) for key, c in tail.coefficients.items() if key not in {(0, 0), (1, -1)}]
    assert max(others) <= 1e-10
    assert tail.remainder_max <= 1e-10


def test_tail_fundamental():
    tail = harmonic_tail_decompose(lambda x: 1 / radius(x), 3, 5, B3)
    assert_allclose(tail.coefficients[(0, 0)], 1.0, rtol=1e-12)
    assert tail.remainder_max <= 1e-14


def test_tail_dipole_lands_in_degree_one():
    v = lambda x: np.atleast_2d(x)[:, 0] / radius(x) ** 3
    x = np.array([2.0, 1.0, -0.5])
    assert abs(np.trace(hessian_fd(lambda p: v(p), x, 1e-3))) <= 1e-6
    tail = harmonic_tail_decompose(v, 3, 6, B3)
    norms = tail.degree_norms()
    assert_allclose(norms[1], 1 / math.sqrt(3), rtol=1e-10)
    assert norms[0] <= 1e-12 and norms[2] <= 1e-12


def test_tail_growing_mode_raises():
    with pytest.raises(NotDecayingError):
        harmonic_tail_decompose(lambda x: 1 / radius(x) + np.atleast_2d(x)[:, 0], 3, 6, B3)


def test_matrix_sqrt():
    assert_allclose(matrix_sqrt(np.eye(3)), np.eye(3))
    assert_allclose(matrix_sqrt(np.diag([4.0, 9.0, 1.0])), np.diag([2.0, 3.0, 1.0]), rtol=1e-15)
    rng = np.random.default_rng(3)
    for _ in range(20):
        M = rng.normal(size=(3, 3))
        S = M @ M.T + 0.1 * np.eye(3)
        Q = matrix_sqrt(S)
        assert_allclose(Q, Q.T, atol=0)
        assert np.linalg.norm(Q @ Q - S) <= 1e-11 * max(1, np.linalg.norm(S))
    with pytest.raises(DomainError):
        matrix_sqrt(np.diag([1.0, -1.0, 2.0]))
    with pytest.raises(DomainError):
        matrix_sqrt(np.array([[1.0, 2.0], [0.0, 1.0]]))


def normal_form(a_inf, coeffs, basis):
    """sum c (x^T a^-1 x)^((2-n-k)/2) Y(a^-1/2 x / |.|)."""
    Qi = np.linalg.inv(matrix_sqrt(a_inf))

    def v(x):
        y = np.atleast_2d(x) @ Qi.T
        r = radius(y)
        Y = basis.evaluate(y)
        return sum(c * r ** (-1 - k) * Y[:, basis.index(k, m)] for (k, m), c in coeffs.items())

    return v


def test_affine_identity_reduces():
    v = lambda x: 2 / radius(x)
    a = affine_decompose(v, np.eye(3), 3, 6, B3)
    b = harmonic_tail_decompose(v, 3, 6, B3)
    assert a.coefficients == b.coefficients


def test_affine_diag():
    A = np.diag([4.0, 1.0, 1.0])
    v = lambda x: np.einsum("ij,jk,ik->i", np.atleast_2d(x), np.linalg.inv(A), np.atleast_2d(x)) ** -0.5
    tail = affine_decompose(v, A, 3, 6, B3)
    assert_allclose(tail.coefficients[(0, 0)], 1.0, rtol=1e-12)
    assert max(abs(c) for key, c in tail.coefficients.items() if key != (0, 0)) <= 1e-8


def test_affine_rotation_invariance():
    A = np.diag([4.0, 1.0, 1.0])
    coeffs = {(0, 0): 1.5, (1, 1): -0.7, (2, -2): 0.4, (2, 0): 0.9}
    v = normal_form(A, coeffs, B3)
    base = affine_decompose(v, A, 3, 6, B3).degree_norms()
    for ang in (0.3, 1.1, 2.5):
        c, s = math.cos(ang), math.sin(ang)
        R = np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
        rot = affine_decompose(lambda x: v(np.atleast_2d(x) @ R.T), A, 3, 6, B3).degree_norms()
        for k in base:
            assert abs(base[k] - rot[k]) <= 1e-8


def test_linearization_quadratic():
    op = make_operator(math.pi / 2, 3, 0.3)
    A = np.diag([0.1, 0.2, 0.3])
    u = lambda x: 0.5 * np.einsum("...i,ij,...j->...", x, A, x)
    a = linearization_coefficients(op, u, A, np.array([3.0, 1.0, 2.0]), h=1e-2)
    assert_allclose(a, DF_matrix(op, A), atol=1e-10)


def test_linearization_mean_value_identity():
    op, sol = solution(math.pi / 2, 3, 0.0, 1.0)
    A = 2 * sol.c2 * np.eye(3)
    rng = np.random.default_rng(9)
    for _ in range(50):
        d = rng.normal(size=3)
        x = d / np.linalg.norm(d) * math.exp(rng.uniform(math.log(2), math.log(50)))
        H = sol.hessian(x)
        a = linearization_coefficients(op, sol.value, A, x, hess=sol.hessian)
        lhs = np.sum(a * (H - A))
        rhs = evaluate_F(op, np.linalg.eigvalsh(H)) - evaluate_F(op, np.linalg.eigvalsh(A))
        assert abs(lhs - rhs) <= 1e-7


def test_linearization_decay_slope():
    # C0 != 0 so DF has a nonzero first variation at A and the O(|x|^-n) term is not cancelled
    op, sol = solution(math.pi / 2, 3, 1.0, 1.0)
    A = 2 * sol.c2 * np.eye(3)
    D = DF_matrix(op, A)
    r = np.geomspace(10, 1000, 12)
    e = np.array([1.0, 2.0, 2.0]) / 3
    dev = [np.linalg.norm(linearization_coefficients(op, sol.value, A, ri * e, hess=sol.hessian) - D)
           for ri in r]
    assert abs(loglog_slope(r, dev) + 3) <= 0.2


def test_linearization_second_order_at_zero_phase():
    # with C0 = 0 and A = 0 the first variation of DF vanishes and the decay doubles
    op, sol = solution(math.pi / 2, 3, 0.0, 1.0)
    # beyond r ~ 300 the deviation reaches round-off
    r = np.geomspace(10, 150, 8)
    e = np.array([1.0, 2.0, 2.0]) / 3
    dev = [np.linalg.norm(linearization_coefficients(op, sol.value, np.zeros((3, 3)), ri * e,
                                                     hess=sol.hessian) - np.eye(3)) for ri in r]
    assert abs(loglog_slope(r, dev) + 6) <= 0.2


def test_linearization_inadmissible():
    op = make_operator(0.0, 3, 0.0)
    A = np.eye(3)
    u = lambda x: 0.5 * np.einsum("...i,...i->...", x, x) - 2.0 * np.atleast_2d(x)[..., 0] ** 2
    with pytest.raises(DomainError, match="t ="):
        linearization_coefficients(op, u, A, np.array([2.0, 0, 0]), h=1e-2)


def test_tail_far_radii_quadrupole():
    # r^2 and r^-3 columns differ by ~1e15 at these radii
    Y = mode(B3, 2, 1)
    v = lambda x: 0.7 * radius(x) ** -3 * Y(x)
    tail = harmonic_tail_decompose(v, 3, 6, B3, radii=(1e3, 2e3, 4e3))
    assert_allclose(tail.coefficients[(2, 1)], 0.7, rtol=1e-10)
    assert max(abs(g) for g in tail.growing.values()) <= 1e-20
