import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from exterior_expansion.errors import ContractError, ConvexityError, RangeError
from exterior_expansion.operator_family import evaluate_F, make_operator
from exterior_expansion.radial_solver import build_first_integral, build_solution, default_branch
from exterior_expansion.transforms import (
    RadialProfile,
    eigenvalue_map_small,
    legendre_radial,
    profile_from_solution,
    reduce_case_iv,
    verify_case_iv,
    verify_ma_reduction,
    verify_poisson_reduction,
)

from conftest import POINTS, solution

pi = math.pi


def quad_profile(r, k=1.0):
    return RadialProfile(r, k * r**2, 2 * k * r, np.full_like(r, 2 * k))


def test_quadratic_conjugate():
    r = np.linspace(0.5, 5, 40)
    t = legendre_radial(quad_profile(r))
    assert_allclose(t.U, t.r_grid**2 / 4, rtol=1e-14)
    assert_allclose(t.d2U, 0.5, rtol=1e-15)


def test_involution():
    r = np.geomspace(1, 10, 50)
    p = RadialProfile(r, r**4 / 4 + r**2, r**3 + 2 * r, 3 * r**2 + 2)
    back = legendre_radial(legendre_radial(p))
    assert_allclose(back.r_grid, p.r_grid, rtol=1e-12)
    assert_allclose(back.U, p.U, rtol=1e-8)
    assert_allclose(back.dU, p.dU, rtol=1e-8)
    assert_allclose(back.d2U, p.d2U, rtol=1e-8)


def test_nonconvex_raises():
    r = np.linspace(1, 3, 10)
    with pytest.raises(ConvexityError) as exc:
        legendre_radial(RadialProfile(r, -(r**2), -2 * r, np.full_like(r, -2.0)))
    assert exc.value.radius == 1.0


def test_profile_contract():
    with pytest.raises(ContractError):
        RadialProfile([1.0, 1.0], [0, 0], [0, 0], [0, 0])


def test_profile_consistency():
    op, sol = solution(*POINTS["Small"])
    prof = profile_from_solution(sol, np.linspace(2, 100, 2001))
    assert prof.consistency() <= 1e-8


def test_small_case_legendre_hessian():
    op, sol = solution(*POINTS["Small"])
    r = np.geomspace(2, 100, 30)
    prof = profile_from_solution(sol, r, shift=op.a + op.b)
    t = legendre_radial(prof)
    # v'(s) = r recovers the sample radii, and v'' U'' = 1 at matching points
    rr = t.dU_fn(t.r_grid)
    assert_allclose(np.sort(rr), r, rtol=1e-10)
    assert_allclose(t.d2U * (sol.d2u(rr) + op.a + op.b), 1.0, rtol=1e-8)


def test_eigenvalue_map_small_examples():
    assert_allclose(eigenvalue_map_small(1.0, 1.0, 0.5), 0.6, rtol=1e-15)
    a, b = 0.3, 0.8
    assert 0 < eigenvalue_map_small(-a + b + 1e-12, a, b) < 1e-11
    assert 1 - 1e-9 < eigenvalue_map_small(1e10, a, b) < 1
    lam = np.linspace(-a + b + 0.01, 10, 50)
    assert_allclose(eigenvalue_map_small(lam, a, b), (lam + a - b) / (lam + a + b), rtol=1e-14)
    with pytest.raises(RangeError):
        eigenvalue_map_small(-a + b, a, b)


def test_eigenvalue_map_cross_check_quadratic():
    # quadratic u = lam |x|^2 / 2 transforms to u~ with Hessian 1 - 2b/(lam+a+b)
    a, b, lam = 1.0, 0.5, 1.0
    r = np.linspace(1, 4, 20)
    t = legendre_radial(RadialProfile(r, 0.5 * (lam + a + b) * r**2, (lam + a + b) * r,
                                      np.full_like(r, lam + a + b)))
    assert_allclose(1 - 2 * b * t.d2U, eigenvalue_map_small(lam, a, b), rtol=1e-14)


def test_ma_reduction_radial():
    op, sol = solution(*POINTS["Small"])
    rep = verify_ma_reduction(op, sol)
    assert rep.passed, rep.as_dict()
    assert rep.residual_max <= 1e-6
    assert rep.details["map_gap"] <= 1e-6
    assert rep.details["margin"] > 0


def test_ma_reduction_quadratic():
    op, sol = solution(pi / 6, 3, -1.0, 0.0)
    rep = verify_ma_reduction(op, sol)
    assert rep.passed and rep.residual_max <= 1e-14


def test_ma_reduction_wrong_case():
    op, sol = solution(*POINTS["SPL"])
    with pytest.raises(ContractError):
        verify_ma_reduction(op, sol)


def test_poisson_reduction():
    op, sol = solution(*POINTS["Inverse"])
    rep = verify_poisson_reduction(op, sol)
    assert rep.passed and rep.residual_max <= 1e-6
    assert rep.details["hessian_max"] <= -op.C0 / math.sqrt(2)
    op, sol = solution(pi / 4, 3, -1.0, 0.0)
    rep = verify_poisson_reduction(op, sol)
    assert rep.residual_max <= 1e-14


def test_poisson_reduction_c0_zero():
    op = make_operator(pi / 4, 3, 0.0)
    sol = build_solution(default_branch(build_first_integral(op)), op, 1.0)
    rep = verify_poisson_reduction(op, sol)
    assert rep.residual_max <= 1e-8
    assert any("C0 >= 0" in f for f in rep.flags)


def test_case_iv_example():
    op = make_operator(pi / 3, 3, 0.0)
    spl, sub = reduce_case_iv(op)
    assert_allclose(sub.C0_spl, 3 * pi / 4, rtol=1e-15)
    assert sub.supercritical
    assert spl.case.value == "SPL"


def test_case_iv_eigen_map():
    op, sol = solution(*POINTS["Large"])
    spl, sub = reduce_case_iv(op)
    for r in (2.0, 7.0, 40.0):
        lam = sol.eigenvalues(r)
        mu = sub.eigen(lam)
        assert_allclose(mu, (lam + op.a) / op.b, rtol=1e-15)
        assert abs(evaluate_F(spl, mu) - spl.C0) <= 1e-10


def test_case_iv_pde():
    op, sol = solution(*POINTS["Large"])
    rep = verify_case_iv(op, sol)
    assert rep.passed and rep.residual_max <= 1e-6


def test_case_iv_composition():
    tau, n, C0, c = POINTS["Large"]
    op, sol = solution(tau, n, C0, c)
    spl, sub = reduce_case_iv(op)
    v = build_solution(default_branch(build_first_integral(spl)), spl, c)
    r = np.geomspace(1.25, 1e4, 50)
    x = np.zeros((len(r), n))
    x[:, 0] = r
    assert_allclose(sub.u(v.u(r), x), sol.u(r), rtol=1e-7, atol=1e-7)
    assert_allclose(op.b * v.du(r) - op.a * r, sol.du(r), rtol=1e-7, atol=1e-7)


def test_case_iv_wrong_case():
    with pytest.raises(ContractError):
        reduce_case_iv(make_operator(0.0, 3, 0.0))
