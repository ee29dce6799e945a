import math

import numpy as np
import pytest

from exterior_expansion.operator_family import Case, make_operator
from exterior_expansion.radial_solver import branch_catalog, build_first_integral, build_solution, default_branch

# one representative parameter point per case: (tau, n, C0, c)
POINTS = {
    "MA": (0.0, 3, 0.0, 1.0),
    "Small": (math.pi / 6, 3, -1.0, 0.3),
    "Inverse": (math.pi / 4, 3, -1.0, 0.5),
    "Large": (math.pi / 3, 3, 0.0, 0.3),
    "SPL": (math.pi / 2, 3, 0.0, 1.0),
}

_cache = {}


def solution(tau, n, C0, c, p=None, c0=0.0, r_min=1.25):
    key = (tau, n, C0, c, p, c0, r_min)
    if key not in _cache:
        op = make_operator(tau, n, C0)
        fi = build_first_integral(op)
        br = default_branch(fi) if p is None else next(b for b in branch_catalog(fi) if b.p == p)
        _cache[key] = (op, build_solution(br, op, c, c0, r_min=r_min))
    return _cache[key]


def admissible_sample(op, rng, size=None):
    """Random eigenvalues inside the open domain of ``op``."""
    n = op.n if size is None else size
    if op.case is Case.MA:
        return rng.uniform(0.1, 5.0, n)
    if op.case is Case.SMALL:
        return -op.a + op.b + rng.uniform(0.1, 5.0, n)
    if op.case is Case.INVERSE:
        return rng.uniform(-0.9, 5.0, n)
    if op.case is Case.LARGE:
        return -op.a - op.b + rng.uniform(0.1, 5.0, n)
    return rng.uniform(-5.0, 5.0, n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, shown in the terminal summary
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
