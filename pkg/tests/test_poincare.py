import math

import numpy as np
import pytest
import scipy.linalg

from conftest import problem
from ultrafast.errors import NumericalFailure, ParameterError
from ultrafast.poincare import (
    assemble_operators,
    poincare_check,
    richardson,
    spectral_gap,
    weighted_variance,
)


def dense_gap(eq):
    """Oracle: full generalised eigendecomposition."""
    S, M = assemble_operators(eq)
    vals = scipy.linalg.eigh(S.toarray(), M.toarray(), eigvals_only=True)
    return np.sort(vals)[1]


def test_n4_periodic_exact():
    _, _, eq = problem("periodic1d", 4)
    res = spectral_gap(eq)
    assert res.lambda1 == 32.0
    assert res.C_P == 0.03125


@pytest.mark.parametrize("n", [5, 16, 33, 128])
def test_circulant_closed_form(n):
    _, _, eq = problem("periodic1d", n)
    exact = 4 * n * n * math.sin(math.pi / n) ** 2
    assert spectral_gap(eq).lambda1 == pytest.approx(exact, rel=1e-10)


def test_uniform_stiffness_is_scaled_circulant():
    grid, _, eq = problem("periodic1d", 6)
    S, M = assemble_operators(eq)
    lap = 2 * np.eye(6) - np.roll(np.eye(6), 1, axis=1) - np.roll(np.eye(6), -1, axis=1)
    np.testing.assert_allclose(S.toarray(), lap / grid.h[0], rtol=1e-13)
    np.testing.assert_allclose(M.diagonal(), grid.h[0] * eq.m)


@pytest.mark.parametrize(
    "setup", [("periodic1d", 20, None, "uniform", {}), ("truncated1d", 40, 6.0, "quadratic", {}),
              ("tensor2d", 10, 6.0, "power", {"alpha": 1.5})]
)
def test_operator_structure(setup):
    kind, n, L, wk, kw = setup
    _, _, eq = problem(kind, n, L, wk, **kw)
    S, M = assemble_operators(eq)
    assert abs(S - S.T).max() == 0
    np.testing.assert_allclose(S @ np.ones(eq.grid.size), 0.0, atol=1e-13 * abs(S).max())
    assert np.linalg.eigvalsh(S.toarray()).min() > -1e-10 * abs(S).max()


@pytest.mark.parametrize(
    "setup", [("truncated1d", 80, 10.0, "quadratic", {}), ("truncated1d", 80, 12.0, "power", {"alpha": 1.5}),
              ("tensor2d", 14, 8.0, "quadratic", {}), ("periodic1d", 31, None, "uniform", {})]
)
def test_inverse_iteration_matches_dense_eigensolver(setup):
    kind, n, L, wk, kw = setup
    _, _, eq = problem(kind, n, L, wk, **kw)
    res = spectral_gap(eq)
    assert res.lambda1 == pytest.approx(dense_gap(eq), rel=1e-9)
    assert res.residual <= 1e-10


def test_gaussian_equilibrium_constant_is_variance():
    # m = N(0, 3) for rho = N(0, 1), r = 2
    values = []
    for n in (200, 400, 800):
        _, _, eq = problem("truncated1d", n, 6 * math.sqrt(3), "quadratic")
        values.append(spectral_gap(eq).C_P)
    assert values[-1] == pytest.approx(3.0, rel=1e-2)
    assert richardson(values) == pytest.approx(3.0, rel=1e-3)


def test_gap_refinement_at_least_second_order():
    # the symmetric stencil is exact on the linear eigenfunction up to the
    # weight's face averaging, so the observed order exceeds two
    values = []
    for n in (100, 200, 400):
        _, _, eq = problem("truncated1d", n, 14.0, "quadratic")
        values.append(spectral_gap(eq).lambda1)
    d1, d2 = values[1] - values[0], values[2] - values[1]
    assert abs(d1 / d2) >= 3.5
    assert abs(d2) < abs(d1)


def test_spatial_rescaling():
    _, _, eq1 = problem("truncated1d", 150, 6.0, "quadratic", sigma=0.5)
    _, _, eq2 = problem("truncated1d", 150, 12.0, "quadratic", sigma=1.0)
    assert spectral_gap(eq2).C_P == pytest.approx(4 * spectral_gap(eq1).C_P, rel=1e-9)


@pytest.fixture(scope="module")
def gaussian_gap():
    _, _, eq = problem("truncated1d", 120, 9.0, "quadratic")
    return eq, spectral_gap(eq)


def test_poincare_check_cases(gaussian_gap):
    eq, res = gaussian_gap
    assert poincare_check(np.full(eq.grid.size, 2.5), eq, res.C_P) == pytest.approx(0.0, abs=1e-12)
    g = res.eigenvector
    assert abs(poincare_check(g, eq, res.C_P)) <= 1e-9 * weighted_variance(g, eq)
    # mass-orthogonal to constants
    assert abs(np.sum(g * eq.m) * eq.grid.cell_volume) <= 1e-10 * np.linalg.norm(g)


def test_poincare_random_vectors(gaussian_gap, rng):
    eq, res = gaussian_gap
    for _ in range(1000):
        g = rng.standard_normal(eq.grid.size) * rng.uniform(0.01, 100)
        scale = weighted_variance(g, eq)
        assert poincare_check(g, eq, res.C_P) >= -1e-10 * scale


def test_nonconvergence_reports_residual(gaussian_gap):
    eq, _ = gaussian_gap
    with pytest.raises(NumericalFailure) as info:
        spectral_gap(eq, tol=1e-30, max_iter=3)
    assert info.value.residual is not None and info.value.residual > 0
    with pytest.raises(ParameterError):
        spectral_gap(eq, tol=0.0)


def test_richardson_exact_for_quadratic_error():
    h = np.array([0.1, 0.05])
    assert richardson(2.0 + 3 * h**2) == pytest.approx(2.0, rel=1e-14)
