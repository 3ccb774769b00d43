import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import problem
from ultrafast.errors import ParameterError, PositivityError
from ultrafast.functionals import (
    bregman_power,
    chi2_distance,
    decay_constant,
    dissipation,
    dissipation_u,
    energy_gap,
    free_energy,
    functional_report,
    lemma_constants,
    verify_bounds,
)
from ultrafast.poincare import spectral_gap
from ultrafast.solver import _rate, pressure
from ultrafast.weights import make_initial


@pytest.fixture(scope="module")
def step_problem():
    grid, w, eq = problem("periodic1d", 4)
    f = np.array([1.5, 1.5, 0.5, 0.5])
    return grid, w, eq, f


def test_free_energy_examples(step_problem):
    _, w, eq, f = step_problem
    assert free_energy(np.ones(4), eq, w) == pytest.approx(1.0, rel=1e-15)
    # exact piecewise integral 0.5/1.5^2 + 0.5/0.5^2
    assert free_energy(f, eq, w) == pytest.approx(0.5 / 2.25 + 0.5 / 0.25, rel=1e-14)
    assert energy_gap(f, eq, w) == pytest.approx(0.5 / 2.25 + 0.5 / 0.25 - 1.0, rel=1e-14)
    assert chi2_distance(f, eq) == pytest.approx(0.25, rel=1e-15)


def test_free_energy_of_equilibrium(gaussian_1d):
    _, w, eq = gaussian_1d
    assert free_energy(eq.m, eq, w) == pytest.approx(eq.gamma ** -(eq.r + 1), rel=1e-12)
    assert energy_gap(eq.m, eq, w) == 0.0
    assert chi2_distance(eq.m, eq) == 0.0
    assert dissipation(eq.m, eq, w) == 0.0


def test_gap_matches_direct_difference(gaussian_1d):
    _, w, eq = gaussian_1d
    f = make_initial(eq, "cosine", epsilon=0.4, mode=2)
    direct = free_energy(f, eq, w) - eq.gamma ** -(eq.r + 1)
    assert energy_gap(f, eq, w) == pytest.approx(direct, rel=1e-10)


def test_positivity_error(step_problem):
    _, w, eq, _ = step_problem
    with pytest.raises(PositivityError):
        free_energy([1.0, 1.0, 2.0, 0.0], eq, w)
    with pytest.raises(PositivityError):
        dissipation([1.0, -1.0, 2.0, 1.0], eq, w)


@pytest.mark.parametrize("r", [1.5, 2.0, 3.7])
def test_bregman_series_branch_continuous(r):
    # both branches must agree across the switch at |u - 1| = 1e-3
    u = 1.0 + np.array([-1.0001e-3, -0.9999e-3, 0.9999e-3, 1.0001e-3])
    v = bregman_power(u, r)
    exact = [float((1 + (x - 1)) ** -r - 1 + r * (x - 1)) for x in u]
    np.testing.assert_allclose(v, exact, rtol=1e-7)
    d = 1e-7
    assert bregman_power(np.array([1 + d]), r)[0] == pytest.approx(r * (r + 1) / 2 * d * d, rel=1e-6)


def test_chi2_quadratic_homogeneity(gaussian_1d):
    _, _, eq = gaussian_1d
    u = 1 + 0.1 * np.sin(eq.grid.centers)
    base = chi2_distance(eq.m * u, eq)
    for s in (0.5, 2.0, 3.0):
        assert chi2_distance(eq.m * (1 + s * (u - 1)), eq) == pytest.approx(s * s * base, rel=1e-12)


def test_dissipation_small_amplitude_linearisation():
    # I ~ r^2 (r+1)^2 int |grad u|^2 = r^2 (r+1)^2 * 2 pi^2 eps^2 for u = 1 + eps cos(2 pi x)
    grid, w, eq = problem("periodic1d", 1024)
    r = 2.0
    for eps in (1e-2, 1e-3):
        u = 1 + eps * np.cos(2 * math.pi * grid.centers)
        predicted = r**2 * (r + 1) ** 2 * 2 * math.pi**2 * eps**2
        assert dissipation(u, eq, w) == pytest.approx(predicted, rel=3 * eps + 1e-5)


def test_dissipation_is_energy_rate(gaussian_1d):
    # central finite difference of F along the scheme's velocity field
    _, w, eq = gaussian_1d
    f = make_initial(eq, "cosine-series", coefficients=[0.3, -0.1, 0.05]).f
    v = _rate(f, pressure(f, w, eq.r), eq, "product")
    d = 1e-6 / np.abs(v / f).max()
    fd = (free_energy(f + d * v, eq, w) - free_energy(f - d * v, eq, w)) / (2 * d)
    assert -fd == pytest.approx(dissipation(f, eq, w), rel=1e-6)
    assert dissipation(f, eq, w) == pytest.approx(eq.gamma ** (-2 * (eq.r + 1)) * dissipation_u(f, eq), rel=1e-14)


def _fixed_field(n, L=2.0):
    grid, w, eq = problem("truncated1d", n, L, "quadratic")
    x = grid.centers
    f = np.exp(-x * x / 6) * (1 + 0.3 * np.cos(np.pi * x / 2) + 0.2 * np.sin(np.pi * x / 4))
    f /= grid.integrate(f)
    return np.array([energy_gap(f, eq), chi2_distance(f, eq), dissipation(f, eq, w)])


def test_refinement_order_two():
    v = [_fixed_field(n) for n in (100, 200, 400)]
    order = np.log2(np.abs(v[1] - v[0]) / np.abs(v[2] - v[1]))
    assert np.all((order >= 1.8) & (order <= 2.2)), order


def test_lemma_constants_examples():
    assert lemma_constants(2, 1, 1, 1) == pytest.approx((3.0, 3.0))
    assert lemma_constants(2, 1, 1, 2)[0] == pytest.approx(0.1875)
    assert lemma_constants(2, 1, 0.5, 1)[1] == pytest.approx(48.0)
    k1, k2 = lemma_constants(2.5, 0.4, 0.6, 1.7)
    assert k1 <= k2


def test_decay_constant_examples():
    assert decay_constant(2, 1, 1, 1, 1) == pytest.approx(1 / 12)
    assert decay_constant(2, 1, 0.5, 2, 1) == pytest.approx(2**7 / (12 * 0.5**4))
    assert decay_constant(2, 1, 0.5, 2, 1) == pytest.approx(170.6666666, rel=1e-8)
    assert decay_constant(2, 1, 0.8, 1.5, 1) > decay_constant(2, 1, 0.8, 1.4, 1)
    assert decay_constant(2, 1, 0.7, 1.5, 1) > decay_constant(2, 1, 0.8, 1.5, 1)


@pytest.mark.parametrize(
    "args", [(1.0, 1, 1, 1), (2, 0, 1, 1), (2, 1, 1.1, 2), (2, 1, 0.5, 0.9), (2, 1, 0, 1)]
)
def test_constants_reject_bad_parameters(args):
    with pytest.raises(ParameterError):
        lemma_constants(*args)
    with pytest.raises(ParameterError):
        decay_constant(*args, 1.0)


def test_decay_constant_rejects_bad_poincare():
    with pytest.raises(ParameterError):
        decay_constant(2, 1, 0.5, 2, 0.0)


def test_verify_bounds_step_example(step_problem):
    _, w, eq, f = step_problem
    rep = verify_bounds(f, eq, w)
    assert rep.k1 == pytest.approx(3 * 1.5**-4) and rep.k1 == pytest.approx(0.5926, abs=1e-4)
    assert rep.k2 == pytest.approx(48.0)
    assert rep.k1 * rep.chi2 == pytest.approx(0.1481, abs=1e-4)
    assert rep.k2 * rep.chi2 == pytest.approx(12.0)
    assert rep.sandwich_ok and rep.gradient_ok and rep.control_ok is None and rep.passed


def test_verify_bounds_equilibrium(gaussian_1d):
    _, w, eq = gaussian_1d
    rep = verify_bounds(eq.m, eq, w, C_P=3.0)
    assert rep.gap == 0 and rep.chi2 == 0
    assert rep.sandwich_lower_slack == 0 and rep.sandwich_upper_slack == 0
    assert rep.control_slack == 0 and rep.passed


def test_functional_report_row(gaussian_1d):
    _, w, eq = gaussian_1d
    f = make_initial(eq, "cosine", epsilon=0.2)
    rep = functional_report(f, eq, w, C_P=3.0)
    row = rep.csv_row()
    assert len(row) == len(rep.CSV_COLUMNS) == 9
    assert rep.gap >= 0 and rep.dissipation >= 0 and rep.chi2 >= 0 and rep.k1 <= rep.k2
    assert functional_report(f, eq, w).K is None


@pytest.fixture(scope="module")
def families():
    out = {}
    for name, args in {
        "uniform": ("periodic1d", 96, None, "uniform"),
        "gaussian": ("truncated1d", 160, 9.0, "quadratic"),
        "power": ("truncated1d", 160, 12.0, "power"),
    }.items():
        kw = {"alpha": 1.5} if name == "power" else {}
        _, w, eq = problem(*args, 2.0, **kw)
        out[name] = (w, eq, spectral_gap(eq).C_P)
    return out


@settings(max_examples=200, deadline=None)
@given(
    family=st.sampled_from(["uniform", "gaussian", "power"]),
    coef=st.lists(st.floats(-1, 1), min_size=1, max_size=6),
    amp=st.floats(0.01, 0.95),
    step=st.booleans(),
)
def test_bounds_property_sweep(families, family, coef, amp, step):
    w, eq, C_P = families[family]
    coef = np.array(coef)
    if step:
        f = make_initial(eq, "ratio-step", left=1 + amp, right=1 - amp)
    elif np.abs(coef).sum() == 0:
        f = make_initial(eq, "equilibrium")
    else:
        f = make_initial(eq, "cosine-series", coefficients=coef * amp / np.abs(coef).sum())
    rep = verify_bounds(f, eq, w, C_P)
    assert rep.sandwich_ok and rep.gradient_ok and rep.control_ok
    assert rep.flow_control_slack >= -1e-10
    if rep.chi2 > 1e-20:
        assert rep.gap > 0
