import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from flockmf.exceptions import InvalidParameterError
from flockmf.kernels import (confinement_gradient, cutoff_profile, max_force_magnitude,
                             mollifier, mollifier_normalization, newton_constant,
                             newtonian_reg_force, newtonian_reg_potential, velocity_cutoff,
                             verify_kernel_bounds)

# mpmath, 30 digits
C3 = 0.238732414637843003653325645059
POT_EPS_QUARTER = 0.213528763025153117543028802921
FORCE_UNIT = -0.0844046546397286940207999241569
MOLLIFIER_1D_PEAK = 0.828568839869105151664159062986


def test_potential_at_origin():
    assert newtonian_reg_potential(np.zeros(3), 1.0) == pytest.approx(3 / (4 * math.pi), rel=1e-15)
    assert newton_constant(3) == pytest.approx(C3, rel=1e-15)


def test_potential_closed_form_value():
    assert newtonian_reg_potential([1.0, 0, 0], 0.25) == pytest.approx(POT_EPS_QUARTER, rel=1e-14)


@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan"), float("inf")])
def test_nonpositive_eps_rejected(bad):
    with pytest.raises(InvalidParameterError):
        newtonian_reg_potential(np.ones(3), bad)
    with pytest.raises(InvalidParameterError):
        newtonian_reg_force(np.ones(3), bad)


def test_dimension_below_three_rejected():
    with pytest.raises(InvalidParameterError):
        newtonian_reg_potential(np.ones(2), 1.0)


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=5), st.floats(1e-3, 10))
def test_potential_even_force_odd(x, eps):
    x = np.array(x)
    assert newtonian_reg_potential(x, eps) == newtonian_reg_potential(-x, eps)
    np.testing.assert_array_equal(newtonian_reg_force(-x, eps), -newtonian_reg_force(x, eps))


def test_potential_radially_decreasing():
    r = np.linspace(0, 5, 200)
    pts = np.zeros((200, 4))
    pts[:, 2] = r
    vals = newtonian_reg_potential(pts, 0.3)
    assert np.all(np.diff(vals) < 0) and np.all(vals > 0)


def test_force_zero_at_origin():
    np.testing.assert_array_equal(newtonian_reg_force(np.zeros(3), 0.7), np.zeros(3))


def test_force_unit_value():
    f = newtonian_reg_force(np.array([1.0, 0, 0]), 1.0)
    assert f[0] == pytest.approx(FORCE_UNIT, rel=1e-14)
    assert f[1] == 0 and f[2] == 0


def test_force_matches_finite_differences():
    rng = np.random.default_rng(5)
    h = 1e-6
    worst = 0.0
    for _ in range(1000):
        d = int(rng.integers(3, 6))
        eps = 10 ** rng.uniform(-1, 0.5)
        x = rng.uniform(-2, 2, size=d)
        fd = np.empty(d)
        for k in range(d):
            e = np.zeros(d)
            e[k] = h
            fd[k] = (newtonian_reg_potential(x + e, eps) - newtonian_reg_potential(x - e, eps)) / (2 * h)
        g = newtonian_reg_force(x, eps)
        worst = max(worst, np.linalg.norm(g - fd) / np.linalg.norm(g))
    assert worst <= 1e-6


@pytest.mark.parametrize("d", [3, 4, 5])
def test_kernel_bounds_numeric_matches_analytic(d):
    rep = verify_kernel_bounds(1.0, d)
    assert rep.relative_error < 0.01
    assert rep.argmax_radius == pytest.approx(math.sqrt(1 / (d - 1)), rel=0.01)


def test_kernel_bound_halving_eps():
    d = 3
    a, b = verify_kernel_bounds(0.4, d), verify_kernel_bounds(0.2, d)
    assert b.numeric_max / a.numeric_max == pytest.approx(2 ** ((d - 1) / 2), rel=1e-3)
    assert max_force_magnitude(0.2, d) / max_force_magnitude(0.4, d) == pytest.approx(2.0)


@pytest.mark.parametrize("eps", [0.1, 0.5, 1.0])
def test_kernel_max_below_eps_power_bound(eps):
    const = max_force_magnitude(1.0, 3)
    assert verify_kernel_bounds(eps, 3).numeric_max <= const * eps ** (-1.5)


def test_kernel_bounds_grid_precondition():
    with pytest.raises(InvalidParameterError):
        verify_kernel_bounds(1.0, 3, grid=100)


def test_mollifier_support():
    x = np.array([[1.0, 0, 0], [0, 0.6, 0.8], [2, 2, 2]])
    np.testing.assert_array_equal(mollifier(x, 1.0), 0.0)
    assert mollifier(np.array([0.99, 0, 0]), 1.0) > 0


def test_mollifier_1d_peak():
    assert mollifier(np.zeros(1), 1.0) == pytest.approx(MOLLIFIER_1D_PEAK, rel=1e-10)
    assert mollifier_normalization(1) == pytest.approx(0.443993816168079437823, rel=1e-10)


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("eps", [0.2, 1.0, 1.7])
def test_mollifier_unit_mass_radial(d, eps):
    if d == 1:
        mass, _ = quad(lambda s: mollifier(np.array([s]), eps), -eps, eps, epsabs=1e-13)
    else:
        area = 2 * math.pi ** (d / 2) / math.gamma(d / 2)

        def f(r):
            x = np.zeros(d)
            x[0] = r
            return area * r ** (d - 1) * mollifier(x, eps)
        mass, _ = quad(f, 0, eps, epsabs=1e-13)
    assert mass == pytest.approx(1.0, abs=1e-4)


def test_cutoff_values():
    assert velocity_cutoff(np.array([1.0, 0, 0]), 0.5) == 1.0
    assert velocity_cutoff(np.array([0, 5.0, 0]), 0.5) == 0.0
    assert velocity_cutoff(np.array([0, 0, 3.0]), 0.5) == pytest.approx(0.5, abs=1e-15)


def test_cutoff_range_and_c2_junctions():
    s = np.linspace(0, 3, 3001)
    phi = cutoff_profile(s)
    assert phi.min() >= 0 and phi.max() <= 1
    assert np.all(np.diff(phi) <= 0)
    for s0 in (1.0, 2.0):
        for h in (1e-2, 5e-3):
            left = (cutoff_profile(s0) - 2 * cutoff_profile(s0 - h) + cutoff_profile(s0 - 2 * h)) / h ** 2
            right = (cutoff_profile(s0 + 2 * h) - 2 * cutoff_profile(s0 + h) + cutoff_profile(s0)) / h ** 2
            # one-sided second differences agree up to O(h)
            assert abs(left - right) <= 200 * h


@settings(max_examples=300)
@given(st.lists(st.floats(-100, 100), min_size=3, max_size=3), st.floats(1e-2, 10))
def test_weighted_velocity_bound(v, delta):
    v = np.array(v)
    assert np.linalg.norm(v) * velocity_cutoff(v, delta) <= 2 / delta


def test_confinement_gradient():
    np.testing.assert_array_equal(confinement_gradient(np.zeros(3)), np.zeros(3))
    np.testing.assert_array_equal(confinement_gradient([1, 2, 3]), [1.0, 2.0, 3.0])
    x = np.array([0.3, -1.2, 4.0])
    np.testing.assert_allclose(confinement_gradient(2.5 * x), 2.5 * confinement_gradient(x))
