import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlthin.densities import (
    growth_check,
    homogeneous_convex,
    pure_convolution,
    rotation_example,
)
from nlthin.kernels import gaussian_separable


def test_pure_convolution_values():
    den = pure_convolution(1.0, 2.0)
    xi = np.array([0.5, 0.0])
    z = np.array([[3.0], [-2.0]])
    np.testing.assert_allclose(den.eval(None, xi, z), [9.0, 4.0])
    # outside the cylinder the integrand vanishes
    assert den.eval(None, np.array([1.5, 0.0]), z)[0] == 0.0
    assert den.eval(None, np.array([0.5, 1.2]), z)[0] == 0.0


def test_pure_convolution_grad_matches_fd():
    den = pure_convolution(1.0, 3.0)
    xi = np.array([0.3, -0.4])
    rng = np.random.default_rng(1)
    z = rng.normal(size=(50, 2))
    g = den.grad_z(None, xi, z)
    h = 1e-6
    for j in range(2):
        zp = z.copy()
        zp[:, j] += h
        fd = (den.eval(None, xi, zp) - den.eval(None, xi, z)) / h
        np.testing.assert_allclose(g[:, j], fd, rtol=1e-4, atol=1e-6)


def test_homogeneous_convex_weighting():
    den = homogeneous_convex(gaussian_separable(), 2.0)
    xi = np.array([0.5, 0.25])
    a = np.exp(-0.25) * np.exp(-0.0625)
    np.testing.assert_allclose(
        den.eval(None, xi, np.array([[2.0]])), [4.0 * a], rtol=1e-12
    )


@settings(max_examples=200, deadline=None)
@given(
    z1=st.floats(-5, 5), z2=st.floats(-5, 5),
    p=st.floats(1.2, 4.0),
)
def test_convexity_midpoint_inequality(z1, z2, p):
    den = pure_convolution(1.0, p)
    xi = np.array([0.2, 0.1])
    za = np.array([[z1]])
    zb = np.array([[z2]])
    mid = den.eval(None, xi, (za + zb) / 2.0)[0]
    avg = (den.eval(None, xi, za)[0] + den.eval(None, xi, zb)[0]) / 2.0
    assert mid <= avg + 1e-12 * (1.0 + abs(avg))


def test_convexity_flag_honesty_random_triples():
    # the declared convexity must hold on 1000 random (xi, z1, z2)
    rng = np.random.default_rng(0)
    for den, m in [(pure_convolution(1.0, 2.0), 1),
                   (homogeneous_convex(gaussian_separable(), 3.0), 2)]:
        assert den.is_convex_in_z
        for _ in range(500):
            xi = rng.uniform(-1.2, 1.2, size=2)
            z1 = rng.normal(size=(1, m))
            z2 = rng.normal(size=(1, m))
            mid = den.eval(None, xi, (z1 + z2) / 2.0)[0]
            avg = (den.eval(None, xi, z1)[0] + den.eval(None, xi, z2)[0]) / 2.0
            assert mid <= avg + 1e-10 * (1.0 + abs(avg))


def test_rotation_example_regions():
    den = rotation_example(0.05, 2.0)
    e1 = np.array([1.0, 0.0, 0.0])
    # inside C_1 the first term measures the relative stretch |z|/|xi|
    xi = np.array([0.5, 0.0, 0.0])
    val = den.eval(None, xi, np.array([[0.5, 0.0, 0.0]]))[0]
    assert val == pytest.approx(0.0, abs=1e-12)
    val = den.eval(None, xi, np.array([[1.0, 0.0, 0.0]]))[0]
    assert val == pytest.approx(1.0)  # |z|/|xi| = 2, (2-1)^2
    # at a bump center the bump term is active and C_1 is not
    xi_b = np.array([1.0, 0.0, 1.0])
    v0 = den.eval(None, xi_b, np.array([[1.0, 0.0, 0.0]]))[0]
    assert v0 == pytest.approx(0.0, abs=1e-12)
    v1 = den.eval(None, xi_b, np.array([[0.0, 0.0, 0.0]]))[0]
    assert v1 > 0.0
    # outside every region
    assert den.eval(None, np.array([2.0, 0.0, 0.0]),
                    np.array([[1.0, 1.0, 1.0]]))[0] == 0.0
    assert not den.is_convex_in_z
    assert den.params["bump_part"].is_convex_in_z


def test_rotation_example_grad_matches_fd():
    den = rotation_example(0.05, 2.0)
    rng = np.random.default_rng(2)
    for xi in (np.array([0.4, 0.2, -0.3]), np.array([1.0, 0.0, 1.0])):
        z = rng.normal(size=(20, 3)) + 0.1
        g = den.grad_z(None, xi, z)
        h = 1e-6
        for j in range(3):
            zp = z.copy()
            zm = z.copy()
            zp[:, j] += h
            zm[:, j] -= h
            fd = (den.eval(None, xi, zp) - den.eval(None, xi, zm)) / (2 * h)
            np.testing.assert_allclose(g[:, j], fd, rtol=1e-4, atol=1e-5)


def test_growth_check_passes_builtins():
    assert growth_check(pure_convolution(1.0, 2.0)).passed
    assert growth_check(homogeneous_convex(gaussian_separable(), 2.0)).passed
    assert growth_check(rotation_example(0.05, 2.0)).passed


def test_growth_check_reports_witness_for_broken_constants():
    from dataclasses import replace

    den = pure_convolution(1.0, 2.0)
    broken = replace(den, growth=replace(den.growth, c2=0.1))
    report = growth_check(broken)
    assert not report.passed
    w = report.violations[0]
    assert w.f_value > w.upper


def test_density_validation():
    with pytest.raises(ValueError):
        pure_convolution(-1.0, 2.0)
    with pytest.raises(ValueError):
        pure_convolution(1.0, 1.0)
    with pytest.raises(ValueError):
        rotation_example(0.6, 2.0)
    with pytest.raises(ValueError):
        rotation_example(0.05, 2.0, d=2)
