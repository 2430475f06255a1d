import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dilab.grid import (
    ComplexField,
    GridError,
    angular_gradient_sq,
    build_grid,
    fourier_transform,
    gradient,
    grad_sq,
    integrate,
    inverse_fourier_transform,
    radial_derivative,
    sphere_measure,
)

from conftest import gaussian


def test_sphere_measure_low_dimensions():
    assert sphere_measure(2) == pytest.approx(2 * math.pi)
    assert sphere_measure(3) == pytest.approx(4 * math.pi)
    assert sphere_measure(4) == pytest.approx(2 * math.pi**2)


@pytest.mark.parametrize(
    "args",
    [("polar", 2, 10.0, 64), ("cartesian", 4, 10.0, 32), ("radial", 1, 10.0, 64), ("cartesian", 1, -1.0, 64),
     ("cartesian", 1, 10.0, 8), ("cartesian", 1, 10.0, 33)],
)
def test_build_grid_rejects(args):
    with pytest.raises(GridError):
        build_grid(*args)


def test_cartesian_nodes_avoid_origin():
    g = build_grid("cartesian", 3, 5.0, 16)
    assert np.min(g.radius) > 0
    assert g.axis[0] == pytest.approx(-5.0 + g.h / 2)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_gaussian_integral_cartesian(n):
    g = build_grid("cartesian", n, 8.0, 64)
    total = integrate(np.exp(-np.pi * g.radius**2), g)
    assert total == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_gaussian_integral_radial(n):
    g = build_grid("radial", n, 10.0, 2000)
    total = integrate(np.exp(-g.radius**2), g)
    assert total == pytest.approx(math.pi ** (n / 2), rel=1e-5)


def test_region_masks_and_bounds():
    g = build_grid("radial", 3, 10.0, 100)
    ball = g.region_mask("ball", 4.0)
    ann = g.region_mask("annulus", 4.0)
    assert not np.any(ball & ann) and np.all(ball | ann)
    with pytest.raises(GridError):
        g.region_mask("ball", 11.0)
    with pytest.raises(GridError):
        g.region_mask("ball")


def test_fourier_transform_of_self_dual_gaussian():
    g = build_grid("cartesian", 2, 8.0, 128)
    fhat = fourier_transform(np.exp(-np.pi * g.radius**2), g)
    xi2 = sum(x**2 for x in g.frequencies)
    assert np.max(np.abs(fhat - np.exp(-np.pi * xi2))) < 1e-12


def test_fourier_roundtrip(line):
    f = gaussian(line, 1.5, 0.7, 0.2).values
    back = inverse_fourier_transform(fourier_transform(f, line), line)
    assert np.max(np.abs(back - f)) < 1e-13


def test_gradient_of_trig_mode_is_exact():
    g = build_grid("cartesian", 2, np.pi, 32)
    x, y = g.mesh
    grad = gradient(np.sin(3 * x) * np.cos(2 * y), g)
    assert np.max(np.abs(grad[0] - 3 * np.cos(3 * x) * np.cos(2 * y))) < 1e-12
    assert np.max(np.abs(grad[1] + 2 * np.sin(3 * x) * np.sin(2 * y))) < 1e-12


def test_gradient_batches_over_leading_axes(line):
    f = gaussian(line).values
    stack = np.stack([f, 2 * f])
    g = gradient(stack, line)
    assert g.shape == (1, 2, line.N)
    assert np.allclose(g[0, 1], 2 * gradient(f, line)[0])


def test_radial_derivative_cartesian_vs_radial():
    gc = build_grid("cartesian", 3, 8.0, 48)
    gr = build_grid("radial", 3, 8.0, 2000)
    dc = radial_derivative(np.exp(-gc.radius**2), gc)
    dr = radial_derivative(np.exp(-gr.radius**2), gr)
    assert np.max(np.abs(dc + 2 * gc.radius * np.exp(-gc.radius**2))) < 1e-8
    assert np.max(np.abs(dr + 2 * gr.radius * np.exp(-gr.radius**2))) < 1e-4


def test_angular_gradient_of_radial_function_vanishes():
    g = build_grid("cartesian", 2, 8.0, 64)
    assert np.max(angular_gradient_sq(np.exp(-g.radius**2), g)) < 1e-12


def test_angular_gradient_on_radial_grid_warns():
    g = build_grid("radial", 4, 8.0, 64)
    with pytest.warns(UserWarning):
        assert not np.any(angular_gradient_sq(np.ones(g.shape), g))


def test_field_shape_and_finiteness():
    g = build_grid("cartesian", 1, 5.0, 32)
    with pytest.raises(GridError):
        ComplexField(g, np.zeros(31))
    with pytest.raises(ValueError):
        ComplexField(g, np.full(32, np.nan))


def test_tail_fraction_detects_edge_mass(line):
    assert gaussian(line, 1.0).tail_fraction() < 1e-30
    assert gaussian(line, 1.0, shift=18.5).tail_fraction() > 0.5


@settings(max_examples=25, deadline=None)
@given(st.floats(0.6, 2.0), st.floats(-3, 3), st.floats(-0.5, 0.5))
def test_parseval(sigma, shift, k):
    g = build_grid("cartesian", 1, 20.0, 256)
    f = gaussian(g, sigma, shift, k)
    fhat = fourier_transform(f.values, g)
    assert np.sum(np.abs(fhat) ** 2) * g.dxi == pytest.approx(f.mass(), rel=1e-12)


def test_grad_sq_matches_gradient(line):
    f = gaussian(line, 1.2, 0.0, 0.3)
    assert np.allclose(grad_sq(f), np.abs(gradient(f)[0]) ** 2)
