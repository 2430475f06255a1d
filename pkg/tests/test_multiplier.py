import numpy as np
import pytest
import scipy.integrate

from dilab.grid import build_grid
from dilab.multiplier import (
    BumpProfile,
    MultiplierError,
    bilaplacian,
    bilaplacian_radial,
    build_multiplier,
    bump_integral_ladder,
    coefficient_centrifugal,
    finite_difference_bilaplacian,
    hessian_form,
    hessian_form_direct,
)

from conftest import gaussian


@pytest.mark.parametrize("k", [1, 2, 4])
def test_bump_plateau_edge_and_integral(k):
    b = BumpProfile(k)
    assert b.edge == pytest.approx((k + 1) / k)
    assert b.h(0.5) == 1.0 and b.h(b.edge + 0.01) == 0.0
    quad, _ = scipy.integrate.quad(b.h, 0, 3, points=[1.0, b.edge])
    assert b.integral == pytest.approx(quad, rel=1e-12)


def test_bump_ladder():
    assert bump_integral_ladder([1, 2, 4]) == pytest.approx([1.5, 1.25, 1.125])


def test_bump_derivative_chain():
    b = BumpProfile(2, plateau=1.0)
    r = np.linspace(0.0, 3.0, 30001)
    psi, d1, d2, d3, d4 = b.derivatives(r)
    # the fifth derivative jumps at the knots, so differences are only checked away from them
    away = (np.abs(r - 1.0) > 0.01) & (np.abs(r - b.edge) > 0.01) & (r > 0.01) & (r < 2.99)
    for lo, hi in [(psi, d1), (d1, d2), (d2, d3), (d3, d4)]:
        num = np.gradient(lo, r)
        assert np.max(np.abs(num[away] - hi[away])) < 1e-3
    assert np.allclose(d2, b.h(r))
    # psi(r) = int_0^r (r - s) h(s) ds
    for x in (0.7, 1.2, 2.5):
        quad, _ = scipy.integrate.quad(lambda s: (x - s) * b.h(s), 0, x, points=[1.0, b.edge])
        assert b.derivatives(np.array([x]))[0][0] == pytest.approx(quad, rel=1e-10)


def test_bump_rejects_bad_shape():
    with pytest.raises(MultiplierError):
        BumpProfile(0)
    with pytest.raises(MultiplierError):
        BumpProfile(1, plateau=2.0, edge=1.0)


@pytest.mark.parametrize("family,params", [("smoothed_abs", {"eps": 0.5}), ("japanese_bracket", {}), ("bump_integrated", {"k": 2})])
@pytest.mark.parametrize("n", [3, 4, 5])
def test_closed_form_bilaplacian_vs_finite_difference(family, params, n):
    g = build_grid("radial", n, 6.0, 6000)
    m = build_multiplier(family, params, g)
    fd = finite_difference_bilaplacian(m.psi, g)
    inner = (g.radius > 0.5) & (g.radius < 5.0)
    if family == "bump_integrated":
        edge = BumpProfile(params["k"]).edge
        inner &= (np.abs(g.radius - 1.0) > 0.05) & (np.abs(g.radius - edge) > 0.05)
    scale = np.max(np.abs(m.bilap[inner]))
    assert np.max(np.abs(fd[inner] - m.bilap[inner])) < 2e-3 * scale


def test_bilaplacian_formula_on_power():
    # Delta^2 r^4 = 8 n (n + 2) in R^n
    r = np.linspace(0.5, 3, 7)
    for n in (2, 3, 4, 5):
        d = (r**4, 4 * r**3, 12 * r**2, 24 * r, 24 + 0 * r)
        assert np.allclose(bilaplacian_radial(d, r, n), 8 * n * (n + 2))


def test_bump_tail_in_n4_and_n3():
    g4 = build_grid("radial", 4, 40.0, 4000)
    _, flags = bilaplacian(build_multiplier("bump_integrated", {"k": 4}, g4))
    assert flags["fitted_exponent"] == pytest.approx(-3.0, abs=1e-6)
    assert flags["fitted_C"] == pytest.approx(-3 * 1 * 1.125, rel=1e-9)
    g3 = build_grid("radial", 3, 40.0, 4000)
    _, flags3 = bilaplacian(build_multiplier("bump_integrated", {"k": 4}, g3))
    assert flags3["tail_vanishes"]


def test_abs_flags_origin_in_low_dimensions():
    g = build_grid("radial", 3, 5.0, 64)
    _, flags = bilaplacian(build_multiplier("abs", {}, g))
    assert flags["distributional_at_origin"]
    g5 = build_grid("radial", 5, 5.0, 64)
    m5 = build_multiplier("abs", {}, g5)
    assert not m5.flags["distributional_at_origin"]
    # Delta^2 |x| = -(n-1)(n-3)/|x|^3
    assert np.allclose(m5.bilap, -8 / g5.radius**3)


def test_rescaled_multiplier():
    g = build_grid("radial", 4, 20.0, 400)
    base = build_multiplier("bump_integrated", {"k": 1}, g)
    R = 3.0
    m = build_multiplier("rescaled", {"base": "bump_integrated", "k": 1, "R": R}, g)
    psi_ref = R * BumpProfile(1).derivatives(g.radius / R)[0]
    assert np.allclose(m.psi, psi_ref)
    assert m.dpsi_inf == base.dpsi_inf
    assert m.length_scale == pytest.approx(2 * R)
    with pytest.raises(MultiplierError):
        build_multiplier("rescaled", {"base": "rescaled", "R": 1.0}, g)
    with pytest.raises(MultiplierError):
        build_multiplier("rescaled", {"base": "abs", "R": 0.0}, g)


def test_scale_offset_and_constant():
    g = build_grid("radial", 3, 5.0, 64)
    a = build_multiplier("japanese_bracket", {}, g)
    b = build_multiplier("japanese_bracket", {"scale": 2.0, "offset": 5.0}, g)
    assert np.allclose(b.psi, 2 * a.psi + 5) and np.allclose(b.bilap, 2 * a.bilap)
    assert b.dpsi_inf == 2.0
    c = build_multiplier("constant", {"value": 3.0}, g)
    assert not np.any(c.d1) and not np.any(c.bilap) and c.dpsi_inf == 0.0


def test_unknown_family():
    with pytest.raises(MultiplierError):
        build_multiplier("cubic", {}, build_grid("radial", 3, 5.0, 64))


def test_hessian_form_against_full_contraction():
    g = build_grid("cartesian", 2, 8.0, 64)
    m = build_multiplier("japanese_bracket", {}, g)
    u = gaussian(g, 1.2, 1.0, 0.3)
    assert np.max(np.abs(hessian_form(m, u) - hessian_form_direct(m, u))) < 1e-12


def test_centrifugal_coefficients():
    assert [coefficient_centrifugal(n) for n in (3, 4, 5)] == [0.0, 0.75, 2.0]
