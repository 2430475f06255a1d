import dataclasses

import numpy as np
import pytest
import scipy.special
from hypothesis import given, settings, strategies as st

from dilab.grid import build_grid
from dilab.potential import sample_potential
from dilab.spectral import (
    FOURIER,
    DomainError,
    IncompatibleGridError,
    TooLargeError,
    assemble_hamiltonian,
    energy_form,
    evolve,
    functional_calculus,
    perturbed_sobolev_norm,
    propagate_free,
    propagate_perturbed,
    propagate_splitstep,
    spectral_laplacian_1d,
    step_exact,
)

from conftest import gaussian


def _op(grid, family="zero", **params):
    return assemble_hamiltonian(grid, sample_potential(family, params, grid))


def test_spectral_laplacian_on_trig_mode():
    N, L = 32, np.pi
    h = 2 * L / N
    x = -L + (np.arange(N) + 0.5) * h
    K = spectral_laplacian_1d(N, h)
    assert np.max(np.abs(K @ np.sin(5 * x) - 25 * np.sin(5 * x))) < 1e-11


def test_free_cartesian_spectrum_is_fourier_symbol():
    g = build_grid("cartesian", 2, 4.0, 16)
    xi2 = sum(x**2 for x in g.frequencies).ravel()
    assert np.allclose(_op(g).eigenvalues, np.sort(FOURIER.symbol(xi2)), atol=1e-9)


def test_radial_n3_spectrum_matches_discrete_sine_modes():
    g = build_grid("radial", 3, 10.0, 200)
    k = np.arange(1, 11)
    expect = 4 / g.h**2 * np.sin(k * np.pi * g.h / (2 * g.L)) ** 2
    assert np.allclose(_op(g).eigenvalues[:10], expect, rtol=1e-12)


def test_radial_n2_flux_form_approaches_bessel_zeros():
    g = build_grid("radial", 2, 10.0, 800)
    j0 = scipy.special.jn_zeros(0, 5)
    lam = _op(g).eigenvalues[:5]
    assert np.allclose(lam, (j0 / g.L) ** 2, rtol=2e-3)


@pytest.mark.parametrize("n", [4, 5])
def test_radial_higher_n_spectrum_near_bessel_zeros(n):
    g = build_grid("radial", n, 10.0, 800)
    zeros = scipy.special.jn_zeros(n / 2 - 1, 3) if n % 2 == 0 else None
    lam = _op(g).eigenvalues[:3]
    if zeros is not None:
        assert np.allclose(lam, (zeros / g.L) ** 2, rtol=1e-3)
    assert np.all(lam > 0)


def test_node_budget_guard():
    g = build_grid("cartesian", 3, 5.0, 18)
    with pytest.raises(TooLargeError):
        _op(g)


def test_potential_on_other_grid_refused():
    a = build_grid("cartesian", 1, 5.0, 32)
    b = build_grid("cartesian", 1, 6.0, 32)
    with pytest.raises(IncompatibleGridError):
        assemble_hamiltonian(a, sample_potential("zero", {}, b))


def test_functional_calculus_identity_and_domain(line):
    op = _op(line, "inverse_power", c=1.0)
    f = gaussian(line, 1.3, 0.5)
    assert np.allclose(functional_calculus(op, np.ones_like, f).values, f.values, atol=1e-13)
    with pytest.raises(DomainError):
        functional_calculus(op, lambda lam: 1 / (lam - lam[3]), f)


def test_sobolev_norms_against_forms(line):
    op = _op(line, "inverse_power", c=1.0)
    f = gaussian(line, 1.3, 0.5, 0.1)
    assert perturbed_sobolev_norm(op, f, 0.0) == pytest.approx(f.norm(), rel=1e-13)
    assert perturbed_sobolev_norm(op, f, 1.0) ** 2 == pytest.approx(energy_form(f, op.potential), rel=1e-10)
    with pytest.raises(ValueError):
        perturbed_sobolev_norm(op, f, -1.0)


def test_free_half_norm_matches_fourier_side(line):
    op = _op(line)
    f = gaussian(line, 1.1, 0.3, 0.2)
    lhs = perturbed_sobolev_norm(op, f, 0.5) ** 2
    assert lhs == pytest.approx(2 * np.pi * FOURIER.sobolev_norm_sq(f, 0.5), rel=1e-11)


def test_negative_eigenvalue_refused(line):
    op = _op(line)
    bad = dataclasses.replace(op, eigenvalues=op.eigenvalues - 1.0)
    with pytest.raises(DomainError):
        perturbed_sobolev_norm(bad, gaussian(line), 0.5)


def test_eigen_and_fourier_free_flows_agree(line):
    f = gaussian(line, 1.0, 0.0, 0.2)
    a = propagate_perturbed(_op(line), f, 0.7).values
    b = propagate_free(line, f, 0.7).values
    assert np.max(np.abs(a - b)) < 1e-11


def test_group_property_and_time_reversal(line):
    op = _op(line, "gaussian_bump", a=2.0)
    f = gaussian(line, 1.0, 1.0)
    u = propagate_perturbed(op, propagate_perturbed(op, f, 0.4), 0.6)
    assert np.max(np.abs(u.values - propagate_perturbed(op, f, 1.0).values)) < 1e-12
    back = propagate_perturbed(op, propagate_perturbed(op, f, 2.0), -2.0)
    assert np.max(np.abs(back.values - f.values)) < 1e-12


def test_evolve_shape_and_step_exact(line):
    op = _op(line, "inverse_power", c=1.0)
    f = gaussian(line)
    vals = evolve(op, f, [0.0, 0.5, 1.0])
    assert vals.shape == (3, line.N)
    times, snaps = step_exact(op, f, 0.1, 10, every=5)
    assert np.allclose(times, [0.0, 0.5, 1.0])
    assert np.max(np.abs(snaps - vals)) < 1e-12


def test_splitstep_free_is_exact(line):
    f = gaussian(line, 1.0, 0.0, 0.1)
    pot = sample_potential("zero", {}, line)
    a = propagate_splitstep(line, pot, f, 1.0, 0.1).values
    assert np.max(np.abs(a - propagate_free(line, f, 1.0).values)) < 1e-12


def test_splitstep_second_order(line):
    pot = sample_potential("inverse_power", {"c": 2.0}, line)
    op = assemble_hamiltonian(line, pot)
    f = gaussian(line, 1.5)
    ref = propagate_perturbed(op, f, 1.0).values
    errs = [np.max(np.abs(propagate_splitstep(line, pot, f, 1.0, dt).values - ref)) for dt in (0.1, 0.05, 0.025)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 2) < 0.1)


def test_splitstep_guards(line):
    pot = sample_potential("zero", {}, line)
    with pytest.raises(ValueError):
        propagate_splitstep(line, pot, gaussian(line), 1.0, 0.3)
    g = build_grid("radial", 3, 5.0, 32)
    with pytest.raises(IncompatibleGridError):
        propagate_splitstep(g, sample_potential("zero", {}, g), gaussian(g), 1.0, 0.1)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.7, 2.0), st.floats(-2, 2), st.floats(-50, 50))
def test_exact_flow_conserves_mass_and_energy(sigma, shift, t):
    g = build_grid("radial", 3, 20.0, 128)
    op = _op(g, "inverse_power", c=1.0)
    f = gaussian(g, sigma) if shift == 0 else gaussian(g, sigma)
    u = propagate_perturbed(op, f, t)
    assert u.mass() == pytest.approx(f.mass(), rel=1e-12)
    assert op.quadratic_form(u) == pytest.approx(op.quadratic_form(f), rel=1e-11)
