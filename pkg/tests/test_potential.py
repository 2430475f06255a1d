import numpy as np
import pytest

from dilab.grid import build_grid
from dilab.potential import PotentialError, check_params, radial_profile, sample_potential


@pytest.mark.parametrize(
    "family,params",
    [("inverse_power", {"c": 1.0, "p": 1.5}), ("gaussian_bump", {"a": 2.0, "sigma": 1.3}), ("compact_bump", {"a": 1.0, "R": 2.0})],
)
def test_derivative_matches_finite_difference(family, params):
    full = check_params(family, params)
    r = np.linspace(0.1, 1.9, 50)
    V, dV = radial_profile(family, full, r)
    d = 1e-6
    fd = (radial_profile(family, full, r + d)[0] - radial_profile(family, full, r - d)[0]) / (2 * d)
    assert np.max(np.abs(fd - dV)) < 1e-7


def test_inverse_power_formula():
    r = np.array([0.0, 1.0, 3.0])
    V, _ = radial_profile("inverse_power", {"c": 2.0, "p": 1.0}, r)
    assert np.allclose(V, 2.0 / (1 + r**2))


@pytest.mark.parametrize(
    "family,params",
    [("nope", {}), ("inverse_power", {}), ("inverse_power", {"c": -1.0}), ("inverse_power", {"c": 1.0, "p": 0.5}),
     ("gaussian_bump", {"a": 1.0, "sigma": 0.0}), ("zero", {"c": 1.0})],
)
def test_bad_params(family, params):
    with pytest.raises(PotentialError):
        check_params(family, params)


def test_zero_potential_hypotheses():
    g = build_grid("radial", 3, 20.0, 128)
    h = sample_potential("zero", {}, g).hypotheses
    assert h.sr0 and h.decay and h.new and h.rageweak and h.sr0_C == 0.0


def test_inverse_power_sr0_records_largest_exponent():
    g = build_grid("radial", 3, 200.0, 1024)
    h = sample_potential("inverse_power", {"c": 1.0}, g).hypotheses
    # V ~ r^{-2}: (1 + r)^{1+eps} V stays bounded exactly for eps <= 1
    assert h.sr0 and h.sr0_eps == 1.0
    assert h.decay


def test_compact_bump_is_supported_in_ball():
    g = build_grid("radial", 4, 10.0, 256)
    pot = sample_potential("compact_bump", {"a": 1.0, "R": 2.0}, g)
    assert not np.any(pot.V[g.radius >= 2.0])
    assert pot.hypotheses.rageweak
