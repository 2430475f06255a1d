"""Scalar functionals of states and trajectories."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import ComplexField, Grid, GridError, grad_sq, gradient, radial_derivative
from .multiplier import Multiplier, hessian_form
from .potential import Potential
from .spectral import FOURIER, SpectralOperator, evolve, perturbed_sobolev_norm


class TailMassError(RuntimeError):
    """Mass reached the outer band of the box: wraparound or edge reflection would corrupt results."""

    def __init__(self, message: str, worst: float = float("nan"), time: float = float("nan")):
        super().__init__(message)
        self.worst = worst
        self.time = time


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Solution samples ``values[j]`` at increasing ``times[j]`` on one grid."""

    grid: Grid
    times: np.ndarray
    values: np.ndarray
    provenance: str = "exact"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 1 or np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if self.values.shape != (t.size,) + self.grid.shape:
            raise ValueError("values do not match times and grid")
        object.__setattr__(self, "times", t)

    def __len__(self):
        return self.times.size

    def field(self, j: int) -> ComplexField:
        return ComplexField(self.grid, self.values[j], label=f"t={self.times[j]:g}")

    def fields(self):
        for j in range(len(self)):
            yield self.field(j)

    @property
    def time_weights(self) -> np.ndarray:
        """Trapezoid weights including endpoints."""
        t = self.times
        w = np.zeros_like(t)
        if t.size > 1:
            dt = np.diff(t)
            w[:-1] += dt / 2
            w[1:] += dt / 2
        return w

    def tail_fractions(self, fraction: float = 0.1) -> np.ndarray:
        m = self.grid.outer_mask(fraction)
        dens = np.abs(self.values) ** 2 * self.grid.weights
        total = dens.reshape(len(self), -1).sum(axis=1)
        return dens[:, m].reshape(len(self), -1).sum(axis=1) / np.where(total > 0, total, 1.0)

    @property
    def worst_tail(self) -> float:
        return float(np.max(self.tail_fractions()))

    def map(self, fn) -> np.ndarray:
        return np.array([fn(f) for f in self.fields()])

    def time_integral(self, series) -> float:
        return float(np.sum(self.time_weights * np.asarray(series)))


@dataclass(frozen=True)
class TimeSeries:
    name: str
    times: np.ndarray
    values: np.ndarray
    units: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "units": self.units, "t": list(map(float, self.times)), "value": list(map(float, self.values))}


def check_tail(traj: Trajectory, threshold: float = 1e-6, fraction: float = 0.1) -> float:
    tails = traj.tail_fractions(fraction)
    j = int(np.argmax(tails))
    if tails[j] > threshold:
        raise TailMassError(
            f"tail-mass breach: {tails[j]:.3e} of the mass in the outer {fraction:.0%} at t={traj.times[j]:g}"
            f" (threshold {threshold:g})",
            float(tails[j]),
            float(traj.times[j]),
        )
    return float(tails[j])


def trajectory(op: SpectralOperator, f: ComplexField, times, tail_threshold: float | None = None) -> Trajectory:
    traj = Trajectory(op.grid, np.asarray(times, dtype=float), evolve(op, f, times), "exact")
    if tail_threshold is not None:
        check_tail(traj, tail_threshold)
    return traj


def _arr(u):
    """(values, grid) for a field or a whole trajectory."""
    if isinstance(u, Trajectory):
        return u.values, u.grid
    return u.values, u.grid


def _quad(dens, grid: Grid):
    """Spatial quadrature over the trailing axes; float for a single field, array over time otherwise."""
    k = grid.n if grid.mode == "cartesian" else 1
    out = np.sum(grid.weights * dens, axis=tuple(range(-k, 0)))
    return float(out) if np.ndim(out) == 0 else out


def _same_grid(u, grid: Grid):
    if _arr(u)[1] != grid:
        raise GridError("field and weight live on different grids")


def virial_flux(u, multiplier: Multiplier):
    """Im \\int u^* grad u . grad psi dx, with grad psi = psi' x/|x|.

    Accepts a ComplexField (returns a float) or a Trajectory (returns the series).
    """
    _same_grid(u, multiplier.grid)
    v, grid = _arr(u)
    return _quad(np.imag(np.conj(v) * multiplier.d1 * radial_derivative(v, grid)), grid)


def centered_flux_G(u):
    """G = -2 Im \\int u^* grad u . x/|x| dx."""
    v, grid = _arr(u)
    return -2.0 * _quad(np.imag(np.conj(v) * radial_derivative(v, grid)), grid)


def weighted_mass(u):
    """\\int |x| |u|^2 dx."""
    v, grid = _arr(u)
    return _quad(grid.radius * np.abs(v) ** 2, grid)


def sigma_half_norm(f: ComplexField, op: SpectralOperator) -> float:
    """Squared norm: ||f||^2_{H^{1/2}_V} plus the |x|-weighted mass."""
    return perturbed_sobolev_norm(op, f, 0.5) ** 2 + weighted_mass(f)


def identity_density(u, multiplier: Multiplier, potential: Potential | None = None) -> np.ndarray:
    """grad u^* D^2 psi grad u - (Delta^2 psi) |u|^2 / 4 - (1/2) d_r V d_r psi |u|^2."""
    v, grid = _arr(u)
    dens = hessian_form(multiplier, v) - 0.25 * multiplier.bilap * np.abs(v) ** 2
    if potential is not None:
        dens = dens - 0.5 * potential.dV * multiplier.d1 * np.abs(v) ** 2
    return dens


def identity_integrand(u, multiplier: Multiplier, potential: Potential | None = None):
    _same_grid(u, multiplier.grid)
    return _quad(identity_density(u, multiplier, potential), _arr(u)[1])


def _check_R(grid: Grid, R: float):
    if R <= 0:
        raise GridError("R must be positive")
    if R > grid.L * (1 + 1e-12):
        raise GridError(f"R={R} exceeds grid extent {grid.L}")


def ball_time_integrals(traj: Trajectory, R: float, kind: str = "radial_derivative") -> tuple[float, float]:
    """(\\int\\int_{|x|<R} |D u|^2, \\int\\int_{|x|<R} |u|^2) with D = grad or d_r."""
    _check_R(traj.grid, R)
    if kind not in ("full_gradient", "radial_derivative"):
        raise ValueError(f"unknown kind {kind!r}")
    grid = traj.grid
    mask = grid.region_mask("ball", R)
    v = traj.values
    d2 = grad_sq(v, grid) if kind == "full_gradient" else np.abs(radial_derivative(v, grid)) ** 2
    deriv = _quad(mask * d2, grid)
    mass = _quad(mask * np.abs(v) ** 2, grid)
    return traj.time_integral(deriv), traj.time_integral(mass)


def local_smoothing_ratio(traj: Trajectory, R: float, kind: str = "radial_derivative") -> float:
    """(1/R) \\int\\int_{|x|<R} |D u|^2 dx dt over the trajectory's time span."""
    return ball_time_integrals(traj, R, kind)[0] / R


def local_smoothing_ratio_n3(traj: Trajectory, R: float, kind: str = "radial_derivative") -> float:
    """(1/R) \\int\\int_{|x|<R} (|D u|^2 + |u|^2 / R^2) dx dt."""
    deriv, mass = ball_time_integrals(traj, R, kind)
    return deriv / R + mass / R**3


@dataclass(frozen=True)
class PseudoconformalLedger:
    lhs: TimeSeries
    rhs: TimeSeries
    residual: TimeSeries
    theta: TimeSeries
    defect: TimeSeries

    @property
    def relative_residual(self) -> np.ndarray:
        return np.abs(self.residual.values) / (np.abs(self.lhs.values) + 1e-14)


def _x_plus_grad(u, a, b):
    """|| a x u + b grad u ||^2; ``a`` and ``b`` may be per-time arrays for trajectories."""
    v, grid = _arr(u)
    batch = v.ndim > len(grid.shape)
    a = np.asarray(a)
    b = np.asarray(b)
    if batch:
        extra = (slice(None),) + (None,) * len(grid.shape)
        a = a[extra] if a.ndim else a
        b = b[extra] if b.ndim else b
    if grid.mode == "radial":
        return _quad(np.abs(a * grid.radius * v + b * radial_derivative(v, grid)) ** 2, grid)
    g = gradient(v, grid)
    return _quad(sum(np.abs(a * grid.mesh[i] * v + b * g[i]) ** 2 for i in range(grid.n)), grid)


def dispersive_defect(u: ComplexField, t: float) -> float:
    """|| (x/t) u - 2i grad u ||."""
    if t == 0:
        raise ValueError("the dispersive defect is singular at t = 0")
    return float(np.sqrt(_x_plus_grad(u, 1.0 / t, -2j)))


def phase_corrected_gradient(u: ComplexField, t: float) -> float:
    """|| grad( e^{i|x|^2/(4t)} u ) || = || grad u + i (x/2t) u ||."""
    if t == 0:
        raise ValueError("t must be nonzero")
    return float(np.sqrt(_x_plus_grad(u, 0.5j / t, 1.0)))


def pseudoconformal_ledger(traj: Trajectory, potential: Potential) -> PseudoconformalLedger:
    """Both sides of the pseudoconformal law along a trajectory starting at t = 0.

    LHS(t) = ||x u - 2 i t grad u||^2 + 4 t^2 \\int V |u|^2,
    RHS(t) = \\int |x|^2 |f|^2 + \\int_0^t s theta(s) ds,
    theta = 8 \\int (V + |x| d_r V / 2) |u|^2, time integral by cumulative trapezoid.
    """
    t = traj.times
    if abs(t[0]) > 0:
        raise ValueError("ledger trajectory must start at t = 0")
    grid = traj.grid
    if potential.grid != grid:
        raise GridError("potential and trajectory live on different grids")
    dens = np.abs(traj.values) ** 2
    lhs = _x_plus_grad(traj, 1.0, -2j * t) + 4 * t**2 * _quad(potential.V * dens, grid)
    theta = 8 * _quad((potential.V + 0.5 * grid.radius * potential.dV) * dens, grid)
    defect = np.full(t.size, np.nan)
    pos = t > 0
    defect[pos] = np.sqrt(lhs[pos] - 4 * t[pos] ** 2 * _quad(potential.V * dens[pos], grid)) / t[pos]
    integrand = t * theta
    cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (integrand[1:] + integrand[:-1]))])
    rhs = _quad(grid.radius**2 * dens[0], grid) + cum
    return PseudoconformalLedger(
        TimeSeries("lhs", t, lhs),
        TimeSeries("rhs", t, rhs),
        TimeSeries("residual", t, lhs - rhs),
        TimeSeries("theta", t, theta),
        TimeSeries("defect", t, defect),
    )


def bilinear_form_a(f: ComplexField, g: ComplexField) -> complex:
    """a(f, g) = \\int f^* grad g . x/|x| dx (cartesian, n >= 2)."""
    grid = f.grid
    if grid.mode != "cartesian" or grid.n < 2:
        raise GridError("the bilinear form is defined here for cartesian grids with n >= 2")
    if g.grid != grid:
        raise GridError("arguments live on different grids")
    return complex(np.sum(grid.weights * np.conj(f.values) * radial_derivative(g)))


def bilinear_ratio(h: ComplexField) -> float:
    """|a(h, h)| / ||h||^2 in the standard homogeneous H^{1/2} norm."""
    den = FOURIER.sobolev_norm_sq(h, 0.5)
    return abs(bilinear_form_a(h, h)) / den if den > 0 else 0.0


def inverse_radius_mass(h: ComplexField) -> float:
    """\\int |h|^2 / |x| dx."""
    return float(np.sum(h.grid.weights * np.abs(h.values) ** 2 / h.grid.radius))


def weighted_observable(u, W):
    """\\int W |u|^2 dx; ``W`` is an array on the grid or a callable of |x|."""
    v, grid = _arr(u)
    weight = W(grid.radius) if callable(W) else np.asarray(W)
    return _quad(weight * np.abs(v) ** 2, grid)


def rage_time_average(traj: Trajectory, R: float, T: float) -> float:
    """(1/T) \\int_{-T}^{T} \\int_{|x|<R} |u|^2 dx dt; ``traj`` must contain the nodes t = +-T."""
    _check_R(traj.grid, R)
    tol = 1e-9 * max(T, 1.0)
    t = traj.times
    if not (np.any(np.abs(t + T) <= tol) and np.any(np.abs(t - T) <= tol)):
        raise ValueError(f"trajectory does not contain the endpoints +-{T}")
    sel = np.abs(t) <= T + tol
    mask = traj.grid.region_mask("ball", R)
    local = np.atleast_1d(_quad(mask * np.abs(traj.values[sel]) ** 2, traj.grid))
    ts = t[sel]
    return float(np.sum(0.5 * np.diff(ts) * (local[1:] + local[:-1])) / T)
