"""Uniform grids, complex fields on them, quadrature and spatial derivatives.

Two geometries are supported:

* ``cartesian``: a periodic box ``[-L, L)^n`` (n = 1, 2, 3) with nodes at
  half-integer offsets ``x_j = -L + (j + 1/2) h``, ``h = 2L/N``.  The offset
  keeps the origin off the node set, so ``x/|x|`` is regular everywhere.
* ``radial``: radially symmetric functions on ``R^n`` (n >= 2) sampled at
  ``r_i = (i + 1/2) h``, ``h = L/N``, with the sphere measure folded into the
  quadrature weights ``w_i = |S^{n-1}| r_i^{n-1} h``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

MIN_POINTS = 16


class GridError(ValueError):
    """Invalid grid construction or an out-of-range region request."""


def sphere_measure(n: int) -> float:
    """Surface measure of the unit sphere S^{n-1} in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


@dataclass(frozen=True)
class Grid:
    mode: str
    n: int
    L: float
    N: int

    @property
    def h(self) -> float:
        if self.mode == "cartesian":
            return 2.0 * self.L / self.N
        return self.L / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        if self.mode == "cartesian":
            return (self.N,) * self.n
        return (self.N,)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def axis(self) -> np.ndarray:
        """1-D node coordinates (x for cartesian, r for radial)."""
        j = np.arange(self.N) + 0.5
        if self.mode == "cartesian":
            return -self.L + j * self.h
        return j * self.h

    @cached_property
    def mesh(self) -> tuple[np.ndarray, ...]:
        if self.mode == "radial":
            return (self.axis,)
        return tuple(np.meshgrid(*([self.axis] * self.n), indexing="ij"))

    @cached_property
    def radius(self) -> np.ndarray:
        """|x| at every node."""
        if self.mode == "radial":
            return self.axis
        return np.sqrt(sum(c**2 for c in self.mesh))

    @cached_property
    def weights(self) -> np.ndarray:
        if self.mode == "radial":
            return sphere_measure(self.n) * self.axis ** (self.n - 1) * self.h
        return np.full(self.shape, self.h**self.n)

    @cached_property
    def frequencies(self) -> tuple[np.ndarray, ...]:
        """DFT frequencies xi (cycles per unit length) per axis, meshed."""
        if self.mode != "cartesian":
            raise GridError("frequencies are defined on cartesian grids only")
        xi = np.fft.fftfreq(self.N, d=self.h)
        return tuple(np.meshgrid(*([xi] * self.n), indexing="ij"))

    @property
    def dxi(self) -> float:
        return 1.0 / (2.0 * self.L)

    def region_mask(self, region: str = "all", R: float | None = None) -> np.ndarray:
        if region == "all":
            return np.ones(self.shape, dtype=bool)
        if R is None:
            raise GridError(f"region {region!r} needs a radius")
        if R > self.L * (1 + 1e-12):
            raise GridError(f"region radius {R} exceeds grid extent {self.L}")
        if region == "ball":
            return self.radius < R
        if region == "annulus":
            return self.radius >= R
        raise GridError(f"unknown region {region!r}")

    def outer_mask(self, fraction: float) -> np.ndarray:
        """Nodes in the outermost ``fraction`` of the domain."""
        edge = (1.0 - fraction) * self.L
        if self.mode == "radial":
            return self.axis > edge
        return np.max(np.abs(np.stack(self.mesh)), axis=0) > edge


def build_grid(mode: str, n: int, L: float, N: int) -> Grid:
    if mode not in ("cartesian", "radial"):
        raise GridError(f"unknown grid mode {mode!r}")
    if n < 1:
        raise GridError("invalid-dimension: n must be >= 1")
    if mode == "radial" and n < 2:
        raise GridError("invalid-dimension: radial grids need n >= 2")
    if mode == "cartesian" and n > 3:
        raise GridError("invalid-dimension: cartesian grids support n <= 3")
    if not L > 0:
        raise GridError("nonpositive extent")
    if N < MIN_POINTS:
        raise GridError(f"need at least {MIN_POINTS} points per axis, got {N}")
    if mode == "cartesian" and N % 2:
        raise GridError("cartesian grids need an even number of points")
    return Grid(mode, int(n), float(L), int(N))


@dataclass(frozen=True)
class ComplexField:
    grid: Grid
    values: np.ndarray
    label: str = field(default="", compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != self.grid.shape:
            raise GridError(f"field shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field has non-finite values")
        object.__setattr__(self, "values", vals)

    def mass(self) -> float:
        return float(np.sum(self.grid.weights * np.abs(self.values) ** 2))

    def norm(self) -> float:
        return math.sqrt(self.mass())

    def tail_mass(self, fraction: float = 0.1) -> float:
        m = self.grid.outer_mask(fraction)
        return float(np.sum(self.grid.weights[m] * np.abs(self.values[m]) ** 2))

    def tail_fraction(self, fraction: float = 0.1) -> float:
        total = self.mass()
        return self.tail_mass(fraction) / total if total > 0 else 0.0

    def with_values(self, values, label: str | None = None) -> "ComplexField":
        return ComplexField(self.grid, values, self.label if label is None else label)


def integrate(values, grid: Grid, region: str = "all", R: float | None = None):
    """Quadrature sum of ``values`` over ``region`` (all, ball(R), annulus(R))."""
    values = np.asarray(values)
    mask = grid.region_mask(region, R)
    return np.sum(grid.weights[mask] * values[mask])


def fourier_transform(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Continuum-normalized transform on the DFT frequency grid.

    Approximates ``f^(xi) = \\int e^{-2 pi i x.xi} f(x) dx`` at
    ``grid.frequencies`` (fftfreq ordering); the half-cell node offset is
    accounted for in the phase.
    """
    n = grid.n
    out = np.fft.fftn(values) * grid.h**n
    phase = sum(xi for xi in grid.frequencies) * grid.axis[0]
    return out * np.exp(-2j * np.pi * phase)


def inverse_fourier_transform(fhat: np.ndarray, grid: Grid) -> np.ndarray:
    phase = sum(xi for xi in grid.frequencies) * grid.axis[0]
    return np.fft.ifftn(fhat * np.exp(2j * np.pi * phase)) / grid.h**grid.n


def _wavenumbers(grid: Grid) -> np.ndarray:
    k = 2j * np.pi * np.fft.fftfreq(grid.N, d=grid.h)
    k[grid.N // 2] = 0.0  # Nyquist mode has no odd derivative
    return k


def gradient(u, grid: Grid | None = None) -> np.ndarray:
    """Spectral gradient on a periodic cartesian grid, shape ``(n, *u.shape)``.

    Leading batch axes (e.g. time) are allowed; the last n axes are spatial.
    """
    u, grid = _unpack(u, grid)
    if grid.mode != "cartesian":
        raise GridError("gradient needs a cartesian grid; use radial_derivative")
    k = _wavenumbers(grid)
    axes = tuple(range(-grid.n, 0))
    U = np.fft.fftn(u, axes=axes)
    out = []
    for ax in range(grid.n):
        shape = [1] * grid.n
        shape[ax] = grid.N
        out.append(np.fft.ifftn(U * k.reshape(shape), axes=axes))
    return np.stack(out)


def radial_derivative(u, grid: Grid | None = None) -> np.ndarray:
    """d u / d|x|.

    Cartesian: ``(x/|x|) . grad u`` (a node at the origin, which the grid never
    produces, would get 0).  Radial: second-order centered differences with an
    even reflection at r = 0 and u(L) = 0.
    """
    u, grid = _unpack(u, grid)
    if grid.mode == "cartesian":
        g = gradient(u, grid)
        r = grid.radius
        safe = np.where(r > 0, r, 1.0)
        out = sum(g[i] * grid.mesh[i] for i in range(grid.n)) / safe
        return np.where(r > 0, out, 0.0)
    h = grid.h
    padded = np.concatenate([u[..., :1], u, -u[..., -1:]], axis=-1)
    return (padded[..., 2:] - padded[..., :-2]) / (2 * h)


def angular_gradient_sq(u, grid: Grid | None = None) -> np.ndarray:
    """|grad_tau u|^2 = |grad u|^2 - |d_r u|^2, clamped at 0."""
    u, grid = _unpack(u, grid)
    if grid.mode == "radial":
        warnings.warn("angular gradient of radial data is identically zero", stacklevel=2)
        return np.zeros(np.shape(u))
    g = gradient(u, grid)
    full = np.sum(np.abs(g) ** 2, axis=0)
    rad = np.abs(radial_derivative(u, grid)) ** 2
    return np.maximum(full - rad, 0.0)


def grad_sq(u, grid: Grid | None = None) -> np.ndarray:
    """|grad u|^2 at every node (radial grids: |d_r u|^2)."""
    u, grid = _unpack(u, grid)
    if grid.mode == "radial":
        return np.abs(radial_derivative(u, grid)) ** 2
    return np.sum(np.abs(gradient(u, grid)) ** 2, axis=0)


def _unpack(u, grid):
    if isinstance(u, ComplexField):
        return u.values, u.grid
    if grid is None:
        raise TypeError("a grid is required for raw arrays")
    return np.asarray(u), grid
