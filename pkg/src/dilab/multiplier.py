"""Radial weights psi and the quantities built from them.

Every family is given in closed form through its first four radial
derivatives, from which the bilaplacian of a radial function on R^n follows:

    Delta^2 psi = psi'''' + 2(n-1) psi'''/r + (n-1)(n-3) (psi''/r^2 - psi'/r^3).

The integrated-bump family uses a quintic smoothstep, so psi is C^4 and the
formula above is exact away from the origin (and regular there, since psi is
quadratic near 0).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import ComplexField, Grid, GridError, angular_gradient_sq, gradient, radial_derivative

FAMILIES = ("abs", "smoothed_abs", "japanese_bracket", "bump_integrated", "rescaled", "constant")


class MultiplierError(ValueError):
    pass


def _smoothstep(s):
    """S(s) = 10 s^3 - 15 s^4 + 6 s^5 and its first two derivatives."""
    return (
        s**3 * (10 - 15 * s + 6 * s**2),
        30 * s**2 * (1 - s) ** 2,
        60 * s * (1 - s) * (1 - 2 * s),
    )


@dataclass(frozen=True)
class BumpProfile:
    """Even plateau bump: 1 on [0, plateau], 0 beyond edge, C^2 smoothstep in between."""

    k: int
    plateau: float = 1.0
    edge: float | None = None

    def __post_init__(self):
        if self.k < 1:
            raise MultiplierError("bump index k must be >= 1")
        if self.edge is None:
            object.__setattr__(self, "edge", (self.k + 1) / self.k * self.plateau)
        if not 0 < self.plateau < self.edge:
            raise MultiplierError("need 0 < plateau < edge")

    @property
    def width(self) -> float:
        return self.edge - self.plateau

    @property
    def integral(self) -> float:
        """int_0^inf h."""
        return self.plateau + 0.5 * self.width

    def _s(self, r):
        return np.clip((np.abs(r) - self.plateau) / self.width, 0.0, 1.0)

    def h(self, r):
        return 1.0 - _smoothstep(self._s(r))[0]

    def derivatives(self, r) -> tuple[np.ndarray, ...]:
        """(psi, psi', psi'', psi''', psi'''') for psi(r) = int_0^r (r - s) h(s) ds, r >= 0."""
        r = np.asarray(r, dtype=float)
        a, w = self.plateau, self.width
        s = self._s(r)
        S, dS, d2S = _smoothstep(s)
        inner = r <= a
        outer = r >= self.edge
        mid = ~inner & ~outer
        # antiderivatives of 1 - S: int_0^s = s - P1(s), twice: s^2/2 - P2(s)
        P1 = 2.5 * s**4 - 3 * s**5 + s**6
        P2 = 0.5 * s**5 - 0.5 * s**6 + s**7 / 7.0
        H_mid = a + w * (s - P1)
        psi_mid = 0.5 * a**2 + a * (r - a) + w**2 * (0.5 * s**2 - P2)
        psi_edge = 0.5 * a**2 + a * w + w**2 * (0.5 - 1 / 7.0)
        psi = np.where(inner, 0.5 * r**2, np.where(mid, psi_mid, psi_edge + self.integral * (r - self.edge)))
        d1 = np.where(inner, r, np.where(mid, H_mid, self.integral))
        d2 = 1.0 - S
        d3 = np.where(mid, -dS / w, 0.0)
        d4 = np.where(mid, -d2S / w**2, 0.0)
        return psi, d1, d2, d3, d4


def _smoothed_abs(r, eps):
    rho = np.sqrt(eps**2 + r**2)
    e2 = eps**2
    return rho, r / rho, e2 / rho**3, -3 * e2 * r / rho**5, 3 * e2 * (4 * r**2 - e2) / rho**7


def bilaplacian_radial(derivs, r, n: int) -> np.ndarray:
    _, d1, d2, d3, d4 = derivs
    return d4 + 2 * (n - 1) * d3 / r + (n - 1) * (n - 3) * (d2 / r**2 - d1 / r**3)


def _base_derivatives(family: str, params: dict, r: np.ndarray):
    """Closed-form derivatives and psi'(inf) for an unscaled family."""
    if family == "abs":
        z = np.zeros_like(r)
        return (r.copy(), np.ones_like(r), z, z, z), 1.0
    if family in ("smoothed_abs", "japanese_bracket"):
        eps = 1.0 if family == "japanese_bracket" else float(params["eps"])
        if eps <= 0:
            raise MultiplierError("eps must be positive")
        return _smoothed_abs(r, eps), 1.0
    if family == "bump_integrated":
        bump = BumpProfile(int(params["k"]), float(params.get("plateau", 1.0)), params.get("edge"))
        return bump.derivatives(r), bump.integral
    if family == "constant":
        z = np.zeros_like(r)
        return (np.full_like(r, float(params.get("value", 0.0))), z, z, z, z), 0.0
    raise MultiplierError(f"unknown multiplier family {family!r}")


@dataclass(frozen=True, eq=False)
class Multiplier:
    family: str
    params: dict
    grid: Grid
    psi: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray
    d4: np.ndarray
    bilap: np.ndarray
    dpsi_inf: float
    length_scale: float = 1.0
    flags: dict = field(default_factory=dict)

    @property
    def derivatives(self):
        return self.psi, self.d1, self.d2, self.d3, self.d4


def build_multiplier(family: str, params: dict | None, grid: Grid) -> Multiplier:
    """Sample psi and its derivatives at |x| on ``grid``.

    All families accept ``scale`` (psi -> scale * psi) and ``offset``
    (psi -> psi + offset).  ``rescaled`` takes ``base`` (a family name), ``R``,
    and the base family's parameters, and gives ``R psi_base(x/R)``.
    """
    params = dict(params or {})
    scale = float(params.get("scale", 1.0))
    offset = float(params.get("offset", 0.0))
    r = np.asarray(grid.radius, dtype=float)
    R = 1.0
    base = family
    if family == "rescaled":
        base = params.get("base")
        if base is None or base == "rescaled":
            raise MultiplierError("rescaled needs a non-rescaled base family")
        R = float(params.get("R", 0.0))
        if R <= 0:
            raise MultiplierError("rescaling radius R must be positive")
    if family not in FAMILIES:
        raise MultiplierError(f"unknown multiplier family {family!r}")
    if base == "bump_integrated" and int(params.get("k", 0)) < 1:
        raise MultiplierError("bump_integrated needs k >= 1")
    derivs, dinf = _base_derivatives(base, params, r / R)
    derivs = tuple(R ** (1 - j) * d for j, d in enumerate(derivs))
    derivs = (scale * derivs[0] + offset,) + tuple(scale * d for d in derivs[1:])
    dinf *= scale

    n = grid.n
    bilap = bilaplacian_radial(derivs, r, n)
    flags = {"closed_form": True, "distributional_at_origin": base == "abs" and n <= 3}
    if base == "constant":
        bilap = np.zeros_like(r)
    length = R
    if base == "bump_integrated":
        length *= BumpProfile(int(params["k"]), float(params.get("plateau", 1.0)), params.get("edge")).edge
    return Multiplier(family, params, grid, *derivs, bilap, float(dinf), length, flags)


def bilaplacian(multiplier: Multiplier, method: str = "closed_form", tail_start: float | None = None):
    """Delta^2 psi on the grid plus validity flags.

    ``method="finite_difference"`` differentiates the sampled psi numerically
    (used as an independent check of the closed forms).  For integrated bumps
    the tail beyond ``tail_start`` (default: twice the outer edge) is
    analysed: in n >= 4 it should be C/|x|^3 and the fitted C and exponent are
    reported; in n = 3 it should vanish.
    """
    m = multiplier
    grid = m.grid
    r = np.asarray(grid.radius, dtype=float)
    flags = dict(m.flags)
    if method == "closed_form":
        values = m.bilap.copy()
    elif method == "finite_difference":
        values = finite_difference_bilaplacian(m.psi, grid)
        flags["closed_form"] = False
    else:
        raise MultiplierError(f"unknown method {method!r}")
    if flags.get("distributional_at_origin"):
        flags["origin_note"] = "no pointwise value as r -> 0"

    base = m.params.get("base", m.family) if m.family == "rescaled" else m.family
    if base == "bump_integrated":
        start = 2.0 * m.length_scale if tail_start is None else tail_start
        tail = r >= start
        flags["tail_start"] = start
        if grid.n >= 4 and np.count_nonzero(tail) >= 2:
            rt = r[tail].ravel()
            vt = values[tail].ravel()
            slope, _ = np.polyfit(np.log(rt), np.log(np.abs(vt)), 1)
            flags["fitted_exponent"] = float(slope)
            flags["fitted_C"] = float(np.median(vt * rt**3))
        elif grid.n == 3 and np.any(tail):
            scale = max(float(np.max(np.abs(values))), 1e-300)
            flags["tail_max_abs"] = float(np.max(np.abs(values[tail])))
            flags["tail_vanishes"] = bool(flags["tail_max_abs"] <= 1e-10 * scale)
    return values, flags


def finite_difference_bilaplacian(psi: np.ndarray, grid: Grid) -> np.ndarray:
    """Delta^2 psi from sampled radial psi by repeated centered differences.

    Valid on radial grids and on 1-D cartesian grids; interior accuracy is
    second order, the two outermost nodes on each side are unreliable.
    """
    if grid.mode == "cartesian" and grid.n > 1:
        raise GridError("finite-difference bilaplacian needs radial or 1-D data")
    r = np.asarray(grid.axis, dtype=float)
    d = [np.asarray(psi, dtype=float)]
    for _ in range(4):
        d.append(np.gradient(d[-1], r, edge_order=2))
    if grid.mode == "cartesian":
        return d[4]
    return bilaplacian_radial(d, r, grid.n)


def hessian_form(multiplier: Multiplier, u) -> np.ndarray:
    """grad u^* . D^2 psi . grad u = psi'' |d_r u|^2 + (psi'/|x|) |grad_tau u|^2.

    ``u`` is a ComplexField or a raw array on the multiplier's grid (leading
    batch axes allowed).
    """
    grid = multiplier.grid
    if isinstance(u, ComplexField):
        if u.grid != grid:
            raise GridError("multiplier and field live on different grids")
        u = u.values
    radial = multiplier.d2 * np.abs(radial_derivative(u, grid)) ** 2
    if grid.mode == "radial" or grid.n == 1:
        return radial
    return radial + multiplier.d1 / grid.radius * angular_gradient_sq(u, grid)


def hessian_form_direct(multiplier: Multiplier, u) -> np.ndarray:
    """Same quantity by contracting the full Hessian of psi with grad u (cartesian only)."""
    grid = multiplier.grid
    if grid.mode != "cartesian":
        raise GridError("direct Hessian contraction needs a cartesian grid")
    g = gradient(u)
    r = grid.radius
    x = grid.mesh
    out = np.zeros(grid.shape)
    for i in range(grid.n):
        for j in range(grid.n):
            proj = x[i] * x[j] / r**2
            D = multiplier.d2 * proj + multiplier.d1 / r * ((i == j) - proj)
            out += np.real(np.conj(g[i]) * D * g[j])
    return out


def coefficient_centrifugal(n: int) -> float:
    """(n-1)(n-3)/4, the weight of |u|^2/|x|^3 in the Morawetz identity for psi = |x|."""
    return (n - 1) * (n - 3) / 4.0


def bump_integral_ladder(ks) -> list[float]:
    return [BumpProfile(int(k)).integral for k in ks]


__all__ = [
    "BumpProfile",
    "Multiplier",
    "MultiplierError",
    "bilaplacian",
    "bilaplacian_radial",
    "build_multiplier",
    "bump_integral_ladder",
    "coefficient_centrifugal",
    "finite_difference_bilaplacian",
    "hessian_form",
    "hessian_form_direct",
]
