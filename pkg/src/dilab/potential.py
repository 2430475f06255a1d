"""Radial potential families and grid-certified hypothesis checks."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid

SR0_EXPONENTS = (0.25, 0.5, 1.0, 2.0)

# family -> (required params, optional params with defaults)
FAMILIES: dict[str, tuple[tuple[str, ...], dict[str, float]]] = {
    "zero": ((), {}),
    "inverse_power": (("c",), {"p": 1.0}),
    "gaussian_bump": (("a",), {"sigma": 1.0}),
    "compact_bump": (("a",), {"R": 1.0}),
}


class PotentialError(ValueError):
    pass


@dataclass(frozen=True)
class Hypotheses:
    """Which potential hypotheses hold on the sampled grid, and with what constants."""

    sr0: bool
    sr0_C: float
    sr0_eps: float | None
    decay: bool
    new: bool
    rageweak: bool
    tol: float

    def as_dict(self) -> dict:
        return {
            "sr0": self.sr0,
            "sr0_C": self.sr0_C,
            "sr0_eps": self.sr0_eps,
            "decay": self.decay,
            "new": self.new,
            "rageweak": self.rageweak,
            "tol": self.tol,
        }


@dataclass(frozen=True)
class Potential:
    grid: Grid
    V: np.ndarray
    dV: np.ndarray
    family: str
    params: dict = field(default_factory=dict)
    hypotheses: Hypotheses | None = None


def radial_profile(family: str, params: dict, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """V(r) and dV/dr for a built-in family."""
    r = np.asarray(r, dtype=float)
    if family == "zero":
        return np.zeros_like(r), np.zeros_like(r)
    if family == "inverse_power":
        c, p = params["c"], params["p"]
        base = 1.0 + r**2
        return c * base**-p, -2.0 * p * c * r * base ** (-p - 1.0)
    if family == "gaussian_bump":
        a, s = params["a"], params["sigma"]
        V = a * np.exp(-(r**2) / s**2)
        return V, -2.0 * r / s**2 * V
    if family == "compact_bump":
        a, R = params["a"], params["R"]
        s = r / R
        inside = s < 1.0
        q = np.where(inside, 1.0 - s**2, 1.0)
        V = np.where(inside, a * np.exp(1.0 - 1.0 / q), 0.0)
        dV = np.where(inside, V * (-2.0 * s / (R * q**2)), 0.0)
        return V, dV
    raise PotentialError(f"unknown potential family {family!r}")


def check_params(family: str, params: dict) -> dict:
    if family not in FAMILIES:
        raise PotentialError(f"unknown potential family {family!r}")
    required, optional = FAMILIES[family]
    unknown = set(params) - set(required) - set(optional)
    if unknown:
        raise PotentialError(f"unknown parameters for {family}: {sorted(unknown)}")
    missing = [k for k in required if k not in params]
    if missing:
        raise PotentialError(f"missing parameters for {family}: {missing}")
    full = {**optional, **{k: float(v) for k, v in params.items()}}
    for amp in ("c", "a"):
        if amp in full and full[amp] < 0:
            raise PotentialError(f"negative amplitude {amp}={full[amp]}")
    if family == "inverse_power" and full["p"] < 1:
        raise PotentialError("inverse_power needs p >= 1")
    for width in ("sigma", "R"):
        if width in full and full[width] <= 0:
            raise PotentialError(f"{width} must be positive")
    return full


def sample_potential(family: str, params: dict | None, grid: Grid, tol: float = 1e-2) -> Potential:
    params = check_params(family, dict(params or {}))
    V, dV = radial_profile(family, params, grid.radius)
    pot = Potential(grid, V, dV, family, params)
    return Potential(grid, V, dV, family, params, validate_assumptions(pot, tol))


def _outer_quartile(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Radii and a sort order for the outer 25% of nodes."""
    r = grid.radius.ravel()
    mask = r >= 0.75 * grid.L
    idx = np.flatnonzero(mask)
    order = idx[np.argsort(r[idx], kind="stable")]
    return r[order], order


def _trending_down(values: np.ndarray, rel: float = 1e-9) -> bool:
    """Last value no larger than the first (up to ``rel``), i.e. not growing outward."""
    if values.size < 2:
        return True
    scale = max(np.max(np.abs(values)), 1e-300)
    return bool(values[-1] <= values[0] + rel * scale)


def validate_assumptions(potential: Potential, tol: float = 1e-2) -> Hypotheses:
    """Certify the short-range, monotone-decay and virial-decay hypotheses on the grid.

    * sr0: V >= 0 and, for some exponent eps in ``SR0_EXPONENTS``,
      ``V (1 + |x|)^{1+eps}`` stays bounded (does not grow over the outer
      quartile).  The largest admissible exponent is recorded, with the
      smallest constant C that works for it (the sup of the weighted profile).
    * decay: ``dV <= 0`` at every node (up to roundoff).
    * new: ``|x| |dV|`` is below ``tol`` on the outer quartile and not growing.
    * rageweak: ``V`` and ``|x| |dV|`` are both below ``tol`` and not growing
      on the outer quartile.
    """
    grid = potential.grid
    V = potential.V.ravel()
    dV = potential.dV.ravel()
    r = grid.radius.ravel()
    _, outer = _outer_quartile(grid)

    sr0, best_C, best_eps = False, np.inf, None
    if np.all(V >= 0):
        if not np.any(V > 0):
            sr0, best_C = True, 0.0
        else:
            for eps in SR0_EXPONENTS:
                weighted = V * (1.0 + r) ** (1.0 + eps)
                if not _trending_down(weighted[outer]):
                    continue
                sr0, best_C, best_eps = True, float(np.max(weighted)), eps
    if not sr0:
        best_C = float("nan")

    dscale = float(np.max(np.abs(dV))) if dV.size else 0.0
    decay = bool(np.all(dV <= 1e-12 * dscale))

    virial = r * np.abs(dV)
    new = bool(np.all(virial[outer] <= tol) and _trending_down(virial[outer]))
    rageweak = bool(new and np.all(np.abs(V[outer]) <= tol) and _trending_down(np.abs(V[outer])))

    return Hypotheses(sr0, best_C, best_eps, decay, new, rageweak, tol)
