"""Free asymptotics and wave operators.

With ``u_t = i H u`` and the 2 pi Fourier convention, stationary phase gives
for the free flow at any ``t != 0``

    e^{it Delta} f (x) ~ e^{i sgn(t) n pi/4} (4 pi |t|)^{-n/2} e^{-i|x|^2/(4t)} f^(-x/(4 pi t)).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .functionals import TailMassError, trajectory
from .grid import ComplexField, Grid, GridError, fourier_transform
from .spectral import FOURIER, SpectralOperator, perturbed_sobolev_norm, propagate_free


class HypothesisError(ValueError):
    """A potential hypothesis needed by the operation is not certified."""


def fourier_at(f: ComplexField, points) -> np.ndarray:
    """Trigonometric (band-limited) evaluation of f^ on a tensor grid of frequencies.

    ``points`` holds one 1-D frequency array per axis; the result has shape
    ``tuple(len(p) for p in points)``.
    """
    grid = f.grid
    out = f.values
    for ax, xi in enumerate(points):
        E = grid.h * np.exp(-2j * np.pi * np.outer(np.asarray(xi, dtype=float), grid.axis))
        out = np.moveaxis(np.tensordot(E, np.moveaxis(out, ax, 0), axes=(1, 0)), 0, ax)
    return out


def asymptotic_profile(f: ComplexField, t: float) -> ComplexField:
    if t == 0:
        raise ValueError("the asymptotic profile needs t != 0")
    grid = f.grid
    if grid.mode != "cartesian":
        raise GridError("asymptotic profile needs a cartesian grid")
    n = grid.n
    eta = -grid.axis / (4 * np.pi * t)
    fhat = fourier_at(f, [eta] * n)
    r2 = grid.radius**2
    amp = np.exp(1j * np.sign(t) * n * np.pi / 4) * (4 * np.pi * abs(t)) ** (-n / 2)
    return f.with_values(amp * np.exp(-1j * r2 / (4 * t)) * fhat, label=f"profile t={t:g}")


def profile_error(f: ComplexField, t: float) -> float:
    """|| e^{it Delta} f - profile(t) ||."""
    u = propagate_free(f.grid, f, t)
    return u.with_values(u.values - asymptotic_profile(f, t).values).norm()


@dataclass(frozen=True, eq=False)
class ScatteringState:
    f: ComplexField
    sign: int
    T_list: tuple
    approximations: tuple
    history: tuple
    worst_tail: float
    meta: dict = field(default_factory=dict)

    @property
    def T(self) -> float:
        return self.T_list[-1]

    @property
    def W(self) -> ComplexField:
        return self.approximations[-1]

    @property
    def g(self) -> np.ndarray:
        """F[W f] on the DFT frequency grid."""
        return fourier_transform(self.W.values, self.W.grid)


def wave_operator(
    op: SpectralOperator,
    f: ComplexField,
    sign: int,
    T_list,
    tail_threshold: float = 1e-6,
    checkpoints: int = 32,
) -> ScatteringState:
    """Moller approximations W_T f = e^{-i sT Delta} e^{i sT Delta_V} f, s = sign.

    The perturbed evolution is checked against the tail threshold at
    ``checkpoints`` equally spaced times on every leg.
    """
    hyp = op.potential.hypotheses
    if hyp is None or not hyp.sr0:
        raise HypothesisError("the short-range hypothesis is not certified for this potential")
    grid = op.grid
    if grid.mode != "cartesian":
        raise GridError("wave operators need a cartesian grid")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    T_list = tuple(float(T) for T in T_list)
    if not T_list or any(b <= a for a, b in zip(T_list, T_list[1:])) or T_list[0] <= 0:
        raise ValueError("T_list must be positive and increasing")
    worst = 0.0
    approx = []
    for T in T_list:
        times = np.linspace(0.0, T, checkpoints + 1) * sign
        traj = trajectory(op, f, np.sort(times))
        tails = traj.tail_fractions()
        worst = max(worst, float(tails.max()))
        if tails.max() > tail_threshold:
            j = int(np.argmax(tails))
            raise TailMassError(
                f"tail-mass breach during wave-operator leg T={T:g}: {tails[j]:.3e} at t={traj.times[j]:g}",
                float(tails[j]),
                float(traj.times[j]),
            )
        v = traj.field(int(np.argmax(np.abs(traj.times))))
        back = propagate_free(grid, v, -sign * T)
        approx.append(back.with_values(back.values, label=f"W_{T:g} f"))
    history = tuple(approx[k + 1].with_values(approx[k + 1].values - approx[k].values).norm() for k in range(len(approx) - 1))
    return ScatteringState(f, sign, T_list, tuple(approx), history, worst)


def free_weight(w: ComplexField) -> float:
    """2 pi \\int |xi| |w^(xi)|^2 d xi."""
    return 2 * np.pi * FOURIER.sobolev_norm_sq(w, 0.5)


def scattering_weight(state: ScatteringState, op: SpectralOperator) -> dict:
    """Both sides of ||f||^2_{H^{1/2}_V} = 2 pi \\int |xi| |g(xi)|^2 d xi at every T of the state."""
    target = perturbed_sobolev_norm(op, state.f, 0.5) ** 2
    weights = [free_weight(w) for w in state.approximations]
    residuals = [abs(w - target) / (abs(target) + 1e-14) for w in weights]
    return {
        "weight": weights[-1],
        "target": target,
        "residual": residuals[-1],
        "weights": weights,
        "residuals": residuals,
        "T": list(state.T_list),
    }


def annulus_leakage(f: ComplexField, t: float, xi_lo: float, xi_hi: float) -> float:
    """Fraction of profile mass outside the region where |x|/(4 pi |t|) lies in [xi_lo, xi_hi]."""
    prof = asymptotic_profile(f, t)
    grid: Grid = f.grid
    s = grid.radius / (4 * np.pi * abs(t))
    outside = (s < xi_lo) | (s > xi_hi)
    dens = grid.weights * np.abs(prof.values) ** 2
    return float(np.sum(dens[outside]) / np.sum(dens))
