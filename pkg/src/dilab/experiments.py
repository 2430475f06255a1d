"""Named verification studies.  Each takes a validated config and returns an ExperimentReport."""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import ConfigError, ExperimentConfig
from .functionals import (
    TailMassError,
    Trajectory,
    ball_time_integrals,
    bilinear_form_a,
    bilinear_ratio,
    centered_flux_G,
    check_tail,
    dispersive_defect,
    identity_integrand,
    inverse_radius_mass,
    local_smoothing_ratio,
    local_smoothing_ratio_n3,
    phase_corrected_gradient,
    pseudoconformal_ledger,
    rage_time_average,
    virial_flux,
    weighted_mass,
    weighted_observable,
)
from .grid import ComplexField, Grid, GridError, build_grid, radial_derivative
from .multiplier import BumpProfile, MultiplierError, build_multiplier, coefficient_centrifugal
from .potential import PotentialError, check_params, sample_potential
from .report import ExperimentReport, fit_order, trend
from .scattering import asymptotic_profile, scattering_weight, wave_operator
from .spectral import (
    FOURIER,
    _free_phase,
    assemble_hamiltonian,
    energy_form,
    perturbed_sobolev_norm,
    propagate_splitstep,
    step_exact,
)

DENOM_FLOOR = 1e-14


# ---------------------------------------------------------------- helpers


def job_pool_size() -> int:
    try:
        return max(1, int(os.environ.get("DILAB_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Ordered map over sweep points, using up to DILAB_THREADS worker threads."""
    items = list(items)
    workers = min(job_pool_size(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def rel(a, b) -> float:
    return abs(a - b) / (abs(a) + abs(b) + DENOM_FLOOR)


def time_grid(t0: float, t1: float, step: float) -> np.ndarray:
    count = max(1, int(math.ceil((t1 - t0) / step - 1e-9)))
    return np.linspace(t0, t1, count + 1)


def make_grid(cfg: ExperimentConfig, N: int | None = None, n: int | None = None) -> Grid:
    g = cfg.grid
    return build_grid(g.mode, g.n if n is None else n, g.L, g.N if N is None else N)


def make_potential(cfg: ExperimentConfig, grid: Grid, free: bool = False):
    if free:
        return sample_potential("zero", {}, grid)
    return sample_potential(cfg.potential.family, cfg.potential.params, grid)


def make_multiplier(cfg: ExperimentConfig, grid: Grid, **override):
    params = {**cfg.multiplier.params, **override}
    family = params.pop("family", cfg.multiplier.family)
    return build_multiplier(family, params, grid)


def initial_data(cfg: ExperimentConfig, grid: Grid) -> ComplexField:
    """Gaussian (optionally tilted, boosted, shifted along the first axis) or a smooth compact bump."""
    p = cfg.data.params
    fam = cfg.data.family
    r = grid.radius
    if fam == "gaussian":
        sigma = float(p.get("sigma", 1.0))
        tilt, mom, ctr = (float(p.get(k, 0.0)) for k in ("tilt", "momentum", "center"))
        if grid.mode == "radial":
            if tilt or mom or ctr:
                raise ConfigError("radial grids need radial data: tilt, momentum and center must be 0")
            vals = np.exp(-(r**2) / (2 * sigma**2)).astype(complex)
        else:
            x1 = grid.mesh[0]
            r2 = r**2 - x1**2 + (x1 - ctr) ** 2
            vals = np.exp(-r2 / (2 * sigma**2)) * (1 + tilt * x1) * np.exp(2j * np.pi * mom * x1)
    elif fam == "bump":
        rho = float(p.get("radius", 1.0))
        q = np.clip(1 - (r / rho) ** 2, 0.0, None)
        vals = np.where(q > 0, np.exp(1 - 1 / np.where(q > 0, q, 1.0)), 0.0).astype(complex)
    else:
        raise ConfigError(f"data family {fam!r} does not define a single initial state")
    f = ComplexField(grid, vals, label="f")
    if p.get("normalize", fam == "bump"):
        f = f.with_values(f.values / f.norm())
    return f


class Evolver:
    """Exact evolution: Fourier multiplier for free cartesian problems, eigen-synthesis otherwise."""

    def __init__(self, grid: Grid, potential, tail: float | None = None, fraction: float = 0.1):
        self.grid = grid
        self.potential = potential
        self.tail = tail
        self.fraction = fraction
        self.free = grid.mode == "cartesian" and not np.any(potential.V)
        self._op = None

    @property
    def op(self):
        if self._op is None:
            self._op = assemble_hamiltonian(self.grid, self.potential)
        return self._op

    def trajectory(self, f: ComplexField, times, check: bool = True) -> Trajectory:
        times = np.asarray(times, dtype=float)
        if self.free:
            axes = tuple(range(-self.grid.n, 0))
            F = np.fft.fftn(f.values)
            vals = np.stack([np.fft.ifftn(_free_phase(self.grid, t) * F, axes=axes) for t in times])
            traj = Trajectory(self.grid, times, vals, "fourier")
        else:
            from .functionals import trajectory

            traj = trajectory(self.op, f, times)
        traj.values[times == 0] = f.values  # exact identity at t = 0
        if check and self.tail is not None:
            check_tail(traj, self.tail, self.fraction)
        return traj

    def at(self, f: ComplexField, t: float, check: bool = True) -> ComplexField:
        return self.trajectory(f, [t], check).field(0)


def _extrapolate_zero(xs, ys) -> float:
    """Value at x = 0 of the least-squares line through (xs, ys)."""
    if len(xs) == 1:
        return float(ys[0])
    slope, icpt = np.polyfit(np.asarray(xs, float), np.asarray(ys, float), 1)
    return float(icpt)


# ---------------------------------------------------------------- studies


def conservation_study(cfg: ExperimentConfig, rep: ExperimentReport):
    s, tol = cfg.sweep, cfg.tolerances
    grid = make_grid(cfg)
    pot = make_potential(cfg, grid)
    f = initial_data(cfg, grid)
    op = assemble_hamiltonian(grid, pot)
    dt, steps = s.time_step, s.steps
    every = max(1, steps // 100)
    times, snaps = step_exact(op, f, dt, steps, every)
    traj = Trajectory(grid, times, snaps, "exact-stepped")
    check_tail(traj, tol.tail_mass, tol.tail_fraction)
    m0 = f.mass()
    masses = np.array([u.mass() for u in traj.fields()])
    energies = np.array([energy_form(u, pot) for u in traj.fields()])
    halfs = np.array([perturbed_sobolev_norm(op, u, 0.5) for u in traj.fields()])
    exact_drift = float(np.max(np.abs(masses / m0 - 1)))
    energy_drift = float(np.max(np.abs(energies / energies[0] - 1)))
    half_drift = float(np.max(np.abs(halfs / halfs[0] - 1)))
    rep.add_series("exact_mass", "t", times, masses / m0 - 1)
    rep.add_series("energy", "t", times, energies)
    rep.add_series("half_norm", "t", times, halfs)
    rep.scalars.update(exact_mass_drift=exact_drift, energy_drift=energy_drift, half_norm_drift=half_drift, steps=steps)
    rep.check("exact propagator mass drift", exact_drift, tol.unitarity_exact)
    rep.check("energy form drift", energy_drift, tol.energy)
    rep.check("H^1/2_V norm drift", half_drift, tol.energy)

    if grid.mode == "cartesian":
        u = f
        split_mass = [0.0]
        chunk = every * dt
        for _ in range(steps // every):
            u = propagate_splitstep(grid, pot, u, chunk, dt)
            split_mass.append(u.mass() / m0 - 1)
        split_drift = float(np.max(np.abs(split_mass)))
        rep.scalars["split_mass_drift"] = split_drift
        rep.check("split-step mass drift", split_drift, tol.unitarity_split)
        if s.dt:
            tf = s.t_final
            ref = op.synthesize(np.exp(1j * op.eigenvalues * tf) * op.coefficients(f))
            errs = parallel_map(
                lambda d: float(np.sqrt(np.sum(grid.weights * np.abs(propagate_splitstep(grid, pot, f, tf, d).values - ref) ** 2))),
                s.dt,
            )
            rep.add_series("splitstep_error", "dt", s.dt, errs)
            rep.scalars["error"] = errs[-1]
            if len(s.dt) >= 2:
                fit = fit_order(s.dt, errs)
                rep.scalars["splitstep_order"] = fit
                rep.check("split-step order", abs(fit["order"] - tol.order_target), tol.order,
                          detail=f"fitted {fit['order']:.3f}, target {tol.order_target}")
    rep.scalars.setdefault("error", exact_drift)


def _identity_sides(evo: Evolver, f, mult, pot, T: float, step: float):
    traj = evo.trajectory(f, time_grid(-T, T, step))
    lhs = traj.time_integral(identity_integrand(traj, mult, pot))
    rhs = -0.5 * (virial_flux(traj.field(len(traj) - 1), mult) - virial_flux(traj.field(0), mult))
    return lhs, rhs, traj.worst_tail


def finite_T_identity(cfg: ExperimentConfig, rep: ExperimentReport):
    s, tol = cfg.sweep, cfg.tolerances

    def at_N(N):
        grid = make_grid(cfg, N=N)
        pot = make_potential(cfg, grid)
        evo = Evolver(grid, pot, tol.tail_mass, tol.tail_fraction)
        f = initial_data(cfg, grid)
        mult = make_multiplier(cfg, grid)
        return [_identity_sides(evo, f, mult, pot, T, s.cfl * grid.h) for T in s.T]

    primary = at_N(cfg.grid.N)
    res = []
    for T, (lhs, rhs, tail) in zip(s.T, primary):
        res.append(rel(lhs, rhs))
        rep.scalars[f"T={T:g}"] = {"lhs": lhs, "rhs": rhs, "residual": res[-1], "worst_tail": tail}
    rep.add_series("identity_residual", "T", s.T, res)
    rep.scalars["residual"] = rep.scalars["error"] = res[-1]
    rep.check("finite-T identity residual", max(res), tol.residual)
    if s.N and len(s.N) >= 2:
        ladder = parallel_map(at_N, s.N)
        errs = [rel(x[-1][0], x[-1][1]) for x in ladder]
        steps = [2 * cfg.grid.L / N if cfg.grid.mode == "cartesian" else cfg.grid.L / N for N in s.N]
        fit = fit_order(steps, errs)
        rep.add_series("identity_residual_vs_N", "N", s.N, errs)
        rep.scalars["order_fit"] = fit
        rep.check("identity convergence order", abs(fit["order"] - tol.order_target), tol.order,
                  detail=f"fitted {fit['order']:.3f} (R2 {fit['r2']:.4f}), target {tol.order_target}")
    rep.notes.append("time step tied to the spatial step (dt = cfl * h); the N ladder refines space and time together")


def pseudoconformal_study(cfg: ExperimentConfig, rep: ExperimentReport):
    s, tol = cfg.sweep, cfg.tolerances
    T = s.T[-1]

    def at_N(N, free=False):
        grid = make_grid(cfg, N=N)
        pot = make_potential(cfg, grid, free=free)
        evo = Evolver(grid, pot, tol.tail_mass, tol.tail_fraction)
        traj = evo.trajectory(initial_data(cfg, grid), time_grid(0.0, T, s.cfl * grid.h))
        return pseudoconformal_ledger(traj, pot)

    led = at_N(cfg.grid.N)
    resid = float(np.max(led.relative_residual))
    t = led.lhs.times
    for ts in (led.lhs, led.rhs, led.residual, led.theta):
        rep.add_series(f"pseudoconformal_{ts.name}", "t", t, ts.values)
    rep.add_series("dispersive_defect", "t", t[1:], led.defect.values[1:])
    rep.scalars["residual"] = rep.scalars["error"] = resid
    rep.check("pseudoconformal residual", resid, tol.residual)

    free = at_N(cfg.grid.N, free=True)
    theta_max = float(np.max(np.abs(free.theta.values)))
    drift = float(np.max(np.abs(free.lhs.values / free.lhs.values[0] - 1)))
    rep.scalars.update(free_theta_max=theta_max, free_lhs_drift=drift)
    rep.check("free control: theta", theta_max, 0.0, "<=")
    rep.check("free control: ||xu - 2it grad u||^2 drift", drift, tol.residual)
    if s.N and len(s.N) >= 2:
        ladder = parallel_map(at_N, s.N)
        errs = [float(np.max(x.relative_residual)) for x in ladder]
        steps = [2 * cfg.grid.L / N if cfg.grid.mode == "cartesian" else cfg.grid.L / N for N in s.N]
        fit = fit_order(steps, errs)
        rep.add_series("pseudoconformal_residual_vs_N", "N", s.N, errs)
        rep.scalars["order_fit"] = fit
        rep.check("pseudoconformal convergence order", abs(fit["order"] - tol.order_target), tol.order,
                  detail=f"fitted {fit['order']:.3f}, target {tol.order_target}")


def scattering_study(cfg: ExperimentConfig, rep: ExperimentReport):
    s, tol = cfg.sweep, cfg.tolerances
    grid = make_grid(cfg)
    f = initial_data(cfg, grid)
    free_op = assemble_hamiltonian(grid, make_potential(cfg, grid, free=True))
    lhs0 = perturbed_sobolev_norm(free_op, f, 0.5) ** 2
    rhs0 = 2 * np.pi * FOURIER.sobolev_norm_sq(f, 0.5)
    conv = abs(lhs0 - rhs0) / (abs(rhs0) + DENOM_FLOOR)
    rep.scalars["convention_residual"] = conv
    rep.check("free convention check", conv, tol.convention)

    pot = make_potential(cfg, grid)
    op = free_op if not np.any(pot.V) else assemble_hamiltonian(grid, pot)
    rep.scalars["hypotheses"] = pot.hypotheses.as_dict()
    state = wave_operator(op, f, +1, s.T, tol.tail_mass)
    sw = scattering_weight(state, op)
    iso = max(abs(w.norm() / f.norm() - 1) for w in state.approximations)
    rep.add_series("scattering_residual", "T", s.T, sw["residuals"])
    rep.add_series("scattering_weight", "T", s.T, sw["weights"])
    if state.history:
        rep.add_series("moller_increment", "T", s.T[1:], state.history)
    rep.scalars.update(target=sw["target"], weight=sw["weight"], residual=sw["residual"], error=sw["residual"],
                       isometry_defect=iso, worst_tail=state.worst_tail)
    rep.trends["residual_vs_T"] = trend(sw["residuals"], "decreasing")
    rep.check("scattering residual at largest T", sw["residual"], tol.residual)
    rep.check_flag("residual strictly decreasing in T", rep.trends["residual_vs_T"]["monotone"])
    rep.check("wave operator isometry", iso, tol.convention)


def dispersive_limits_study(cfg: ExperimentConfig, rep: ExperimentReport):
    s, tol = cfg.sweep, cfg.tolerances
    grid = make_grid(cfg)
    pot = make_potential(cfg, grid)
    evo = Evolver(grid, pot, tol.tail_mass, tol.tail_fraction)
    f = initial_data(cfg, grid)
    times = np.asarray(s.times, dtype=float)
    if np.any(times <= 0):
        raise ConfigError("dispersive limits need strictly positive sample times")
    target = perturbed_sobolev_norm(evo.op, f, 0.5) ** 2 if not evo.free else 2 * np.pi * FOURIER.sobolev_norm_sq(f, 0.5)
    traj = evo.trajectory(f, np.concatenate([[0.0], times]))
    defect = np.array([dispersive_defect(traj.field(j), t) for j, t in enumerate(traj.times) if t > 0])
    G = centered_flux_G(traj)[1:]
    wm = weighted_mass(traj)
    wm_t = wm[1:] / times
    famboc = (wm[1:] - wm[0]) / ((1 + times) * target)
    # d/dt of the weighted mass by a centered difference, against G
    delta = 1e-3
    side = evo.trajectory(f, np.sort(np.concatenate([times - delta, times + delta])), check=False)
    wms = weighted_mass(side)
    dwm = (wms[1::2] - wms[0::2]) / (2 * delta)
    virial_err = float(np.max(np.abs(dwm - G) / (np.abs(G) + DENOM_FLOOR)))

    rep.add_series("dispersive_defect", "t", times, defect)
    rep.add_series("G", "t", times, G)
    rep.add_series("weighted_mass_over_t", "t", times, wm_t)
    rep.add_series("famboc_C", "t", times, famboc)
    ratio = defect[-1] / defect[0]
    G_gap = abs(G[-1] / (2 * target) - 1)
    m_gap = abs(wm_t[-1] / (2 * target) - 1)
    C = float(np.max(famboc))
    rep.scalars.update(target=target, defect_ratio=ratio, G_gap=G_gap, mass_gap=m_gap, famboc_C=C,
                       virial_derivative_residual=virial_err, error=G_gap)
    rep.trends["defect"] = trend(defect, "decreasing")
    rep.check("defect(t_last)/defect(t_first)", ratio, tol.decay_ratio * (1 + tol.roundoff),
              detail=f"threshold {tol.decay_ratio} with relative roundoff slack {tol.roundoff}")
    rep.check_flag("defect strictly decreasing", rep.trends["defect"]["monotone"])
    rep.check("|G/(2||f||^2) - 1| at t_last", G_gap, tol.limit_gap)
    rep.check("|wm/(2t||f||^2) - 1| at t_last", m_gap, tol.limit_gap)
    rep.check("weighted-mass growth constant C", C, tol.famboc_C)
    rep.check("d/dt weighted mass vs G", virial_err, tol.residual)
    if grid.mode == "cartesian":
        perr = [traj.field(j).with_values(traj.values[j] - asymptotic_profile(f, t).values).norm()
                for j, t in enumerate(traj.times) if t > 0]
        rep.add_series("profile_error", "t", times, perr)
        rep.trends["profile_error"] = trend(perr, "decreasing")


def vai_limit_study(cfg: ExperimentConfig, rep: ExperimentReport):
    s, tol = cfg.sweep, cfg.tolerances
    grid = make_grid(cfg)
    pot = make_potential(cfg, grid)
    evo = Evolver(grid, pot, tol.tail_mass, tol.tail_fraction)
    f = initial_data(cfg, grid)
    mult = make_multiplier(cfg, grid)
    target = mult.dpsi_inf * (perturbed_sobolev_norm(evo.op, f, 0.5) ** 2 if not evo.free
                              else 2 * np.pi * FOURIER.sobolev_norm_sq(f, 0.5))
    step = s.time_step or s.cfl * grid.h
    out = []
    for T in s.T:
        lhs, rhs, _ = _identity_sides(evo, f, mult, pot, T, step)
        out.append((lhs, rhs))
    lhs = [a for a, _ in out]
    gaps = [abs(a - target) / (abs(target) + DENOM_FLOOR) for a in lhs]
    rep.add_series("vai_lhs", "T", s.T, lhs)
    rep.add_series("vai_boundary", "T", s.T, [b for _, b in out])
    rep.add_series("vai_gap", "T", s.T, gaps)
    rep.scalars.update(target=target, gap=gaps[-1], error=gaps[-1], dpsi_inf=mult.dpsi_inf)
    if target == 0:
        rep.check("LHS(T) with psi'(inf) = 0", max(abs(a) for a in lhs), tol.limit_gap)
        return
    rep.trends["gap"] = trend(gaps, "decreasing", strict=False)
    rep.check("gap to psi'(inf) ||f||^2 at largest T", gaps[-1], tol.limit_gap)
    rep.check_flag("gap at largest T below gap at smallest T", gaps[-1] < gaps[0] or len(gaps) == 1)


def morawetz_study(cfg: ExperimentConfig, rep: ExperimentReport):
    s, tol = cfg.sweep, cfg.tolerances
    grid = make_grid(cfg)
    if grid.mode != "radial":
        raise ConfigError("morawetz_study runs on radial grids")
    pot = make_potential(cfg, grid)
    evo = Evolver(grid, pot, tol.tail_mass, tol.tail_fraction)
    f = initial_data(cfg, grid)
    target = perturbed_sobolev_norm(evo.op, f, 0.5) ** 2
    T = s.T[-1]
    traj = evo.trajectory(f, time_grid(-T, T, s.time_step))
    n = grid.n
    vals = []
    for eps in s.eps:
        m = build_multiplier("smoothed_abs", {"eps": eps}, grid)
        vals.append(traj.time_integral(identity_integrand(traj, m, pot)))
    extrap = _extrapolate_zero(s.eps, vals)
    rep.add_series("morawetz_lhs", "eps", s.eps, vals)
    dens = np.abs(traj.values) ** 2
    r = grid.radius
    pot_term = traj.time_integral(np.sum(grid.weights * (-0.5 * pot.dV) * dens, axis=1))
    if n >= 4:
        direct = coefficient_centrifugal(n) * traj.time_integral(np.sum(grid.weights * dens / r**3, axis=1)) + pot_term
    else:
        # -Delta^2 |x| = 6 pi delta in R^3; the origin value is read from the innermost shell
        central = 1.5 * np.pi * traj.time_integral(dens[:, 0])
        direct = central + pot_term
        rep.scalars["central_term"] = central
    gap = abs(extrap / target - 1)
    rep.scalars.update(target=target, extrapolated=extrap, direct_abs=direct, gap=gap, error=gap,
                       direct_gap=abs(direct / target - 1))
    rep.check("eps-extrapolated Morawetz LHS vs ||f||^2", gap, tol.limit_gap)

    # coefficient (n-1)(n-3)/4: arithmetic and the value assembled into the radial operator
    coeff_ok = True
    for dim in (3, 4, 5):
        expect = (dim - 1) * (dim - 3) / 4
        g = build_grid("radial", dim, 10.0, 32)
        Hm = assemble_hamiltonian(g, sample_potential("zero", {}, g)).matrix
        assembled = (Hm[5, 5] - 2 / g.h**2) * g.axis[5] ** 2
        ok = coefficient_centrifugal(dim) == expect and abs(assembled - expect) <= 1e-9 * max(1.0, expect)
        rep.scalars[f"centrifugal_n{dim}"] = assembled
        coeff_ok &= ok
    rep.check_flag("centrifugal coefficient (n-1)(n-3)/4 for n = 3, 4, 5", coeff_ok)

    # bounded space-time norms: partial integrals over growing windows
    windows = [T / 4, T / 2, T]
    t = traj.times

    def window_integral(weight, W):
        sel = np.abs(t) <= W + 1e-12
        sub = Trajectory(grid, t[sel], traj.values[sel])
        return sub.time_integral(np.sum(grid.weights * weight * np.abs(sub.values) ** 2, axis=1))

    bracket = [window_integral((1 + r**2) ** -1.5, W) for W in windows]
    dv = [window_integral(np.abs(pot.dV), W) for W in windows]
    rep.add_series("bracket_cubed_norm", "T", windows, bracket)
    rep.add_series("dV_norm", "T", windows, dv)
    rep.trends["bracket_increments"] = trend(np.diff([0.0] + bracket), "decreasing", strict=False)

    if s.R:
        uno, due = [], []
        for R in s.R:
            m = build_multiplier("rescaled", {"base": "bump_integrated", "k": 1, "R": R}, grid)
            uno.append(traj.time_integral(np.sum(grid.weights * np.abs(m.bilap) * dens, axis=1)))
            due.append(traj.time_integral(np.sum(grid.weights * np.abs(pot.dV) * np.abs(m.d1) * dens, axis=1)))
        rep.add_series("rescaled_bilaplacian_term", "R", s.R, uno)
        rep.add_series("rescaled_potential_term", "R", s.R, due)
        rep.trends["rescaled_bilaplacian_term"] = trend(uno, "decreasing")
        rep.trends["rescaled_potential_term"] = trend(due, "decreasing", strict=False)
        rep.check_flag("rescaled bilaplacian term decreasing in R", rep.trends["rescaled_bilaplacian_term"]["monotone"])


def local_smoothing_study(cfg: ExperimentConfig, rep: ExperimentReport):
    s, tol = cfg.sweep, cfg.tolerances
    dims = s.dims or [cfg.grid.n]
    T = s.T[-1]
    lo, hi = s.R_window

    def run_dim(n):
        grid = make_grid(cfg, n=n)
        if grid.mode != "radial":
            raise ConfigError("local_smoothing_study runs on radial grids")
        pot = make_potential(cfg, grid)
        evo = Evolver(grid, pot, tol.tail_mass, tol.tail_fraction)
        f = initial_data(cfg, grid)
        target = perturbed_sobolev_norm(evo.op, f, 0.5) ** 2
        traj = evo.trajectory(f, time_grid(-T, T, s.time_step))
        return grid, traj, target

    for n, (grid, traj, target) in zip(dims, parallel_map(run_dim, dims)):
        ratios = [local_smoothing_ratio(traj, R) / target for R in s.R]
        rep.add_series(f"ratio_radial_n{n}", "R", s.R, ratios)
        rep.scalars[f"n{n}"] = {"target": target, "sup_ratio": max(ratios)}
        window = [q for R, q in zip(s.R, ratios) if lo <= R <= hi]
        if not window:
            raise ConfigError("no R of the sweep falls inside R_window")
        if n >= 4:
            dev = max(abs(q - 1) for q in window)
            rep.scalars[f"n{n}"]["plateau_deviation"] = dev
            rep.check(f"n={n} plateau of ratio(R) / ||f||^2", dev, tol.plateau)
        else:
            comp = [local_smoothing_ratio_n3(traj, R) / target for R in s.R]
            rep.add_series(f"ratio_composite_n{n}", "R", s.R, comp)
            low = min(q for R, q in zip(s.R, comp) if lo <= R <= hi)
            rep.scalars[f"n{n}"]["composite_min"] = low
            rep.check(f"n={n} composite ratio / ||f||^2 over window", low, 0.5 * (1 - tol.lower_bound), ">=")
        # nested-domain sandwich for the bump weights h_k(|x|/R)
        ok = True
        rows = []
        v = traj.values
        d2 = np.abs(radial_derivative(v, grid)) ** 2
        for k in s.k or []:
            bump = BumpProfile(int(k))
            for R in s.R:
                Rout = bump.edge * R
                if Rout > grid.L:
                    continue
                inner = ball_time_integrals(traj, R)[0] / R
                mid = traj.time_integral(np.sum(grid.weights * bump.h(grid.radius / R) * d2, axis=1)) / R
                outer = ball_time_integrals(traj, Rout)[0] / R
                rows.append((k, R, inner, mid, outer))
                ok &= inner <= mid * (1 + 1e-12) and mid <= outer * (1 + 1e-12)
        rep.scalars[f"n{n}"]["sandwich"] = [list(x) for x in rows]
        if rows:
            rep.check_flag(f"n={n} sandwich ordering at every (k, R)", ok)


def rage_study(cfg: ExperimentConfig, rep: ExperimentReport):
    s, tol = cfg.sweep, cfg.tolerances
    grid = make_grid(cfg)
    pot = make_potential(cfg, grid)
    rep.scalars["hypotheses"] = pot.hypotheses.as_dict()
    evo = Evolver(grid, pot, tol.tail_mass, tol.tail_fraction)
    f = initial_data(cfg, grid)
    R = s.R[0]
    Tmax = max(max(s.T), max(s.times))
    traj = evo.trajectory(f, time_grid(-Tmax, Tmax, s.time_step))
    avgs = [rage_time_average(traj, R, T) for T in s.T]
    ratios = [b / a for a, b in zip(avgs, avgs[1:])]
    rep.add_series("time_average", "T", s.T, avgs)
    rep.scalars.update(averages=avgs, average_ratios=ratios)
    rep.check("largest consecutive time-average ratio", max(ratios), tol.average_ratio)

    bump = BumpProfile(1, plateau=0.5 * R, edge=R)
    W = bump.h(grid.radius)
    obs = [weighted_observable(evo.at(f, t), W) for t in s.times]
    rep.add_series("weighted_observable", "t", s.times, obs)
    ratio = obs[-1] / obs[0]
    rep.scalars.update(observable_ratio=ratio, error=ratio)
    rep.check("observable(t_last)/observable(t_first)", ratio, tol.decay_ratio)
    control = max(abs(weighted_observable(evo.at(f, t), np.ones(grid.shape)) / f.mass() - 1) for t in s.times)
    rep.scalars["unit_weight_control"] = control
    rep.check("unit weight control (charge)", control, tol.roundoff)
    pcg = [phase_corrected_gradient(evo.at(f, t), t) for t in s.times]
    rep.add_series("phase_corrected_gradient", "t", s.times, pcg)
    rep.trends["phase_corrected_gradient"] = trend(pcg, "decreasing")


def reversibility_demo(cfg: ExperimentConfig, rep: ExperimentReport):
    s, tol = cfg.sweep, cfg.tolerances
    grid = make_grid(cfg)
    pot = make_potential(cfg, grid)
    evo = Evolver(grid, pot, None)
    fR = initial_data(cfg, grid)
    R = s.R[0]
    chi = grid.region_mask("ball", R)
    if fR.with_values(np.where(chi, 0, fR.values)).norm() > 0:
        raise ConfigError("initial data must be supported in the ball of radius R")
    rows = []
    for t in s.times:
        g = evo.at(fR, -t, check=False)
        u = evo.at(g, t, check=False)
        local = u.with_values(np.where(chi, u.values, 0))
        err = local.with_values(local.values - fR.values).norm()
        generic = evo.at(fR, t, check=False)
        generic_local = generic.with_values(np.where(chi, generic.values, 0)).norm()
        rows.append({"t": t, "recovery_error": err, "local_norm": local.norm(), "generic_local_norm": generic_local,
                     "backward_state_tail": g.tail_fraction(tol.tail_fraction)})
    last = rows[-1]
    rep.scalars.update(rows=rows, error=last["recovery_error"])
    rep.add_series("recovery_error", "t", s.times, [x["recovery_error"] for x in rows])
    rep.add_series("generic_local_norm", "t", s.times, [x["generic_local_norm"] for x in rows])
    rep.check("recovery error of f_R", max(x["recovery_error"] for x in rows), tol.recovery)
    rep.check("| ||chi u(t)|| - 1 |", max(abs(x["local_norm"] - 1) for x in rows), tol.recovery)
    rep.check("generic local norm at t_last (decay)", last["generic_local_norm"], tol.decay_ratio)
    rep.notes.append("backward-evolved data are not gated by the tail guard: the discrete group law holds on the box regardless")


def random_field_specs(params: dict, n: int, seed: int, L: float):
    rng = np.random.default_rng(seed)
    count = int(params.get("count", 100))
    wmin, wmax = float(params.get("width_min", 1.2)), float(params.get("width_max", 2.5))
    fmax = float(params.get("freq_max", 0.3))
    cmax = int(params.get("components_max", 3))
    spread = float(params.get("spread", L / 4))
    specs = []
    for _ in range(count):
        comps = []
        for _ in range(int(rng.integers(1, cmax + 1))):
            comps.append((rng.uniform(-spread, spread, n), rng.uniform(wmin, wmax), rng.uniform(-fmax, fmax, n),
                          complex(rng.normal(), rng.normal())))
        specs.append(comps)
    return specs


def sample_specs(specs, grid: Grid) -> list[ComplexField]:
    X = np.stack(grid.mesh)
    out = []
    for comps in specs:
        v = np.zeros(grid.shape, dtype=complex)
        for c, w, xi, a in comps:
            d2 = np.sum((X - c.reshape((-1,) + (1,) * grid.n)) ** 2, axis=0)
            v += a * np.exp(-d2 / (2 * w * w)) * np.exp(2j * np.pi * np.tensordot(xi, X, axes=1))
        out.append(ComplexField(grid, v))
    return out


def bilinear_survey(cfg: ExperimentConfig, rep: ExperimentReport):
    s, tol = cfg.sweep, cfg.tolerances
    dims = s.dims or [cfg.grid.n]
    Ns = s.N or [cfg.grid.N] * len(dims)
    if len(Ns) != len(dims):
        raise ConfigError("sweep.N must give one coarse N per entry of sweep.dims")
    seed = int(cfg.data.params.get("seed", 0))
    L = cfg.grid.L
    worst_stab = 0.0
    for n, N in zip(dims, Ns):
        specs = random_field_specs(cfg.data.params, n, seed + n, L)
        maxima = []
        for NN in (N, 2 * N):
            grid = build_grid("cartesian", n, L, NN)
            fields = sample_specs(specs, grid)
            ratios = [bilinear_ratio(h) for h in fields]
            maxima.append(max(ratios))
            tail = max(h.tail_fraction(tol.tail_fraction) for h in fields)
            if tail > tol.tail_mass:
                raise TailMassError(f"random field reaches the box edge (tail {tail:.3e})", tail)
        stab = abs(maxima[1] / maxima[0] - 1)
        worst_stab = max(worst_stab, stab)
        grid = build_grid("cartesian", n, L, N)
        fields = sample_specs(specs, grid)
        imag = max(abs(bilinear_form_a(h.with_values(h.values.real), h.with_values(h.values.real)).imag)
                   / (h.with_values(h.values.real).mass() + DENOM_FLOOR) for h in fields)
        # integration by parts, on the refined grid, with real bumps that are negligible at the origin
        fine = build_grid("cartesian", n, L, 2 * N)
        rng = np.random.default_rng(seed + 100 + n)
        ibp = 0.0
        X = np.stack(fine.mesh)
        for _ in range(8):
            direction = rng.normal(size=n)
            centre = direction / np.linalg.norm(direction) * 0.4 * L
            width = rng.uniform(0.9, 1.1)
            h = ComplexField(fine, np.exp(-np.sum((X - centre.reshape((-1,) + (1,) * n)) ** 2, axis=0) / (2 * width**2)))
            a = bilinear_form_a(h, h)
            expect = -0.5 * (n - 1) * inverse_radius_mass(h)
            ibp = max(ibp, abs(a.real - expect) / abs(expect))
        rep.scalars[f"n{n}"] = {"max_ratio_coarse": maxima[0], "max_ratio_fine": maxima[1], "stability": stab,
                                "imag_real_fields": imag, "ibp_residual": ibp, "N": [N, 2 * N]}
        rep.check_flag(f"n={n} max ratio finite", bool(np.isfinite(maxima[0]) and np.isfinite(maxima[1])))
        rep.check(f"n={n} max ratio change under refinement", stab, tol.stability)
        rep.check(f"n={n} Im a(h,h) for real h", imag, tol.imag)
        rep.check(f"n={n} integration-by-parts value", ibp, tol.ibp)
    rep.scalars["error"] = worst_stab


# ---------------------------------------------------------------- registry


@dataclass(frozen=True)
class Study:
    name: str
    fn: object
    summary: str
    sweep_keys: tuple = ()
    tolerance_keys: tuple = ()
    data_families: tuple = ("gaussian",)
    modes: tuple = ("cartesian", "radial")

    def validate(self, cfg: ExperimentConfig):
        cfg.require("sweep", *self.sweep_keys)
        cfg.require("tolerances", *self.tolerance_keys)
        if cfg.data.family not in self.data_families:
            raise ConfigError(f"{self.name} needs data family in {self.data_families}")
        if cfg.grid.mode not in self.modes:
            raise ConfigError(f"{self.name} needs a {' or '.join(self.modes)} grid")
        try:
            grid = make_grid(cfg)
            check_params(cfg.potential.family, cfg.potential.params)
            small = build_grid(cfg.grid.mode, cfg.grid.n, cfg.grid.L, 16)
            make_multiplier(cfg, small)
        except (GridError, PotentialError, MultiplierError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid configuration: {exc}") from exc
        if grid.mode == "radial" and cfg.data.family == "gaussian":
            if any(float(cfg.data.params.get(k, 0.0)) for k in ("tilt", "momentum", "center")):
                raise ConfigError("radial grids need radial data: tilt, momentum and center must be 0")

    def run(self, cfg: ExperimentConfig, rep: ExperimentReport | None = None) -> ExperimentReport:
        """Fill ``rep`` (created if absent); on an exception it keeps whatever was recorded so far."""
        rep = rep if rep is not None else ExperimentReport(self.name, cfg.echo())
        start = time.perf_counter()
        try:
            self.fn(cfg, rep)
        finally:
            rep.wall_clock = time.perf_counter() - start
        return rep


STUDIES: dict[str, Study] = {
    s.name: s
    for s in [
        Study("conservation_study", conservation_study, "mass, energy and H^1/2_V conservation; split-step order",
              ("steps", "time_step"), ("unitarity_exact", "unitarity_split", "energy"), modes=("cartesian", "radial")),
        Study("finite_T_identity", finite_T_identity, "multiplier identity on a finite time strip",
              ("T", "cfl"), ("residual",)),
        Study("pseudoconformal_study", pseudoconformal_study, "pseudoconformal ledger and free control",
              ("T", "cfl"), ("residual",)),
        Study("scattering_study", scattering_study, "wave operators and the H^1/2_V scattering identity",
              ("T",), ("convention", "residual"), modes=("cartesian",)),
        Study("dispersive_limits_study", dispersive_limits_study, "dispersive defect, virial and weighted-mass limits",
              ("times",), ("decay_ratio", "limit_gap", "roundoff", "famboc_C", "residual")),
        Study("vai_limit_study", vai_limit_study, "multiplier identity as T grows",
              ("T",), ("limit_gap",)),
        Study("morawetz_study", morawetz_study, "Morawetz identity via eps-regularized |x|",
              ("T", "eps", "time_step"), ("limit_gap",), modes=("radial",)),
        Study("local_smoothing_study", local_smoothing_study, "local smoothing ratios, plateau and sandwich",
              ("T", "R", "R_window", "time_step"), ("plateau", "lower_bound"), modes=("radial",)),
        Study("rage_study", rage_study, "time-averaged and pointwise local decay",
              ("T", "R", "times", "time_step"), ("average_ratio", "decay_ratio", "roundoff")),
        Study("reversibility_demo", reversibility_demo, "localized data recovered after backward-forward evolution",
              ("R", "times"), ("recovery", "decay_ratio"), data_families=("bump",)),
        Study("bilinear_survey", bilinear_survey, "random survey of |a(h,h)| / ||h||^2_{H^1/2}",
              ("dims",), ("stability", "imag", "ibp"), data_families=("random",), modes=("cartesian",)),
    ]
}


def run_study(cfg: ExperimentConfig) -> ExperimentReport:
    return STUDIES[cfg.experiment].run(cfg)
