"""Local decay holds for each state, but no rate is uniform over states.

A bump f supported in the ball of radius 5 leaks out of the ball: after t = 50
almost nothing is left inside.  Evolving f backwards by 50 first gives a state g
whose forward evolution refocuses exactly onto f at t = 50, so the localized
norm of e^{itH} g at that time is 1.

Run: python demos/no_uniform_decay_rate.py
"""
import numpy as np

from dilab import assemble_hamiltonian, build_grid, sample_potential
from dilab.grid import ComplexField
from dilab.spectral import propagate_perturbed

R, t = 5.0, 50.0
grid = build_grid("radial", 3, 400.0, 2048)
op = assemble_hamiltonian(grid, sample_potential("inverse_power", {"c": 0.5}, grid))
r = grid.radius
q = np.clip(1 - (r / R) ** 2, 0, None)
bump = np.where(q > 0, np.exp(1 - 1 / np.where(q > 0, q, 1)), 0.0)
f = ComplexField(grid, bump)
f = f.with_values(f.values / f.norm())
inside = r < R


def local_norm(u):
    return u.with_values(np.where(inside, u.values, 0)).norm()


forward = propagate_perturbed(op, f, t)
g = propagate_perturbed(op, f, -t)
refocused = propagate_perturbed(op, g, t)

print(f"||chi e^(itH) f||  at t = {t:g}: {local_norm(forward):.3e}   (generic data leave the ball)")
print(f"||chi e^(itH) g||  at t = {t:g}: {local_norm(refocused):.15f}")
print(f"||chi e^(itH) g - f||          : {refocused.with_values(np.where(inside, refocused.values, 0) - f.values).norm():.2e}")
print(f"||chi g||          at t = 0    : {local_norm(g):.3e}   (g itself is spread out)")
