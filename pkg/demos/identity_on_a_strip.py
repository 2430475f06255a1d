"""Multiplier identity on a finite time strip, and how its residual shrinks with the grid.

Run: python demos/identity_on_a_strip.py
"""
import numpy as np

from dilab import assemble_hamiltonian, build_grid, sample_potential
from dilab.functionals import identity_integrand, trajectory, virial_flux
from dilab.grid import ComplexField
from dilab.multiplier import build_multiplier

T = 4.0
print("Both sides of the identity for psi = <x>, V = 1/(1+x^2), T = 4\n")
print(f"{'N':>6} {'space-time side':>18} {'boundary side':>18} {'relative gap':>14}")
for N in (128, 256, 512, 1024):
    grid = build_grid("cartesian", 1, 40.0, N)
    pot = sample_potential("inverse_power", {"c": 1.0}, grid)
    op = assemble_hamiltonian(grid, pot)
    x = grid.axis
    f = ComplexField(grid, np.exp(-x**2 / 8) * (1 + 0.3 * x))
    psi = build_multiplier("japanese_bracket", {}, grid)
    times = np.linspace(-T, T, int(np.ceil(2 * T / (0.5 * grid.h))) + 1)
    traj = trajectory(op, f, times, tail_threshold=1e-6)
    lhs = traj.time_integral(identity_integrand(traj, psi, pot))
    rhs = -0.5 * (virial_flux(traj.field(len(traj) - 1), psi) - virial_flux(traj.field(0), psi))
    print(f"{N:>6} {lhs:>18.12f} {rhs:>18.12f} {abs(lhs - rhs) / (abs(lhs) + abs(rhs)):>14.3e}")

print("\nEach doubling of N (with the time step tied to h) cuts the gap by about four.")
