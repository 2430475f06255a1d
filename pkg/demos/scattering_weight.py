"""Moller approximations W_T f and the half-derivative weight of f.

The free flow back from e^{iTH} f converges as T grows, and the Fourier-side
weight 2 pi int |xi| |g(xi)|^2 of the limit matches ||f||^2 in the H^{1/2}_V norm.

Run: python demos/scattering_weight.py
"""
import numpy as np

from dilab import assemble_hamiltonian, build_grid, sample_potential
from dilab.grid import ComplexField
from dilab.scattering import scattering_weight, wave_operator

grid = build_grid("cartesian", 1, 250.0, 2048)
op = assemble_hamiltonian(grid, sample_potential("inverse_power", {"c": 0.25}, grid))
f = ComplexField(grid, np.exp(-grid.axis**2 / 18))
state = wave_operator(op, f, +1, [5.0, 10.0, 20.0, 40.0])
sw = scattering_weight(state, op)
print(f"target ||f||^2 in H^1/2_V: {sw['target']:.8f}")
for T, w, res in zip(sw["T"], sw["weights"], sw["residuals"]):
    print(f"T = {T:5.1f}   weight {w:.8f}   relative gap {res:.3e}")
print(f"||W f|| / ||f|| - 1 = {state.W.norm() / f.norm() - 1:.1e}")
