"""Stokes boundary control on the channel.

Solves the control problem at one grid level with preconditioned MINRES,
compares against a sparse direct solve, prints the control along the inflow
edge and shows how the control energy grows as the control cost shrinks.

    python demos/stokes_control.py [level]
"""
import sys

import numpy as np

from bcprecond.control import control_profile, solve_stokes_control, stokes_energy_sweep
from bcprecond.io import write_vtk
from bcprecond.kkt import control_energy

level = int(sys.argv[1]) if len(sys.argv) > 1 else 3

x, kkt, rep = solve_stokes_control(level, alpha=1e-3, beta=1e-3)
xd, _, _ = solve_stokes_control(level, alpha=1e-3, beta=1e-3, direct=True)
print(f"level {level}: N = {kkt.N}, MINRES {rep.iterations} iterations, "
      f"relative difference to direct solve {np.linalg.norm(x - xd) / np.linalg.norm(xd):.1e}")
print(f"control energy u^T Q_u u = {control_energy(kkt, x):.4f}")

print("\n   y      u_x      u_y")
for y, ux, uy in control_profile(kkt, x):
    print(f"{y:5.2f} {ux:8.4f} {uy:8.4f}")

print("\nbeta      energy")
for beta, e in stokes_energy_sweep(level, [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6]):
    print(f"{beta:7.0e}  {e:8.4f}")

write_vtk("stokes_control.vtk", kkt, x)
print("\nfields written to stokes_control.vtk")
