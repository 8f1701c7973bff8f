"""Spectral facts behind the preconditioners.

Element mass bounds that fix the Chebyshev parameters, the quality of 20
Chebyshev steps, clustering of the Schur approximation, the three-point
spectrum of the ideal preconditioner and the indefiniteness of the
symmetric convection-diffusion part that motivates removing inflow nodes.

    python demos/spectra.py
"""
import numpy as np

from bcprecond import analysis as an
from bcprecond.kkt import ChannelProblem
from bcprecond.picard import solve_navier_control

print("element mass bounds of D^-1 Q")
for r in an.mass_bounds_table():
    print(f"  {r['matrix']:11s} [{r['lambda_min']:.4f}, {r['lambda_max']:.4f}]")

print("\n20 Chebyshev steps at level 3")
for which in ("Q_v", "Q_p", "Q_u"):
    rep = an.mass_spectrum_report(which, 3, 20)
    print(f"  {which}: [{rep.min:.12f}, {rep.max:.12f}]")

print("\nleft-edge node removal on one Q2 element")
for pattern in [(), (1,), (4,), (1, 4), (1, 7), (1, 4, 7)]:
    rep = an.element_elimination_eigs(pattern)
    print(f"  removed {str(set(pattern) or '{}'):10s} lambda_min {rep.min:.4f}")

rep = an.schur_interlacing_report(3, 1e-3, 1e-3)
w = rep.eigenvalues
print(f"\nSchur approximation at level 3: {w.size} eigenvalues, {int((w > 1.5).sum())} above 1.5, "
      f"largest {w.max():.1f}")

rep = an.murphy_ideal_check(2)
print(f"ideal preconditioner at level 2: distinct eigenvalues {np.unique(np.round(rep.eigenvalues, 8))}")

pb = ChannelProblem.build(4)
x, _ = solve_navier_control(pb, nu=1 / 20, direct=True)
print("\nsymmetric part of the convection-diffusion block, nu = 1/20, level 4")
for r in an.convection_symmetric_report(pb, 1 / 20, x[: pb.dofmap.n_v]):
    print(f"  {r['matrix']:12s} negative eigenvalues {r['n_negative']}")
