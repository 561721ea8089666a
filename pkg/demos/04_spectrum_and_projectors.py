"""Separated spectrum, the half-integer lattice and projector norms.

Run with ``python demos/04_spectrum_and_projectors.py`` (about a minute).
"""

import numpy as np

from revspec import joint_lattice_check, make_ellipsoid, make_sphere, norm_scan, spectrum_table
from revspec.projector import pole_growth_scan

sph = spectrum_table(make_sphere(), 18.0)
n = np.round((-1 + np.sqrt(1 + 4 * sph.lam**2)) / 2)
print(f"sphere: {sph.count} eigenvalues below 18, worst relative error vs sqrt(n(n+1)): "
      f"{np.max(np.abs(sph.lam[n > 0] / np.sqrt(n[n > 0] * (n[n > 0] + 1)) - 1)):.2e}")

prof = make_ellipsoid(1.1)
tab = spectrum_table(prof, 48.0)
rep = joint_lattice_check(tab, prof, lambda_min=6.0)
print("\nellipsoid b=1.1: distance of G(lambda, k) to Z + 1/2, worst per window")
for w, v in zip(rep.windows, rep.window_max):
    print(f"  [{w[0]:5.1f}, {w[1]:5.1f}]  {v:.3e}")
print(f"  fitted decay exponent {rep.decay_exponent:+.2f}")

ell = make_ellipsoid(0.9)
T = spectrum_table(ell, 42.0)
sc = norm_scan(T, 0.4, [15.0, 20.0, 30.0, 40.0], [0.0, 0.25])
print("\nellipsoid b=0.9: pi * sup P(x, x) / (lambda delta) away from the poles")
for r in sc.rows:
    print(f"  lambda = {r['lambda']:5.1f}  kappa = {r['kappa']:.2f}  ratio * pi = {np.pi * r['ratio']:.3f}")
print("  slopes of log(sup P / delta):", {k: round(v, 3) for k, v in sc.slopes_compensated.items()})

ps = pole_growth_scan(T)
print("\nlargest |Phi(pole)|^2 per dyadic window:", [f"{v:.2f}" for v in ps["max_pole_value"]],
      f"exponent {ps['exponent']:.2f}")
