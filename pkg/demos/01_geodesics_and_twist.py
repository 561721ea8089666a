"""Clairaut data of oblate and prolate ellipsoids, and the twist of the sphere.

Run with ``python demos/01_geodesics_and_twist.py``.
"""

import numpy as np

from revspec import convexity_check, make_ellipsoid, make_sphere, omega, tau, twist_classify
from revspec.action import g_prime_check

I = np.array([0.1, 0.3, 0.5, 0.7, 0.9])

for name, prof in [("sphere", make_sphere()), ("b=0.8", make_ellipsoid(0.8)), ("b=1.2", make_ellipsoid(1.2))]:
    print(f"\n{name}  (meridian length L = {prof.L:.6f})")
    print("      I       tau(I)     omega(I)")
    for i, t, w in zip(I, tau(prof, I), omega(prof, I)):
        print(f"  {i:5.2f}  {t:11.8f}  {w:+.3e}")
    tw = twist_classify(prof)
    cv = convexity_check(prof)
    print(f"  twist class: {tw.cls}   omega' in [{tw.min_omega_prime:+.4f}, {tw.max_omega_prime:+.4f}]")
    print(f"  convexity criterion: {'pass' if cv.passed else 'fail'}   min|E| = {cv.min_abs_E:.4f}")

# g' = -omega ties the action curve to the phase shift
grid = np.linspace(0.05, 0.95, 19)
for b in (0.8, 1.1):
    print(f"\nmax |g'(I) + omega(I)| on b={b}: {g_prime_check(make_ellipsoid(b), grid):.2e}")
