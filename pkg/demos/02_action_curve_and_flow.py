"""The action curve, the periodic q1 flow and antipodal refocusing.

Run with ``python demos/02_action_curve_and_flow.py``.
"""

import numpy as np

from revspec import CotangentState, bicharacteristic_length, gamma_curve, geodesic_flow, make_ellipsoid, q1_flow
from revspec.flow import antipode, d_profile, state_distance

prof = make_ellipsoid(0.8)

c = gamma_curve(prof)
print(f"closed action curve: length {c.total_length:.6f}, winding number {c.winding_number():.6f}")
print(f"curvature range [{c.curvature.min():.4f}, {c.curvature.max():.4f}]")

x = CotangentState(0.3, 0.4, 0.5, -0.2)
print(f"\nstart {x}")
for t in (np.pi, 2 * np.pi):
    y = q1_flow(prof, x, t)
    print(f"q1 flow to t = {t:.4f}: {y}")
print("distance to the antipodal covector at t = pi:", f"{state_distance(q1_flow(prof, x, np.pi), antipode(x, prof)):.2e}")
print("return error at t = 2 pi:", f"{state_distance(q1_flow(prof, x, 2 * np.pi), x):.2e}")

# the geodesic flow itself is not periodic on the ellipsoid
g = geodesic_flow(prof, x, 2 * np.pi)
print(f"geodesic flow to t = 2 pi lands {state_distance(g, x):.3f} away")

print("\nbicharacteristic length to the antipode:", bicharacteristic_length(prof, (0.0, 0.5), (np.pi, -0.5)))
dp = d_profile(prof, 0.5, np.linspace(0.5, 2.5, 5))
print("d(0.5, t) and its second t-derivative:")
for t, d, dtt in zip(dp.t, dp.d, dp.dtt):
    print(f"  t = {t:.2f}   d = {d:.6f}   d_tt = {dtt:+.5f}")
