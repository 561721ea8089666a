"""Decay of the Fourier transform of curve measures and Van der Corput bounds.

Run with ``python demos/03_oscillatory_integrals.py``.
"""

import numpy as np

from revspec import dmu_hat, make_ellipsoid, gamma_curve, osc_integral_1d, vdc_bound, vdc_detect
from revspec.oscint import circle_curve, decay_fit, phase_corpus, synthetic_inflection_curve

lam_grid = np.logspace(1, 3.5, 400)

circle = circle_curve(1.0)
print("circle: |dmu_hat| at lambda = 10, 100, 1000:",
      ", ".join(f"{abs(dmu_hat(circle, l, (1.0, 0.0))):.3e}" for l in (10, 100, 1000)))

gamma = gamma_curve(make_ellipsoid(0.8))
print(f"action curve, direction (1, 0): decay exponent {decay_fit(gamma, (1.0, 0.0), lam_grid).exponent:+.3f}")
syn = synthetic_inflection_curve()
print(f"synthetic curve, inflection direction: decay exponent {decay_fit(syn, (0.0, 1.0), lam_grid).exponent:+.3f}")

print("\nVan der Corput certificates on the phase corpus")
print(f"  {'phase':28s} orders   sup |I| / bound")
for name, (phase, _) in phase_corpus().items():
    cert = vdc_detect(phase, min(4, phase.p_max))
    ratio = max(abs(osc_integral_1d(phase, None, l)) / vdc_bound(cert, l) for l in np.logspace(1, 4, 13))
    print(f"  {name:28s} {str(cert.orders):8s} {ratio:.3f}")
