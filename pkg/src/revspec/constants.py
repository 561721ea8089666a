"""Frozen numerical constants.

``MIXED_BOUND_CONSTANT`` is the dimensional constant of the mixed
Van der Corput / stationary-phase bound.  It was calibrated once on the
reference phase ``x^2/2 + y^2/2`` (``p = 2``, plateau amplitude, 25
log-spaced ``lambda`` in ``[1e2, 1e4]``): the largest observed ratio of
``|I(lambda)|`` to the bound with unit constant was ``0.012903``, rounded
up to ``0.0130`` and frozen.
"""

MIXED_BOUND_CONSTANT = 0.0130

#: Desk-scale cap on ``lambda_max`` for spectral tables.
LAMBDA_MAX_CAP = 120.0
