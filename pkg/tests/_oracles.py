"""Frozen reference values for the steady-state solvers and estimators.

Every numeric entry was cross-validated between the two independent
steady-state solvers (truncated basis expansion and finite-difference grid)
before being frozen; closed-form entries carry their defining formula in a
comment. All tables use omega = k_B T = 1.
"""

import math

# Bose-Einstein occupation 1/(e^{omega/T} - 1) at omega = T.
N_B = 1.0 / (math.e - 1.0)

# Classical threshold model: -P/(kappa*omega), keyed (gamma/kappa, lam/gamma).
CLASSICAL_POWER = {
    (3.0, 0.1): 0.065841,
    (3.0, 0.5): 0.317526,
    (3.0, 1.0): 0.363892,
    (3.0, 2.0): 0.377215,
    (3.0, 5.0): 0.382086,
    (10.0, 0.5): 0.446885,
    (100.0, 5.0): 0.573211,
}

# Classical misindication probability eta, keyed (gamma/kappa, lam/gamma).
CLASSICAL_ETA = {
    (10.0, 0.5): 0.062428,
    (100.0, 1.0): 0.0067355,
    (100.0, 5.0): 0.0040506,
}

# Engine model at omega = gamma = g = 1: power P by lam/gamma.
ENGINE_LAM_SWEEP = (0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0)
ENGINE_POWER_KAPPA0 = (
    -0.034999, -0.302823, -0.457017, -0.593341, -0.753273, -0.848346, -0.913927,
)
ENGINE_POWER_KAPPA_THIRD = (
    -0.010427, -0.286525, -0.397912, -0.489615, -0.589763, -0.646737, -0.685242,
)
# kappa = gamma/3, lam/gamma = 20: heat current and measurement-energy rate.
ENGINE_HEAT_KAPPA_THIRD_LAM20 = -0.151577
ENGINE_EM_KAPPA_THIRD_LAM20 = 0.836819

# Fast-detector measurement-entropy rate over kappa at lam/gamma = 1:
# 8*(1 + 2 n_B - erf(2) - e^{-4}/(2 sqrt(pi))).
FAST_DETECTOR_RATE_OVER_KAPPA = 9.30771522
# Fast-detector misindication probability (1 - erf(2))/2 and the detailed-FT
# slope -(omega/T - ln((1-eta)/eta)) it implies.
FAST_DETECTOR_ETA = 0.0023388674905236
FAST_DETECTOR_SLOPE = -5.0557468382632
