"""Tolerances and physical constants shared across the package.

Every numerical threshold used by a check or a test lives here.
"""

from scipy import constants as _sc

# Hermitian linear algebra
HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-9
PURE_NORM_TOL = 1e-12
PROJECTOR_TOL = 1e-12
TP_TOL = 1e-8
EIG_RECON_TOL = 1e-9
SQRT_TOL = 1e-9
# Eigenvalues below this fraction of the largest are round-off and treated as zero in square roots.
EIG_ZERO_RTOL = 1e-13

# Optimizers
MLE_GTOL = 1e-8
MLE_FTOL = 1e-15
MLE_MAX_ITER = 5000
LM_MAX_ITER = 500
NEWTON_MAX_ITER = 100
LM_XTOL = 1e-12
CROSSING_BISECT_TOL = 1e-12

# Decay-fit multi-start grid over the lifetime, ps
FIT_TAU_MIN = 0.1
FIT_TAU_MAX = 100.0
FIT_N_STARTS = 20

# Pulse energies above this are outside the validated quadratic regime, nJ
MAX_VALIDATED_ENERGY_NJ = 10.0

# h * (1 THz) / k_B, in kelvin
H_THZ_OVER_KB = _sc.h * 1e12 / _sc.k

ROOM_TEMPERATURE_K = 295.0
PELTIER_TEMPERATURE_K = 233.15
