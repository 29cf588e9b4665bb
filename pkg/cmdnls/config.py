N_POINTS = 16384
HALF_LENGTH = 200.0
MIN_POINTS = 16
INTERIOR_FRACTION = 0.5

GAUSS_ORDER = 200
DEALIAS_FRACTION = 2 / 3
FILTER_ORDER = 36
FILTER_STRENGTH = 36.0
# edge-jump correction of non-periodic derivatives
JUMP_ORDER = 5
JUMP_STENCIL = 10

SMALLNESS_ETA = 0.3
NEWTON_MAX_ITER = 50
NEWTON_TOL = 1e-12
NEWTON_HALVINGS = 8

CUTOFF_RADIUS_C = 10.0
HIERARCHY_CAP = 7
OMEGA_CAP = 6

TIME_DIFF_STEP = 1e-4
BLOWUP_H1_CEILING = 1e4
ENERGY_JUMP_FACTOR = 10.0
STATE_NORM_CEILING = 1e12

MIN_CLASSIFY_SAMPLES = 20
QUANTIZED_MARGIN = 0.1
EXOTIC_MARGIN = 1.4
DYADIC_WINDOWS = 3
MIN_WINDOW_SAMPLES = 4

DEFAULT_SEED = 3562901
MACHINE_FLOOR = 1e-15

DEFAULT_TOLERANCES = {
    "moment": 1e-10,
    "weight": 1e-10,
    "weight_pointwise": 1e-8,
    "identity": 1e-5,
    "hilbert_tail": 10.0,
    "commutator": 1e-5,
    "transversality": 1e-8,
    "transversality_q": 1e-8,
    "pseudo_conformal": 1e-3,
    "decompose": 1e-8,
    "orthogonality": 1e-10,
}
