SCHEMA_VERSION = 1

# Unit cell geometries, in the column order of the biased sampling table
GEOMETRY_NAMES = ["Gyroid", "Schwarz", "Diamond", "Lidinoid", "Split P"]
PROPERTY_NAMES = ["E", "E_tilde"]
GEOMETRY_MODE_NAME = "geometry"
PROPERTY_MODE_NAME = "property"

CELLS_PER_SLICE = 54
DEFAULT_SYNTHETIC_SHAPE = [5, 27, 2]
DEFAULT_LATENT_RANK = 2
DEFAULT_NOISE_STD = 0.02
DEFAULT_MASS_VARIATION = 0.3

# Training
DEFAULT_LEARNING_RATE = 0.01
DEFAULT_WEIGHT_DECAY = 0.01
DEFAULT_EPOCHS = 2000
DEFAULT_SMOOTHNESS_WEIGHT = 0.1
DEFAULT_HIDDEN_SIZES = [32, 16]
EARLY_STOP_WINDOW = 50
EARLY_STOP_RELATIVE_TOL = 1e-6

# Gaussian process kernel: constant * RBF + white, with optimizer bounds
GP_CONSTANT_VALUE = 1.0
GP_CONSTANT_BOUNDS = (1e-3, 1e3)
GP_LENGTHSCALE = 1.0
GP_LENGTHSCALE_BOUNDS = (1e-2, 1e2)
GP_WHITE_NOISE = 1e-3
GP_WHITE_NOISE_BOUNDS = (1e-5, 1e1)
GP_ALPHA = 0.01
GP_VARIANCE_CLAMP_TOL = 1e-12

# Random forest aggregator
FOREST_TREES = 100
FOREST_FEATURE_SUBSAMPLE = 1.0 / 3.0
STACKING_FOLDS = 5

# Biased sampling
BIAS_SCALE = 1.0
BIAS_UPPER = 40
BIAS_LOWER_START = 3
BIAS_LOWER_STEP = 2
BIAS_EXPERIMENTS = list(range(1, 11))

# Fixed quota rows for experiments 1..10, columns in GEOMETRY_NAMES order
REFERENCE_QUOTAS = {
    1: [40, 21, 7, 6, 3],
    2: [14, 21, 5, 5, 40],
    3: [8, 23, 7, 15, 40],
    4: [9, 24, 12, 19, 40],
    5: [11, 21, 16, 40, 25],
    6: [14, 13, 40, 22, 35],
    7: [36, 15, 28, 40, 16],
    8: [40, 17, 21, 28, 37],
    9: [30, 35, 29, 19, 40],
    10: [34, 40, 32, 39, 21],
}

# Experiments
DEFAULT_ITERATIONS = 5
DEFAULT_TRAIN_SIZES = [40, 60, 80, 100]
DEFAULT_BASE_SEED = 0

# Ensemble members: (kind, rank)
DEFAULT_ENSEMBLE_MEMBERS = [
    ("neural", 24), ("neural", 32),
    ("cpd", 1), ("cpd", 2), ("cpd", 4),
    ("cpd_s", 1), ("cpd_s", 2), ("cpd_s", 4),
]
CPDS_ENSEMBLE_MEMBERS = [("cpd_s", 1), ("cpd_s", 2), ("cpd_s", 4)]

PARITY_SVG_SIZE = 600
