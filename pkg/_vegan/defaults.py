LEARNING_RATE = 1e-3
D_DELTA_LEARNING_RATE_SCALE = 0.2
WEIGHT_DECAY = 1e-2
ADAM_BETAS = (0.9, 0.999)
ADAM_EPSILON = 1e-8

LATENT_DIM = 20
EXTRACTOR_WIDTH = 100
EXTRACTOR_LAYERS = 3
DECODER_WIDTH = 200
DECODER_LAYERS = 2
DISCRIMINATOR_WIDTH = 100
DISCRIMINATOR_LAYERS = 2

SIGMA_FLOOR = 1e-4
PROBABILITY_CLAMP = 1e-7

EPOCHS = 300
BATCH_SIZE = 64
LOG_EVERY = 50

CONTINUOUS_RANGE = (0.05, 1.0)
ZERO_NUDGE = 1e-6
SPLIT_RATIO = 0.75
MAX_RESAMPLES = 10
MIN_GROUP_SIZE = 5

NOISE_VARIANCE = 0.1
CORRUPTION_LEVELS = (0.05, 0.125, 0.2, 0.333)

FINITE_DIFFERENCE_STEP = 1e-5
DEFAULT_STYLE = "solarized-dark"
