"""Fixed constants for the synthetic generators and the default protocol.

The two toolbox-generated benchmark sets (Banana, Lithuanian) are not
available with their original parameters, so the shapes below are our own
documented choices.
"""

import math

# Banana: two interleaved half-circle crescents.
BANANA_RADIUS = 5.0
BANANA_NOISE = 1.0
BANANA_ARC = (-math.pi / 2, math.pi / 2)
# class 1 = class-0 arc rotated by pi, then shifted by this offset
BANANA_SHIFT = (BANANA_RADIUS / 2, BANANA_RADIUS)

# Lithuanian: two parallel parabolic ridges y = a*t^2 (+ offset for class 1).
LITHUANIAN_CURVATURE = 0.25
LITHUANIAN_SPAN = 4.0
LITHUANIAN_OFFSET = -2.5
LITHUANIAN_NOISE = 0.8

# Two-Gaussian ENN demo.
GAUSS_MU1 = (0.0, 0.0)
GAUSS_MU2 = (3.5, 0.0)
GAUSS_VARIANCE = 1.0

# Protocol defaults.
ENSEMBLE_SIZE = 10
NEIGHBORS = 7
ENN_KS = (1, 3, 5)
ITERATIONS = 20
TRAIN_FRACTION = 0.5
VALIDATION_FRACTION = 0.25
PERCEPTRON_EPOCHS = 100
PERCEPTRON_LEARNING_RATE = 1.0
BOOTSTRAP_RETRIES = 10
