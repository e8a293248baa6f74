"""Standard test metrics and probe fields shared by the CLI verify suite and the tests."""
from __future__ import annotations

import math

import numpy as np

from .grid import GridSpec, OneForm, random_oneform
from .tensor import FourierMode, MetricSpec, metric_from_spec

# amplitude 0.05, wavevector components in {-1, 0, 1}
PERTURBED_3D_MODES = (
    FourierMode(0.05, (1, 0, 0), 0.3, 0, 0),
    FourierMode(0.05, (0, 1, 1), 1.1, 1, 1),
    FourierMode(0.05, (1, 1, 0), 0.7, 0, 1),
    FourierMode(0.05, (0, 1, -1), 2.0, 2, 2),
    FourierMode(0.05, (1, 0, 1), 0.4, 1, 2),
    FourierMode(0.05, (1, -1, 1), 0.9, 0, 2),
)

PERTURBED_2D_MODES = (
    FourierMode(0.05, (1, 0), 0.3, 0, 0),
    FourierMode(0.05, (1, 1), 1.3, 0, 1),
    FourierMode(0.05, (0, 1), 2.1, 1, 1),
    FourierMode(0.04, (1, -1), 0.5, 1, 1),
)

# f = 0.1 cos x1 + 0.05 sin x2
CONFORMAL_2D_MODES = (
    FourierMode(0.1, (1, 0), 0.0),
    FourierMode(0.05, (0, 1), -math.pi / 2),
)


def perturbed_3d(resolution=24):
    grid = GridSpec(3, (resolution,) * 3)
    return metric_from_spec(MetricSpec("perturbation", PERTURBED_3D_MODES), grid)


def perturbed_2d(resolution=64):
    grid = GridSpec(2, (resolution,) * 2)
    return metric_from_spec(MetricSpec("perturbation", PERTURBED_2D_MODES), grid)


def conformal_2d(resolution=64):
    grid = GridSpec(2, (resolution,) * 2)
    return metric_from_spec(MetricSpec("conformal", CONFORMAL_2D_MODES), grid)


def calibration_oneform(grid, seed):
    """Low-mode random one-form plus a constant part.

    The constant part keeps Ric(theta^#, .) comparable to Delta_A theta, so
    the wrong Ricci sign in the Weitzenboeck formula shows an O(0.1) residual.
    """
    const = np.zeros((grid.dimension,) + grid.shape)
    const[0] = 1.0
    const[1] = 0.5
    return random_oneform(grid, seed, 1, 1.0) + OneForm(grid, const)
