import numpy as np
import pytest

from gradpd import fields

TRIG_A = [[0.08, -0.05, 0.03], [-0.04, 0.06, 0.05], [0.03, 0.02, -0.07]]
TRIG_K = [[1.3, 0.7, -0.9], [-0.6, 1.1, 0.8], [0.5, -0.4, 1.4]]
TRIG_PHASES = [0.3, 1.1, -0.7]


def make_trig(box=None):
    return fields.trigonometric(TRIG_A, TRIG_K, TRIG_PHASES, box=box)


@pytest.fixture
def trig():
    return make_trig()


@pytest.fixture
def shear():
    return fields.quadratic_shear(0.4)


@pytest.fixture
def all_fields():
    return [
        fields.identity(),
        fields.affine([[1.2, 0.1, 0.0], [0.05, 0.9, 0.1], [0.0, -0.1, 1.1]]),
        fields.quadratic_shear(0.4),
        make_trig(),
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
