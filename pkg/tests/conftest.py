import math

import pytest

from convexdiff import fields, geometry


def sigma(z):
    return 1.0 / (1.0 + math.exp(-z))


@pytest.fixture
def unit():
    return geometry.interval()


@pytest.fixture
def square():
    return geometry.unit_cube(2)


@pytest.fixture
def disk():
    return geometry.ball([0.0, 0.0], 1.0)


def logistic(c, time=(0.0, 1.0)):
    return fields.make_field(geometry.interval(), [repr(float(c))], time=time)
