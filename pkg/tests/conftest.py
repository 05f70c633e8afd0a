import random

import pytest

from ofw.modmath import DEFAULT_MODULUS
from ofw.sharing.base import SchemeConfig


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)


@pytest.fixture
def shamir_small():
    return SchemeConfig("shamir", m=3, t=2, modulus=11)


@pytest.fixture
def shamir_default():
    return SchemeConfig("shamir", m=3, t=2, modulus=DEFAULT_MODULUS)


@pytest.fixture
def additive3():
    return SchemeConfig("additive", m=3, modulus=DEFAULT_MODULUS)
