"""Shared fixtures for the isolab test suite"""

import random
from fractions import Fraction

import numpy as np
import pytest

from isolab.algebra_core import object_matrix


@pytest.fixture
def rng():
    return random.Random(7)


@pytest.fixture
def np_rng():
    return np.random.default_rng(7)


def rational_matrix(rng: random.Random, m: int) -> np.ndarray:
    return object_matrix([[Fraction(rng.randint(-5, 5), rng.randint(1, 3)) for _ in range(m)] for _ in range(m)])


def complex_matrix(rng: np.random.Generator, m: int, scale: float = 0.5) -> np.ndarray:
    return scale * (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m)))


@pytest.fixture
def random_rational_matrix(rng):
    return lambda m: rational_matrix(rng, m)


@pytest.fixture
def random_complex_matrix(np_rng):
    return lambda m, scale=0.5: complex_matrix(np_rng, m, scale)
