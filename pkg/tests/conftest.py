from fractions import Fraction

import pytest

from unimix.core import Alphabet
from unimix.vm import RunBudget, enumerate_programs


@pytest.fixture(scope="session")
def binary_alphabet():
    return Alphabet(num_actions=2, num_observations=1, rewards=(Fraction(0), Fraction(1)))


@pytest.fixture(scope="session")
def budget():
    return RunBudget(32)


@pytest.fixture(scope="session")
def pool6():
    return enumerate_programs(6)


@pytest.fixture(scope="session")
def pool8():
    return enumerate_programs(8)


@pytest.fixture(scope="session")
def pool12():
    return enumerate_programs(12)
