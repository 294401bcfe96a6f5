import pytest

from blindtrace.crypto import SeededRandomSource
from blindtrace.field import Field


@pytest.fixture
def rng():
    return SeededRandomSource("tests")


@pytest.fixture
def f7():
    return Field(7)
