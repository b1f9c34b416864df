import numpy as np
import pytest

from projrecover.exterior import MultiVector, span_to_extensor
from projrecover.projection import ProjectionOperator
from projrecover.recovery import ProjectionPair


def cvec(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_mv(rng, dim, grade):
    from math import comb

    return MultiVector(dim, grade, cvec(rng, comb(dim, grade)))


def random_extensor(rng, dim, grade):
    if grade == 0:
        return MultiVector.scalar(dim, complex(cvec(rng, 1)[0]))
    return span_to_extensor(cvec(rng, grade, dim))


def random_pair(rng, m):
    return ProjectionPair(ProjectionOperator.random(m, rng), ProjectionOperator.random(m, rng))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
