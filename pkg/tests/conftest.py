import numpy as np
import pytest

from condwalk import potential


@pytest.fixture(scope="session")
def table():
    # radius 260 keeps the solve fast; centre values are exact to ~1e-10
    return potential.potential_oracle(260)


@pytest.fixture(scope="session")
def avoid_two(table):
    return potential.build_avoid_set([(0, 0), (1, 0)], 260, table)


@pytest.fixture(scope="session")
def geometry(table):
    from condwalk.excursions import LevelGeometry

    return LevelGeometry(table)
