import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dimerpack.lattice import build_pq_tiling, square_grid
from dimerpack.packing import solve_double_packing
from dimerpack.superposition import superpose, temperley_trim


def _stack(g):
    p = solve_double_packing(g)
    sg = superpose(g, p)
    return g, p, sg, temperley_trim(sg)


@pytest.fixture(scope="session")
def sq1():
    return _stack(square_grid(1))


@pytest.fixture(scope="session")
def sq3():
    return _stack(square_grid(3))


@pytest.fixture(scope="session")
def sq4():
    return _stack(square_grid(4))


@pytest.fixture(scope="session")
def pq372():
    return _stack(build_pq_tiling(3, 7, 2))


@pytest.fixture(scope="session")
def pq373():
    return _stack(build_pq_tiling(3, 7, 3))
