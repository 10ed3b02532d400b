import math

import numpy as np
import pytest

import ksharmonic as kh


def make_spaces(seed=7):
    rng = np.random.default_rng(seed)
    tree = kh.random_tree(rng, n_leaves=5)
    return {
        "R2": kh.EuclideanSpace(2),
        "tripod": kh.tripod(),
        "tree5": tree,
        "H2": kh.HyperbolicPlane(),
        "tree_x_R": kh.ProductSpace([kh.tripod(), kh.EuclideanSpace(1)]),
    }


SPACES = make_spaces()


@pytest.fixture(params=sorted(SPACES))
def space(request):
    return SPACES[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def outer_ring(n, m=None):
    m = n if m is None else m
    return [v for v in range(n * m) if v // m in (0, n - 1) or v % m in (0, m - 1)]


def sector_problem(n, T=None):
    """Grid into the tripod: boundary ring sent to the tip of one of three legs by angle."""
    T = kh.tripod() if T is None else T
    g = kh.grid_graph(n)
    bd = outer_ring(n)
    omega = kh.DomainSpec([v for v in range(g.n) if v not in bd], g.n)
    c = (n - 1) / 2

    def sector(v):
        i, j = divmod(v, n)
        return int((math.atan2(i - c, j - c) % (2 * math.pi)) // (2 * math.pi / 3))

    data = {v: T.leg_point(sector(v), 1.0) for v in bd}
    return g, omega, T, data


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
