import numpy as np
import pytest

import uqsubgrad as uq


@pytest.fixture(scope="session")
def unit_measure():
    return uq.ThetaMeasure(0.0, 1.0)


@pytest.fixture(scope="session")
def quad_measure():
    return uq.ThetaMeasure(0.0, 2.0 * np.pi)


@pytest.fixture(scope="session")
def quad_problem(quad_measure):
    return uq.quadratic_problem(1.0, 50.0, quad_measure)


@pytest.fixture(scope="session")
def cut_measure():
    return uq.ThetaMeasure(0.0, 4.0)


@pytest.fixture(scope="session")
def demo_graph():
    return uq.demo_cut_graph((0.0, 4.0))


@pytest.fixture(scope="session")
def demo_setfn(demo_graph):
    return uq.set_function(demo_graph)


@pytest.fixture(scope="session")
def cut_problem(demo_graph, cut_measure):
    return uq.mincut_problem(demo_graph, cut_measure)
