import numpy as np
import pytest

from hybrid_observer import Digraph, GraphSchedule, SystemModel, design_agent

from _systems import A_EX, C_EX, K_EX, L_EX, NEIGHBORS_EX


@pytest.fixture
def example_model():
    return SystemModel(A_EX, tuple(C_EX))


@pytest.fixture
def example_designs():
    return [design_agent(C, A_EX, L=L, K=K) for C, L, K in zip(C_EX, L_EX, K_EX)]


@pytest.fixture
def example_graph():
    return Digraph(NEIGHBORS_EX)


@pytest.fixture
def example_schedule(example_graph):
    return GraphSchedule.static(example_graph)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[number])
