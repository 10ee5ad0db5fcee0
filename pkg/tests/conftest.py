import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from fclmqc.chimera import build_chimera  # noqa: E402
from fclmqc.fcl import FclConfig, generate_instance  # noqa: E402
from fclmqc.ising import IsingProblem  # noqa: E402


def random_problem(graph, rng, fields=True, density=0.6, values=(-2, -1, 1, 2)):
    """Integer-coefficient problem with a random subset of couplers switched on."""
    a = rng.choice(values, graph.num_qubits) * (rng.random(graph.num_qubits) < 0.5) if fields \
        else np.zeros(graph.num_qubits)
    b = rng.choice(values, graph.num_couplers) * (rng.random(graph.num_couplers) < density)
    return IsingProblem(graph, a.astype(float), b.astype(float))


def random_spins(rng, n, count=None):
    shape = (n,) if count is None else (count, n)
    return (2 * rng.integers(0, 2, size=shape) - 1).astype(np.int8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def c4_instance():
    return generate_instance(FclConfig(c=4, alpha=0.1, seed=7))


@pytest.fixture(scope="session")
def cell():
    return build_chimera(1)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
