import numpy as np
import pytest

from hybridvasc.fully_discrete import FdProblem, solve_fd
from hybridvasc.grid import UniformGrid, decompose_revs
from hybridvasc.hybrid import HybridSetup
from hybridvasc.metrics import fd_flux_report
from hybridvasc.network import VascularNetwork, network_from_dict, split_by_threshold
from hybridvasc.synthetic import generate_synthetic, reference_spec

BOX = ((0.0, 0.0, 0.0), (4.0e-4, 4.0e-4, 4.0e-4))
REFERENCE_SEED = 1


def make_network(nodes, segments, bp=None, cls=None):
    """Build a network from positions and (a, b, radius) index triples."""
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    bp = np.full(n, np.nan) if bp is None else np.asarray(bp, dtype=float)
    cls = np.full(n, "capillary", dtype=object) if cls is None else np.asarray(cls, dtype=object)
    conn = [(a, b) for a, b, _ in segments]
    radius = [r for _, _, r in segments]
    return VascularNetwork(np.arange(n), nodes, bp, cls, np.arange(len(conn)), conn, radius)


@pytest.fixture
def two_node_doc():
    return {
        "nodes": [
            {"id": 1, "x": 0.0, "y": 0.0, "z": 0.0, "boundary_pressure": 100.0},
            {"id": 2, "x": 1.0e-4, "y": 0.0, "z": 0.0, "boundary_pressure": 0.0},
        ],
        "segments": [{"id": 10, "n1": 1, "n2": 2, "radius": 4.0e-6}],
    }


@pytest.fixture
def two_node(two_node_doc):
    return network_from_dict(two_node_doc)


@pytest.fixture
def y_network():
    """Parent at p = 2, two children at p = 0, equal radii and lengths."""
    L = 1.0e-4
    nodes = [(0, 0, 0), (-L, 0, 0), (L * 0.5, L * np.sqrt(3) / 2, 0),
             (L * 0.5, -L * np.sqrt(3) / 2, 0)]
    return make_network(nodes, [(1, 0, 4e-6), (0, 2, 4e-6), (0, 3, 4e-6)],
                        bp=[np.nan, 2.0, 0.0, 0.0])


@pytest.fixture(scope="session")
def reference_net():
    return generate_synthetic(reference_spec(), REFERENCE_SEED)


@pytest.fixture(scope="session")
def reference_split(reference_net):
    return split_by_threshold(reference_net, 7.0e-6)


@pytest.fixture(scope="session")
def setup16(reference_net, reference_split):
    grid = UniformGrid(*BOX, (16, 16, 16))
    large, cap = reference_split
    revs = decompose_revs(grid, (2, 2, 2), reference_net, cap, large)
    return HybridSetup(reference_net, revs, large_ids=large, capillary_ids=cap)


@pytest.fixture(scope="session")
def fd16(reference_net, setup16):
    prob = FdProblem(reference_net, setup16.grid, capillary_ids=setup16.capillary_ids)
    sol = solve_fd(prob)
    return prob, sol, fd_flux_report(prob, sol, setup16.revs, setup16.large_ids)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: (int(s.split()[1].rstrip("ab:")), s)):
            terminalreporter.write_line(line)
