import pytest

from qhalloc import circuits, community, topology


def make_device(n, links, cnot=0.01, readout=0.02, name="test-device"):
    """Device with uniform (or per-link dict) error rates."""
    if not isinstance(cnot, dict):
        cnot = {topology.canonical_link(*l): cnot for l in links}
    if not isinstance(readout, dict):
        readout = {q: readout for q in range(n)}
    return topology.HardwareGraph(n, links, cnot, readout, calibration_id=name)


def line_device(n, cnot=0.01, readout=0.02, name="line-test"):
    return make_device(n, [(i, i + 1) for i in range(n - 1)], cnot, readout, name)


@pytest.fixture(scope="session")
def hh27():
    return topology.generate_topology("heavy-hex-27", seed=1)


@pytest.fixture(scope="session")
def hh27_tree(hh27):
    return community.build_hierarchy(hh27, seed=0)


@pytest.fixture(scope="session")
def corpus():
    return circuits.bundled_corpus()


@pytest.fixture
def line5():
    return line_device(5)
