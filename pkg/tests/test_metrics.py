import pytest
from hypothesis import given, settings, strategies as st

from conftest import line_device, make_device
from qhalloc import metrics
from qhalloc.metrics import cfm, compactness, cri, cri_single, density, partition_metrics
from qhalloc.topology import ValidationError, generate_topology, subgraph

K4_LINKS = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


class TestDensity:
    def test_complete_graph(self):
        g = make_device(4, K4_LINKS)
        assert density(subgraph(g, range(4))) == 1.0

    def test_path_of_three(self):
        g = line_device(3)
        assert density(subgraph(g, range(3))) == pytest.approx(2 / 3)

    def test_single_link(self):
        g = line_device(2)
        assert density(subgraph(g, range(2))) == 1.0

    def test_single_qubit_rejected(self):
        g = line_device(3)
        with pytest.raises(ValidationError, match="cri_single"):
            density(subgraph(g, {1}))


class TestCompactness:
    def test_path_of_three(self):
        g = line_device(3)
        assert compactness(subgraph(g, range(3))) == 1.0

    def test_complete_graph(self):
        g = make_device(4, K4_LINKS)
        assert compactness(subgraph(g, range(4))) == pytest.approx(1 / 3)

    def test_single_link(self):
        g = line_device(2)
        assert compactness(subgraph(g, range(2))) == 1.0

    def test_disconnected_rejected(self, line5):
        with pytest.raises(ValidationError, match="disconnected"):
            compactness(subgraph(line5, {0, 4}))


class TestCfm:
    def test_degree_two(self):
        g = line_device(3, cnot=0.01, readout=0.02)
        # middle qubit: degree 2, avg cnot 0.01, readout 0.02
        assert cfm(g, 1) == pytest.approx(2.97)

    def test_degree_zero_convention(self):
        from qhalloc.topology import HardwareGraph

        g = HardwareGraph(1, [], {}, {0: 0.0})
        assert cfm(g, 0) == 1.0

    def test_degree_three(self):
        g = make_device(4, [(0, 1), (0, 2), (0, 3)], cnot=0.015, readout=0.025)
        assert cfm(g, 0) == pytest.approx(3.96)


class TestCri:
    def test_whole_device_is_one(self):
        for seed in range(5):
            g = generate_topology("heavy-hex-27", seed=seed)
            assert cri(subgraph(g, g.qubits), g) == pytest.approx(1.0, abs=1e-12)

    def test_line5_prefix_hand_value(self, line5):
        # D=2/3, C=1, E=0.01, R=0.02 against device D=0.4, C=1: (2/3+0.97)/(0.4+0.97)
        value = cri(subgraph(line5, {0, 1, 2}), line5)
        assert value == pytest.approx(491 / 411, abs=1e-12)

    def test_hierarchy_communities_above_one(self, hh27, hh27_tree):
        for node in hh27_tree.nodes:
            if node is hh27_tree.root or node.size < 2:
                continue
            assert cri(subgraph(hh27, node.qubits), hh27) > 1.0

    def test_disconnected_rejected(self, line5):
        with pytest.raises(ValidationError):
            cri(subgraph(line5, {0, 4}), line5)

    def test_non_positive_denominator_rejected(self):
        g = make_device(3, [(0, 1), (1, 2)], cnot=1.0, readout=1.0)
        with pytest.raises(ValidationError, match="not positive"):
            cri(subgraph(g, {0, 1}), g, alpha=2.0)

    def test_alpha_weighting_changes_value(self, line5):
        view = subgraph(line5, {0, 1, 2})
        assert cri(view, line5, alpha=0.5) != cri(view, line5, alpha=2.0)


class TestCriSingle:
    def test_symmetric_device_gives_one(self):
        g = line_device(2, cnot=0.01, readout=0.02)
        # K2 has D/C = 1 and every error equals the device average.
        assert cri_single(0, g) == pytest.approx(1.0)

    def test_lower_errors_above_one(self):
        g = line_device(2, cnot=0.01, readout={0: 0.01, 1: 0.03})
        assert cri_single(0, g) > 1.0

    def test_higher_errors_below_one(self):
        g = line_device(2, cnot=0.01, readout={0: 0.03, 1: 0.01})
        assert cri_single(0, g) < 1.0


class TestProperties:
    @given(st.integers(0, 1000))
    @settings(max_examples=40, deadline=None)
    def test_whole_device_identity_random_calibrations(self, seed):
        g = generate_topology("line", n=6, seed=seed)
        assert abs(cri(subgraph(g, g.qubits), g) - 1.0) < 1e-12

    @given(st.integers(0, 200), st.floats(0.25, 4.0), st.floats(0.1, 0.9))
    @settings(max_examples=60, deadline=None)
    def test_lower_partition_errors_increase_cri(self, seed, alpha, shrink):
        g = generate_topology("heavy-hex-27", seed=seed)
        qubits = frozenset({0, 1, 2, 4})
        base = metrics.cri_of_set(g, qubits, alpha)
        better_cnot = dict(g.cnot_error)
        better_readout = dict(g.readout_error)
        for link in g.links:
            if link[0] in qubits and link[1] in qubits:
                better_cnot[link] *= shrink
        for q in qubits:
            better_readout[q] *= shrink
        from qhalloc.topology import HardwareGraph

        g2 = HardwareGraph(g.qubit_count, g.links, better_cnot, better_readout, "improved")
        assert metrics.cri_of_set(g2, qubits, alpha) > base

    @given(st.integers(0, 500), st.integers(2, 8))
    @settings(max_examples=60, deadline=None)
    def test_density_bounds_connected(self, seed, size):
        g = generate_topology("heavy-hex-27", seed=seed)
        from qhalloc.allocators import enumerate_connected_sets

        for i, qs in enumerate(enumerate_connected_sets(g.adjacency, frozenset(g.qubits), size)):
            if i > 10:
                break
            view = subgraph(g, qs)
            d = density(view)
            c = compactness(view)
            assert 2 / size - 1e-12 <= d <= 1.0
            assert 0.0 < c <= 1.0


class TestPartitionMetricsRecord:
    def test_fields_consistent(self, line5):
        view = subgraph(line5, {0, 1, 2})
        record = partition_metrics(view, line5)
        assert record.density == pytest.approx(2 / 3)
        assert record.compactness == 1.0
        assert record.avg_cnot_error == pytest.approx(0.01)
        assert record.avg_readout_error == pytest.approx(0.02)
        assert record.cri == pytest.approx(491 / 411)
        assert record.alpha == 1.0
