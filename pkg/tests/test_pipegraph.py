import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import brute_force_paths, random_int_network, segment_with_weight
from stmtmv.errors import InvalidInputError
from stmtmv.pipegraph import (
    DEFAULT_TRIPLET,
    PipeNetwork,
    PipeSegment,
    PowerTriplet,
    TaskCoupling,
    correlation_matrix,
    k_shortest_paths,
    laplacian,
    pipe_weight,
    power_triplet_scan,
    station_correlation,
    upper_pearson,
)

triplet_entries = st.integers(-5, 5)


def test_pipe_weight_examples():
    assert pipe_weight(PipeSegment("a", "b", 4, 2, 1)) == pytest.approx(1.0)
    assert pipe_weight(PipeSegment("a", "b", 7.3, 150, 12), PowerTriplet(0, 0, 0)) == 1.0
    assert pipe_weight(PipeSegment("a", "b", 2, 3, 5), PowerTriplet(1, 2, 2)) == pytest.approx(300.0)


def test_pipe_rejects_non_positive():
    with pytest.raises(InvalidInputError):
        PipeSegment("a", "b", 0.0, 100, 3)
    with pytest.raises(InvalidInputError):
        PowerTriplet(6, 0, 0)


@settings(max_examples=60, deadline=None)
@given(triplet_entries, triplet_entries, triplet_entries, st.integers(-2, 2), st.integers(-2, 2), st.integers(-2, 2))
def test_pipe_weight_multiplicative(d1, l1, a1, d2, l2, a2):
    if not all(-5 <= v <= 5 for v in (d1 + d2, l1 + l2, a1 + a2)):
        return
    p = PipeSegment("a", "b", 1.7, 2.3, 3.1)
    t1, t2 = PowerTriplet(d1, l1, a1), PowerTriplet(d2, l2, a2)
    assert pipe_weight(p, t1 + t2) == pytest.approx(pipe_weight(p, t1) * pipe_weight(p, t2), rel=1e-12)


def test_single_edge_path():
    net = PipeNetwork([segment_with_weight("x", "y", 5)])
    paths = k_shortest_paths(net, "x", "y", 1)
    assert len(paths) == 1 and paths[0].nodes == ("x", "y") and paths[0].cost == pytest.approx(5)


def test_three_route_path_costs(three_route_network):
    paths = k_shortest_paths(three_route_network, "S1", "S2", 3)
    assert [p.cost for p in paths] == pytest.approx([3, 4, 6], abs=1e-12)
    assert paths[0].nodes == ("S1", "a", "S2")


def test_three_route_correlations(three_route_network):
    assert station_correlation(three_route_network, "S1", "S2", k=1) == pytest.approx(3.0, abs=1e-12)
    assert station_correlation(three_route_network, "S1", "S2", k=3) == pytest.approx(13 / 3, abs=1e-12)
    # only three routes exist: k=5 averages over those
    assert station_correlation(three_route_network, "S1", "S2", k=5) == pytest.approx(13 / 3, abs=1e-12)


def test_two_node_any_k():
    net = PipeNetwork([segment_with_weight("u", "v", 2.5)], {"A": "u", "B": "v"})
    for k in (1, 2, 7):
        assert station_correlation(net, "A", "B", k) == pytest.approx(2.5)


def test_disconnected_pair():
    net = PipeNetwork([segment_with_weight("u", "v", 1), segment_with_weight("p", "q", 1)], {"A": "u", "B": "q"})
    assert k_shortest_paths(net, "u", "q", 3) == []
    assert station_correlation(net, "A", "B") == 0.0


def test_unmapped_station(three_route_network):
    with pytest.raises(InvalidInputError):
        station_correlation(three_route_network, "S1", "S9")


@pytest.mark.parametrize("seed", range(25))
def test_yen_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    net = random_int_network(rng, int(rng.integers(4, 9)))
    nodes = sorted(net.nodes)
    src, dst = nodes[0], nodes[-1]
    weights = net.edge_weights(DEFAULT_TRIPLET)
    every = brute_force_paths(net, weights, src, dst)
    for k in (1, 3, 5):
        got = k_shortest_paths(net, src, dst, k)
        assert [(p.cost, p.nodes, p.edges) for p in got] == every[:k]


@pytest.mark.parametrize("seed", range(10))
def test_yen_prefix_stability_and_looplessness(seed):
    rng = np.random.default_rng(100 + seed)
    net = random_int_network(rng, 8, p_edge=0.5)
    nodes = sorted(net.nodes)
    long = k_shortest_paths(net, nodes[1], nodes[-2], 8)
    for k in range(1, 8):
        assert k_shortest_paths(net, nodes[1], nodes[-2], k) == long[:k]
    costs = [p.cost for p in long]
    assert costs == sorted(costs)
    assert all(len(set(p.nodes)) == len(p.nodes) for p in long)


def test_parallel_edges_are_distinct_paths():
    net = PipeNetwork([segment_with_weight("a", "b", 1), segment_with_weight("a", "b", 2)])
    paths = k_shortest_paths(net, "a", "b", 3)
    assert [p.cost for p in paths] == [1, 2]
    assert [p.edges for p in paths] == [(0,), (1,)]


def test_correlation_matrix_two_stations():
    net = PipeNetwork([segment_with_weight("u", "v", 3)], {"A": "u", "B": "v"})
    cp = correlation_matrix(net, ["A", "B"], k=1)
    np.testing.assert_allclose(cp.C, [[0, 3], [3, 0]])
    np.testing.assert_allclose(cp.L, [[3, -3], [-3, 3]])
    cpn = correlation_matrix(net, ["A", "B"], k=1, normalize=True)
    np.testing.assert_allclose(cpn.C, [[0, 1], [1, 0]])


def _station_network(rng, n_nodes=9, n_stations=4):
    net = random_int_network(rng, n_nodes, p_edge=0.5)
    nodes = sorted(net.nodes)
    stations = {f"S{i}": nodes[j] for i, j in enumerate(rng.choice(n_nodes, n_stations, replace=False))}
    return PipeNetwork(net.segments, stations, net.nodes), sorted(stations)


@pytest.mark.parametrize("seed", range(8))
def test_correlation_matrix_pairwise(seed):
    rng = np.random.default_rng(seed)
    net, stations = _station_network(rng)
    cp = correlation_matrix(net, stations, k=3)
    for i, j in itertools.combinations(range(len(stations)), 2):
        assert cp.C[i, j] == pytest.approx(station_correlation(net, stations[i], stations[j], 3))
    np.testing.assert_allclose(cp.C, cp.C.T)
    assert np.all(np.diag(cp.C) == 0) and np.all(cp.C >= 0)
    np.testing.assert_allclose(cp.L.sum(axis=1), 0, atol=1e-10)
    assert np.linalg.eigvalsh(cp.L).min() >= -1e-10


@pytest.mark.parametrize("seed", range(5))
def test_edge_scaling_scales_coupling(seed):
    rng = np.random.default_rng(seed)
    net, stations = _station_network(rng)
    a = 2.5
    # scaling the diameter by sqrt(a) scales every default-triplet weight by a
    scaled = PipeNetwork(
        [PipeSegment(s.a, s.b, s.length, s.diameter * np.sqrt(a), s.age) for s in net.segments],
        net.station_nodes, net.nodes,
    )
    C1 = correlation_matrix(net, stations, k=2).C
    C2 = correlation_matrix(scaled, stations, k=2).C
    np.testing.assert_allclose(C2, a * C1, rtol=1e-10)


@pytest.mark.parametrize("seed", range(20))
def test_laplacian_trace_identity(seed):
    rng = np.random.default_rng(seed)
    M, D = int(rng.integers(2, 7)), int(rng.integers(1, 10))
    A = rng.random((M, M))
    C = np.triu(A, 1) + np.triu(A, 1).T
    W = rng.normal(size=(D, M))
    L = laplacian(C)
    lhs = np.trace(W @ L @ W.T)
    rhs = 0.5 * sum(C[l, m] * np.sum((W[:, l] - W[:, m]) ** 2) for l in range(M) for m in range(M))
    assert lhs == pytest.approx(rhs, abs=1e-10)
    assert np.linalg.eigvalsh(L).min() >= -1e-10


def test_uniform_coupling_keeps_total_degree():
    C = np.array([[0, 1, 4], [1, 0, 2], [4, 2, 0.0]])
    u = TaskCoupling.uniform_like(TaskCoupling.from_matrix(C))
    assert np.trace(np.diag(u.C.sum(axis=1))) == pytest.approx(C.sum())
    off = u.C[~np.eye(3, dtype=bool)]
    assert np.allclose(off, off[0])


def test_upper_pearson_constant_is_zero():
    A = np.ones((3, 3))
    B = np.arange(9.0).reshape(3, 3)
    assert upper_pearson(A, B + B.T) == 0.0


def _scan_network(rng, n_nodes=12, n_stations=4):
    nodes = [f"n{i}" for i in range(n_nodes)]
    segs = []
    for i in range(1, n_nodes):
        j = int(rng.integers(0, i))
        segs.append(PipeSegment(nodes[i], nodes[j], rng.uniform(0.2, 3), rng.uniform(50, 600), rng.uniform(1, 60)))
    for _ in range(n_nodes // 2):
        i, j = rng.choice(n_nodes, 2, replace=False)
        segs.append(PipeSegment(nodes[i], nodes[j], rng.uniform(0.2, 3), rng.uniform(50, 600), rng.uniform(1, 60)))
    stations = {f"S{s}": nodes[j] for s, j in enumerate(rng.choice(n_nodes, n_stations, replace=False))}
    return PipeNetwork(segs, stations), sorted(stations)


def test_scan_self_correlation_identity_triplet():
    rng = np.random.default_rng(3)
    net, stations = _scan_network(rng)
    target = correlation_matrix(net, stations, k=2, t=PowerTriplet(0, 0, 0)).C
    # a small neighbourhood is enough to check the scoring
    trips = [PowerTriplet(d, l, a) for d in (-1, 0, 1) for l in (-1, 0, 1) for a in (-1, 0, 1)]
    ranked = power_triplet_scan(net, stations, target, k=2, triplets=trips)
    score = dict(ranked)[PowerTriplet(0, 0, 0)]
    assert score == pytest.approx(1.0, abs=1e-12)
    assert ranked[0][1] == pytest.approx(1.0, abs=1e-12)
    scores = [s for _, s in ranked]
    assert scores == sorted(scores, reverse=True)


def test_scan_scale_invariance():
    rng = np.random.default_rng(4)
    net, stations = _scan_network(rng)
    corr = np.corrcoef(rng.normal(size=(len(stations), 50)))
    trips = [PowerTriplet(d, -1, a) for d in (1, 2) for a in (-1, 0)]
    base = power_triplet_scan(net, stations, corr, k=2, triplets=trips)
    scaled_net = PipeNetwork(
        [PipeSegment(s.a, s.b, s.length, s.diameter * 3.0, s.age) for s in net.segments], net.station_nodes
    )
    # diameter x3 scales each triplet's weights by a triplet-specific constant
    scaled = power_triplet_scan(scaled_net, stations, corr, k=2, triplets=trips)
    assert [t for t, _ in base] == [t for t, _ in scaled]
    np.testing.assert_allclose([s for _, s in base], [s for _, s in scaled], atol=1e-10)


def test_scan_input_checks():
    rng = np.random.default_rng(5)
    net, stations = _scan_network(rng, n_stations=3)
    with pytest.raises(InvalidInputError):
        power_triplet_scan(net, stations[:2], np.eye(2))
    with pytest.raises(InvalidInputError):
        power_triplet_scan(net, stations, np.arange(9.0).reshape(3, 3))
