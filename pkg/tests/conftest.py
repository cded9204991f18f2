import itertools

import numpy as np
import pytest

from stmtmv.pipegraph import PipeNetwork, PipeSegment


def segment_with_weight(a, b, w):
    """A pipe whose default-triplet weight d^2/(len*age) equals ``w``."""
    return PipeSegment(a, b, length=float(w), diameter=float(w), age=1.0)


@pytest.fixture
def three_route_network():
    """Three disjoint S1-S2 routes with pipe weights (2,1), (1,2,1), (2,2,2)."""
    segs = [
        segment_with_weight("S1", "a", 2), segment_with_weight("a", "S2", 1),
        segment_with_weight("S1", "b", 1), segment_with_weight("b", "c", 2), segment_with_weight("c", "S2", 1),
        segment_with_weight("S1", "d", 2), segment_with_weight("d", "e", 2), segment_with_weight("e", "S2", 2),
    ]
    return PipeNetwork(segs, {"S1": "S1", "S2": "S2"})


def random_int_network(rng, n_nodes, p_edge=0.45, max_w=4, parallel=0.1):
    """Random multigraph with small integer weights so that cost ties are common."""
    nodes = [f"n{i}" for i in range(n_nodes)]
    segs = []
    for a, b in itertools.combinations(nodes, 2):
        if rng.random() < p_edge:
            segs.append(segment_with_weight(a, b, int(rng.integers(1, max_w + 1))))
            if rng.random() < parallel:
                segs.append(segment_with_weight(a, b, int(rng.integers(1, max_w + 1))))
    return PipeNetwork(segs, {}, set(nodes))


def brute_force_paths(net, weights, src, dst):
    """Every loopless path by DFS, sorted by (cost, nodes, edges)."""
    out = []

    def dfs(node, nodes, edges, cost):
        if node == dst:
            out.append((cost, tuple(nodes), tuple(edges)))
            return
        for v, e in net.neighbors(node):
            if v in nodes:
                continue
            nodes.append(v)
            edges.append(e)
            dfs(v, nodes, edges, cost + weights[e])
            nodes.pop()
            edges.pop()

    dfs(src, [src], [], 0.0)
    return sorted(out)


# filled by tests/test_acceptance.py: (number, name, passed, seconds, detail)
ACCEPTANCE: list[tuple] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, elapsed, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number:2d} {name} ({elapsed:.2f} s): {detail}")
