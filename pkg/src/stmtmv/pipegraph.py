"""Station coupling derived from the pipe network.

Pipes are weighted by a power law of diameter, length and age.  The
coupling between two stations is the mean total weight of the ``k``
cheapest loopless paths joining them (Yen's algorithm), and the resulting
matrix ``C`` feeds the graph Laplacian ``L = D - C`` used by the solver.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidInputError

POWER_RANGE = range(-5, 6)


@dataclass(frozen=True)
class PipeSegment:
    a: str
    b: str
    length: float
    diameter: float
    age: float

    def __post_init__(self):
        for name in ("length", "diameter", "age"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InvalidInputError(f"pipe {self.a}-{self.b}: {name} must be positive, got {v}")


@dataclass(frozen=True, order=True)
class PowerTriplet:
    pow_d: int = 2
    pow_len: int = -1
    pow_age: int = -1

    def __post_init__(self):
        for v in (self.pow_d, self.pow_len, self.pow_age):
            if int(v) != v or not -5 <= v <= 5:
                raise InvalidInputError(f"power triplet entries must be integers in [-5, 5], got {self}")

    def __add__(self, other: "PowerTriplet") -> "PowerTriplet":
        return PowerTriplet(self.pow_d + other.pow_d, self.pow_len + other.pow_len, self.pow_age + other.pow_age)

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.pow_d, self.pow_len, self.pow_age)


DEFAULT_TRIPLET = PowerTriplet(2, -1, -1)


def pipe_weight(p: PipeSegment, t: PowerTriplet = DEFAULT_TRIPLET) -> float:
    """``d**pow_d * len**pow_len * age**pow_age``; (2, -1, -1) gives d^2 / (len * age)."""
    if p.diameter <= 0 or p.length <= 0 or p.age <= 0:
        raise InvalidInputError("pipe attributes must be positive")
    num, den = 1.0, 1.0
    for value, power in ((p.diameter, t.pow_d), (p.length, t.pow_len), (p.age, t.pow_age)):
        if power >= 0:
            num *= value**power
        else:
            den *= value**-power
    return num / den


@dataclass(frozen=True)
class Path:
    cost: float
    nodes: tuple[str, ...]
    edges: tuple[int, ...]

    def key(self):
        return (self.cost, self.nodes, self.edges)


@dataclass
class PipeNetwork:
    """Undirected multigraph of pipe segments with stations pinned to nodes."""

    segments: list[PipeSegment]
    station_nodes: dict[str, str] = field(default_factory=dict)
    nodes: set[str] = field(default_factory=set)

    def __post_init__(self):
        self.nodes = set(self.nodes)
        for s in self.segments:
            self.nodes.update((s.a, s.b))
        for sid, node in self.station_nodes.items():
            if node not in self.nodes:
                raise InvalidInputError(f"station {sid} maps to unknown node {node}")
        # adjacency: node -> list of (neighbour, edge index)
        self._adj: dict[str, list[tuple[str, int]]] = {n: [] for n in self.nodes}
        for idx, s in enumerate(self.segments):
            if s.a == s.b:
                continue
            self._adj[s.a].append((s.b, idx))
            self._adj[s.b].append((s.a, idx))
        for n in self._adj:
            self._adj[n].sort()

    def edge_weights(self, t: PowerTriplet = DEFAULT_TRIPLET) -> np.ndarray:
        return np.array([pipe_weight(s, t) for s in self.segments])

    def neighbors(self, node: str) -> list[tuple[str, int]]:
        return self._adj[node]


def _dijkstra(net: PipeNetwork, weights, src, dst, banned_nodes, banned_edges):
    """Cheapest path src -> dst; ties resolved by (node sequence, edge sequence).

    Labels compare as (cost, nodes, edges); that order is preserved when a
    common edge is appended, so the first settled label of ``dst`` is the
    lexicographically smallest among the cheapest paths.
    """
    heap = [(0.0, (src,), ())]
    settled = set()
    while heap:
        cost, nodes, edges = heapq.heappop(heap)
        u = nodes[-1]
        if u in settled:
            continue
        settled.add(u)
        if u == dst:
            return cost, nodes, edges
        for v, e in net.neighbors(u):
            if v in settled or v in banned_nodes or e in banned_edges:
                continue
            heapq.heappush(heap, (cost + weights[e], nodes + (v,), edges + (e,)))
    return None


def _path_cost(weights, edges) -> float:
    total = 0.0
    for e in edges:
        total += weights[e]
    return total


def k_shortest_paths(
    net: PipeNetwork, src: str, dst: str, k: int, t: PowerTriplet = DEFAULT_TRIPLET, weights=None
) -> list[Path]:
    """Yen's loopless k-shortest paths under pipe weights.

    Returns fewer than ``k`` paths when the graph has fewer, and an empty
    list when ``src`` and ``dst`` are disconnected.
    """
    if src not in net.nodes or dst not in net.nodes:
        raise InvalidInputError(f"unknown node in pair ({src}, {dst})")
    if src == dst:
        raise InvalidInputError("source and destination must differ")
    if k < 1:
        raise InvalidInputError("k must be at least 1")
    if weights is None:
        weights = net.edge_weights(t)

    first = _dijkstra(net, weights, src, dst, frozenset(), frozenset())
    if first is None:
        return []
    found = [Path(_path_cost(weights, first[2]), first[1], first[2])]
    seen = {(first[1], first[2])}
    candidates: list[tuple] = []

    while len(found) < k:
        last = found[-1]
        for i in range(len(last.nodes) - 1):
            root_nodes = last.nodes[: i + 1]
            root_edges = last.edges[:i]
            banned_edges = {
                p.edges[i] for p in found if p.nodes[: i + 1] == root_nodes and p.edges[:i] == root_edges
            }
            spur = _dijkstra(net, weights, root_nodes[-1], dst, frozenset(root_nodes[:-1]), banned_edges)
            if spur is None:
                continue
            nodes = root_nodes + spur[1][1:]
            edges = root_edges + spur[2]
            if (nodes, edges) in seen:
                continue
            seen.add((nodes, edges))
            heapq.heappush(candidates, (_path_cost(weights, edges), nodes, edges))
        if not candidates:
            break
        cost, nodes, edges = heapq.heappop(candidates)
        found.append(Path(cost, nodes, edges))
    return found


def _station_node(net: PipeNetwork, station: str) -> str:
    try:
        return net.station_nodes[station]
    except KeyError:
        raise InvalidInputError(f"station {station!r} is not mapped to a pipe node") from None


def station_correlation(
    net: PipeNetwork, i: str, j: str, k: int = 3, t: PowerTriplet = DEFAULT_TRIPLET, weights=None
) -> float:
    """Mean total weight of the top-``k`` cheapest paths between two stations.

    Averages over the paths that exist when there are fewer than ``k``;
    disconnected stations get 0.
    """
    a, b = _station_node(net, i), _station_node(net, j)
    if i == j:
        raise InvalidInputError("station correlation needs two distinct stations")
    if a == b:
        return 0.0
    paths = k_shortest_paths(net, a, b, k, t, weights=weights)
    if not paths:
        return 0.0
    return sum(p.cost for p in paths) / len(paths)


def laplacian(C: np.ndarray) -> np.ndarray:
    C = np.asarray(C, dtype=float)
    return np.diag(C.sum(axis=1)) - C


@dataclass(frozen=True)
class TaskCoupling:
    C: np.ndarray
    L: np.ndarray
    k: int = 0

    @classmethod
    def from_matrix(cls, C, k: int = 0) -> "TaskCoupling":
        C = np.asarray(C, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise InvalidInputError(f"coupling matrix must be square, got shape {C.shape}")
        if not np.allclose(C, C.T) or np.any(C < 0):
            raise InvalidInputError("coupling matrix must be symmetric and non-negative")
        C = 0.5 * (C + C.T)
        np.fill_diagonal(C, 0.0)
        return cls(C, laplacian(C), k)

    @classmethod
    def uniform_like(cls, other: "TaskCoupling") -> "TaskCoupling":
        """Equal off-diagonal coupling with the same total degree as ``other``."""
        M = other.C.shape[0]
        if M < 2:
            return cls.from_matrix(np.zeros((M, M)), other.k)
        c = other.C.sum() / (M * (M - 1))
        return cls.from_matrix(c * (np.ones((M, M)) - np.eye(M)), other.k)

    @property
    def n_tasks(self) -> int:
        return self.C.shape[0]


def correlation_matrix(
    net: PipeNetwork,
    stations: Sequence[str],
    k: int = 3,
    t: PowerTriplet = DEFAULT_TRIPLET,
    normalize: bool = False,
) -> TaskCoupling:
    M = len(stations)
    if M < 2:
        raise InvalidInputError("need at least two stations")
    weights = net.edge_weights(t)
    C = np.zeros((M, M))
    for a, b in itertools.combinations(range(M), 2):
        C[a, b] = C[b, a] = station_correlation(net, stations[a], stations[b], k, t, weights=weights)
    if normalize and C.max() > 0:
        C = C / C.max()
    return TaskCoupling(C, laplacian(C), k)


def upper_pearson(A: np.ndarray, B: np.ndarray) -> float:
    """Pearson correlation between strict upper triangles; 0 if either is constant."""
    iu = np.triu_indices(A.shape[0], k=1)
    a, b = np.asarray(A, dtype=float)[iu], np.asarray(B, dtype=float)[iu]
    a, b = a - a.mean(), b - b.mean()
    na, nb = np.sqrt(np.dot(a, a)), np.sqrt(np.dot(b, b))
    scale = max(np.abs(A).max(), np.abs(B).max(), 1e-300)
    if na <= 1e-12 * scale * a.size or nb <= 1e-12 * scale * b.size:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def all_triplets() -> Iterable[PowerTriplet]:
    for d, l, g in itertools.product(POWER_RANGE, repeat=3):
        yield PowerTriplet(d, l, g)


def power_triplet_scan(
    net: PipeNetwork,
    stations: Sequence[str],
    corr_mat: np.ndarray,
    k: int = 3,
    triplets: Iterable[PowerTriplet] | None = None,
) -> list[tuple[PowerTriplet, float]]:
    """Rank power triplets by how well their coupling matrix tracks ``corr_mat``.

    ``corr_mat`` is the empirical Pearson matrix of station readings; the
    score of a triplet is the Pearson correlation between the upper
    triangles of ``corr_mat`` and the triplet's coupling matrix.
    """
    corr_mat = np.asarray(corr_mat, dtype=float)
    M = len(stations)
    if corr_mat.shape != (M, M):
        raise InvalidInputError(f"corr_mat shape {corr_mat.shape} does not match {M} stations")
    if not np.allclose(corr_mat, corr_mat.T):
        raise InvalidInputError("corr_mat must be symmetric")
    if M < 3:
        raise InvalidInputError("the scan needs at least three stations")

    # path structure depends on the weights, so every triplet is a fresh search
    results = []
    for t in triplets if triplets is not None else all_triplets():
        coupling = correlation_matrix(net, stations, k, t)
        results.append((t, upper_pearson(corr_mat, coupling.C)))
    results.sort(key=lambda r: (-r[1], r[0].as_tuple()))
    return results


def read_network(pipes: Iterable[Mapping[str, str]], stations: Mapping[str, str]) -> PipeNetwork:
    segments = [
        PipeSegment(
            str(r["node_a"]), str(r["node_b"]),
            float(r["length_km"]), float(r["diameter_mm"]), float(r["age_years"]),
        )
        for r in pipes
    ]
    return PipeNetwork(segments, dict(stations))
