"""Planted multi-task data on a random pipe network.

The generator instantiates every assumption of the joint model so each
penalty has something to find: a shared sparse row support, per-station
weights that are smooth on the pipe coupling graph, and two views whose
partial predictions agree up to a small disagreement noise.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass

import numpy as np

from ..data import StationDataset
from ..errors import InvalidInputError
from ..pipegraph import DEFAULT_TRIPLET, PipeNetwork, PipeSegment, TaskCoupling, correlation_matrix


@dataclass(frozen=True)
class SyntheticSpec:
    M: int = 6
    D_s: int = 8
    D_t: int = 12
    n_per_station: int = 80
    support: int = 5
    sigma: float = 0.1
    n_nodes: int = 14
    radius: float = 0.45  # connect nodes closer than this in the unit square
    length_range: tuple[float, float] = (0.2, 2.0)  # km
    diameter_range: tuple[float, float] = (100.0, 600.0)  # mm
    age_range: tuple[float, float] = (1.0, 40.0)  # years
    smoothness: float = 0.4  # scale of the graph-smooth per-station deviation
    prior_power: float = 1.0  # deviation covariance is pinv(L) ** prior_power
    view_noise: float = 0.05  # disagreement between the two views' partial predictions
    zones: int = 1  # disconnected supply zones; stations are split evenly across them
    zone_offset: float = 0.0  # std of a per-zone shift of the active weights
    k: int = 3

    def __post_init__(self):
        if self.M < 1 or self.D_s < 0 or self.D_t < 0 or self.D_s + self.D_t < 1:
            raise InvalidInputError("need M >= 1 and at least one feature")
        if not 0 <= self.support <= self.D_s + self.D_t:
            raise InvalidInputError(f"support {self.support} must lie in [0, D={self.D_s + self.D_t}]")
        if self.sigma < 0 or self.smoothness < 0 or self.view_noise < 0 or self.prior_power < 0:
            raise InvalidInputError("noise levels and smoothness must be non-negative")
        if self.n_nodes < self.M:
            raise InvalidInputError(f"{self.n_nodes} nodes cannot host {self.M} stations")
        if not 1 <= self.zones <= self.M or self.zone_offset < 0:
            raise InvalidInputError("zones must lie in [1, M] and zone_offset must be non-negative")
        if self.n_per_station < 2:
            raise InvalidInputError("need at least two samples per station")
        for lo, hi in (self.length_range, self.diameter_range, self.age_range):
            if not 0 < lo <= hi:
                raise InvalidInputError("attribute ranges must be positive and ordered")

    @property
    def D(self) -> int:
        return self.D_s + self.D_t

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SyntheticInstance:
    data: StationDataset
    network: PipeNetwork
    coupling: TaskCoupling
    W: np.ndarray  # planted (D, M)
    support: np.ndarray  # active row indices


def _spanning_edges(pos: np.ndarray) -> list[tuple[int, int]]:
    """Euclidean minimum spanning tree (Prim), so the network is connected."""
    n = len(pos)
    dist = np.linalg.norm(pos[:, None] - pos[None], axis=2)
    inside = np.zeros(n, bool)
    inside[0] = True
    best = dist[0].copy()
    parent = np.zeros(n, int)
    edges = []
    for _ in range(n - 1):
        cand = np.where(inside, np.inf, best)
        v = int(np.argmin(cand))
        edges.append((min(parent[v], v), max(parent[v], v)))
        inside[v] = True
        closer = dist[v] < best
        best = np.where(closer, dist[v], best)
        parent = np.where(closer, v, parent)
    return edges


def station_zones(spec: SyntheticSpec) -> np.ndarray:
    return np.arange(spec.M) * spec.zones // spec.M


def random_network(spec: SyntheticSpec, rng: np.random.Generator) -> tuple[PipeNetwork, list[str]]:
    """Random geometric pipe graph per zone, each made connected by its spanning tree."""
    node_zone = np.arange(spec.n_nodes) * spec.zones // spec.n_nodes
    segs = []
    for z in range(spec.zones):
        ids = np.flatnonzero(node_zone == z)
        pos = rng.random((ids.size, 2))
        edges = set(_spanning_edges(pos)) if ids.size > 1 else set()
        for a, b in itertools.combinations(range(ids.size), 2):
            if np.linalg.norm(pos[a] - pos[b]) < spec.radius:
                edges.add((a, b))
        for a, b in sorted(edges):
            segs.append(
                PipeSegment(
                    f"n{ids[a]}", f"n{ids[b]}",
                    length=float(rng.uniform(*spec.length_range)),
                    diameter=float(rng.uniform(*spec.diameter_range)),
                    age=float(rng.uniform(*spec.age_range)),
                )
            )
    picks = []
    for z in station_zones(spec):
        free = [n for n in np.flatnonzero(node_zone == z) if n not in picks]
        if not free:
            raise InvalidInputError(f"zone {z} has fewer nodes than stations")
        picks.append(int(rng.choice(free)))
    stations = [f"S{l + 1}" for l in range(spec.M)]
    return PipeNetwork(segs, {s: f"n{p}" for s, p in zip(stations, picks)}, {f"n{i}" for i in range(spec.n_nodes)}), stations


def _pick_support(spec: SyntheticSpec, rng) -> np.ndarray:
    s = spec.support
    if s == 0:
        return np.zeros(0, int)
    chosen = []
    # one active row in each non-empty view, so both views carry signal
    if s >= 2 and spec.D_s > 0 and spec.D_t > 0:
        chosen = [int(rng.integers(spec.D_s)), spec.D_s + int(rng.integers(spec.D_t))]
    rest = [j for j in range(spec.D) if j not in chosen]
    chosen += rng.choice(rest, size=s - len(chosen), replace=False).tolist()
    return np.array(sorted(chosen))


def planted_weights(spec: SyntheticSpec, L: np.ndarray, rng) -> tuple[np.ndarray, np.ndarray]:
    """Shared base on the support plus a deviation drawn from the graph prior.

    The deviation has covariance ``smoothness^2 * pinv(L)^prior_power``
    across stations, so strongly coupled stations get similar weights.
    Each supply zone is also shifted by its own offset.
    """
    support = _pick_support(spec, rng)
    W = np.zeros((spec.D, spec.M))
    if support.size == 0:
        return W, support
    base = rng.choice([-1.0, 1.0], size=support.size) * rng.uniform(0.5, 1.5, size=support.size)
    W[support] = base[:, None]
    mu, U = np.linalg.eigh(L)
    keep = mu > 1e-9 * max(1.0, mu.max())
    if np.any(keep) and spec.smoothness > 0:
        g = rng.normal(size=(support.size, int(keep.sum())))
        W[support] += spec.smoothness * (g / mu[keep] ** (0.5 * spec.prior_power)) @ U[:, keep].T
    if spec.zones > 1 and spec.zone_offset > 0:
        shift = spec.zone_offset * rng.normal(size=(support.size, spec.zones))
        shift -= shift.mean(axis=1, keepdims=True)
        W[support] += shift[:, station_zones(spec)]
    return W, support


def _station_views(spec: SyntheticSpec, ws, wt, rng):
    n = spec.n_per_station
    Xt = rng.normal(size=(n, spec.D_t))
    Xs = rng.normal(size=(n, spec.D_s))
    nrm = float(ws @ ws)
    if nrm > 0:
        # shift Xs along ws so that Xs ws tracks Xt wt
        target = Xt @ wt + spec.view_noise * rng.normal(size=n)
        Xs = Xs + np.outer(target - Xs @ ws, ws) / nrm
    return Xs, Xt


def generate_synthetic(spec: SyntheticSpec, seed: int) -> SyntheticInstance:
    """Fully determined by ``(spec, seed)``."""
    rng = np.random.default_rng(seed)
    net, stations = random_network(spec, rng)
    if spec.M >= 2:
        coupling = correlation_matrix(net, stations, spec.k, DEFAULT_TRIPLET, normalize=True)
    else:
        coupling = TaskCoupling.from_matrix(np.zeros((1, 1)), spec.k)
    W, support = planted_weights(spec, coupling.L, rng)

    Xs, Xt, y = [], [], []
    for l in range(spec.M):
        ws, wt = W[: spec.D_s, l], W[spec.D_s :, l]
        a, b = _station_views(spec, ws, wt, rng)
        Xs.append(a)
        Xt.append(b)
        y.append(0.5 * (a @ ws + b @ wt) + spec.sigma * rng.normal(size=spec.n_per_station))
    ts = [np.arange(spec.n_per_station, dtype=float) for _ in range(spec.M)]
    data = StationDataset(Xs, Xt, y, stations, timestamps=ts)
    return SyntheticInstance(data, net, coupling, W, support)
