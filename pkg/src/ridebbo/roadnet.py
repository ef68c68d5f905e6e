"""Road network storage and exact shortest-path queries.

The network is an undirected weighted graph whose vertices carry latitude and
longitude.  Shortest paths are computed on demand with Dijkstra's algorithm and
memoised in a bounded LRU cache keyed by the unordered vertex pair.
"""

from __future__ import annotations

import heapq
import math
import threading
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

EARTH_RADIUS_M = 6_371_008.8

#: Cache budget used when no explicit capacity is given.
DEFAULT_CACHE_CAPACITY = 1 << 20


class NetworkError(ValueError):
    """Raised when node/edge records violate the network invariants."""


class Unreachable(LookupError):
    """No path joins the two query vertices."""

    def __init__(self, u, v):
        super().__init__(f"unreachable: no path from {u} to {v}")
        self.u = u
        self.v = v


@dataclass(frozen=True)
class PathResult:
    distance: float
    hops: tuple


@dataclass(frozen=True)
class NetConfig:
    cache_capacity: int = DEFAULT_CACHE_CAPACITY

    def __post_init__(self):
        if self.cache_capacity < 0:
            raise ValueError("cache_capacity must be >= 0")


def haversine(lat1, lon1, lat2, lon2):
    """Great-circle distance in meters."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


class PathCache:
    """Thread-safe LRU map from unordered vertex pair to PathResult."""

    def __init__(self, capacity):
        self.capacity = capacity
        self._data = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    @staticmethod
    def key(u, v):
        return (u, v) if u <= v else (v, u)

    def get(self, u, v):
        if self.capacity == 0:
            self.misses += 1
            return None
        k = self.key(u, v)
        with self._lock:
            res = self._data.get(k)
            if res is None:
                self.misses += 1
                return None
            self._data.move_to_end(k)
            self.hits += 1
            return res

    def put(self, u, v, res):
        if self.capacity == 0:
            return
        k = self.key(u, v)
        with self._lock:
            self._data[k] = res
            self._data.move_to_end(k)
            while len(self._data) > self.capacity:
                self._data.popitem(last=False)

    def __len__(self):
        return len(self._data)

    def clear(self):
        with self._lock:
            self._data.clear()


class RoadNetwork:
    """Immutable undirected road graph with cached shortest-path queries.

    Vertex ids must be mutually orderable (ints in practice).  Use
    :func:`load_network` or :meth:`from_records` to build one; both enforce
    positive weights and referential integrity.
    """

    def __init__(self, coords, adjacency, config: NetConfig | None = None):
        self.coords = coords  # id -> (lat, lon)
        self.adj = adjacency  # id -> tuple[(nbr, w), ...]
        self.config = config or NetConfig()
        self.cache = PathCache(self.config.cache_capacity)
        self._n_edges = sum(len(nbrs) for nbrs in adjacency.values()) // 2
        self._lb_ratio = self._lower_bound_ratio()

    @classmethod
    def from_records(cls, node_records: Iterable, edge_records: Iterable, config=None):
        coords = {}
        for rec in node_records:
            vid, lat, lon = rec
            if vid in coords:
                raise NetworkError(f"duplicate vertex id {vid!r} in record {tuple(rec)!r}")
            coords[vid] = (float(lat), float(lon))
        adj: dict = {v: {} for v in coords}
        for rec in edge_records:
            u, v, w = rec
            w = float(w)
            for end in (u, v):
                if end not in coords:
                    raise NetworkError(f"unknown vertex {end!r} in edge record {tuple(rec)!r}")
            if not (w > 0) or math.isinf(w):
                raise NetworkError(f"non-positive weight {w!r} in edge record {tuple(rec)!r}")
            if u == v:
                continue
            # parallel streets collapse to the shorter one
            if w < adj[u].get(v, math.inf):
                adj[u][v] = w
                adj[v][u] = w
        frozen = {v: tuple(sorted(nbrs.items())) for v, nbrs in adj.items()}
        return cls(coords, frozen, config)

    # -- basic accessors ------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.coords)

    @property
    def n_edges(self):
        return self._n_edges

    def vertices(self):
        return sorted(self.coords)

    def edges(self):
        for u in sorted(self.adj):
            for v, w in self.adj[u]:
                if u < v:
                    yield u, v, w

    def __contains__(self, v):
        return v in self.coords

    def weight(self, u, v):
        for nbr, w in self.adj[u]:
            if nbr == v:
                return w
        raise KeyError((u, v))

    def with_config(self, config: NetConfig) -> "RoadNetwork":
        """Same graph, fresh cache with a different configuration."""
        return RoadNetwork(self.coords, self.adj, config)

    # -- geometry ---------------------------------------------------------

    def geo_distance(self, u, v):
        (la1, lo1), (la2, lo2) = self.coords[u], self.coords[v]
        return haversine(la1, lo1, la2, lo2)

    def euclidean(self, u, v):
        """Planar distance in meters on a local equirectangular projection."""
        (la1, lo1), (la2, lo2) = self.coords[u], self.coords[v]
        k = math.cos(math.radians((la1 + la2) / 2))
        dx = math.radians(lo2 - lo1) * k
        dy = math.radians(la2 - la1)
        return EARTH_RADIUS_M * math.hypot(dx, dy)

    def _lower_bound_ratio(self):
        ratio = math.inf
        for u, v, w in self.edges():
            g = self.geo_distance(u, v)
            if g > 0:
                ratio = min(ratio, w / g)
        # 1 - 1e-9 absorbs rounding in the haversine evaluation
        return 0.0 if math.isinf(ratio) else ratio * (1 - 1e-9)

    def lower_bound(self, u, v):
        """Admissible lower bound on the road distance between u and v.

        Great-circle distance obeys the triangle inequality, so scaling it by
        the smallest weight/geo ratio over all edges never overestimates.
        """
        if u == v or self._lb_ratio == 0.0:
            return 0.0
        return self._lb_ratio * self.geo_distance(u, v)

    # -- shortest paths -----------------------------------------------------

    def _dijkstra(self, s, t):
        dist = {s: 0.0}
        prev = {}
        done = set()
        heap = [(0.0, s)]
        adj = self.adj
        while heap:
            d, x = heapq.heappop(heap)
            if x in done:
                continue
            if x == t:
                break
            done.add(x)
            for y, w in adj[x]:
                nd = d + w
                if nd < dist.get(y, math.inf):
                    dist[y] = nd
                    prev[y] = x
                    heapq.heappush(heap, (nd, y))
        if t not in dist:
            return None
        hops = [t]
        while hops[-1] != s:
            hops.append(prev[hops[-1]])
        hops.reverse()
        return PathResult(dist[t], tuple(hops))

    def msp(self, u, v) -> PathResult:
        """Minimum-weight path from u to v.  Raises :class:`Unreachable`."""
        if u not in self.coords:
            raise KeyError(f"unknown vertex {u!r}")
        if v not in self.coords:
            raise KeyError(f"unknown vertex {v!r}")
        if u == v:
            return PathResult(0.0, (u,))
        res = self.cache.get(u, v)
        if res is None:
            # search from the smaller id so the cached orientation is canonical
            s, t = PathCache.key(u, v)
            res = self._dijkstra(s, t)
            if res is None:
                raise Unreachable(u, v)
            self.cache.put(u, v, res)
        if res.hops[0] != u:
            res = PathResult(res.distance, res.hops[::-1])
        return res

    def distance(self, u, v) -> float:
        return self.msp(u, v).distance

    def schedule_distance(self, stops: Sequence) -> float:
        """Length of the route visiting ``stops`` in order via pairwise MSPs."""
        if len(stops) == 0:
            raise ValueError("schedule needs at least one stop")
        total = 0.0
        for a, b in zip(stops, stops[1:]):
            total += self.distance(a, b)
        return total

    def is_connected(self):
        if not self.coords:
            return True
        start = next(iter(self.coords))
        seen = {start}
        stack = [start]
        while stack:
            x = stack.pop()
            for y, _ in self.adj[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        return len(seen) == len(self.coords)


def msp(net: RoadNetwork, u, v) -> PathResult:
    return net.msp(u, v)


def schedule_distance(net: RoadNetwork, stops: Sequence) -> float:
    return net.schedule_distance(stops)


# -- file I/O -------------------------------------------------------------------


def _records(lines, n_fields, what):
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != n_fields:
            raise NetworkError(f"{what} line {lineno}: expected {n_fields} fields, got {len(parts)}")
        yield lineno, parts


def _parse_id(tok):
    try:
        return int(tok)
    except ValueError:
        return tok


def parse_nodes(lines):
    out = []
    for lineno, (vid, lat, lon) in _records(lines, 3, "node"):
        try:
            out.append((_parse_id(vid), float(lat), float(lon)))
        except ValueError as exc:
            raise NetworkError(f"node line {lineno}: {exc}") from exc
    return out


def parse_edges(lines):
    out = []
    for lineno, (u, v, w) in _records(lines, 3, "edge"):
        try:
            out.append((_parse_id(u), _parse_id(v), float(w)))
        except ValueError as exc:
            raise NetworkError(f"edge line {lineno}: {exc}") from exc
    return out


def load_network(node_records, edge_records, config: NetConfig | None = None) -> RoadNetwork:
    """Build a network from record iterables or from node/edge file paths."""
    if isinstance(node_records, (str, Path)):
        node_records = parse_nodes(Path(node_records).read_text(encoding="utf-8").splitlines())
    if isinstance(edge_records, (str, Path)):
        edge_records = parse_edges(Path(edge_records).read_text(encoding="utf-8").splitlines())
    return RoadNetwork.from_records(node_records, edge_records, config)


def save_network(net: RoadNetwork, nodes_path, edges_path):
    with open(nodes_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# id lat lon\n")
        for v in net.vertices():
            lat, lon = net.coords[v]
            fh.write(f"{v} {lat!r} {lon!r}\n")
    with open(edges_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# u v w_meters\n")
        for u, v, w in net.edges():
            fh.write(f"{u} {v} {w!r}\n")


def grid_network(n, spacing=200.0, *, rng=None, jitter=0.0, origin=(39.9, 116.4),
                 config: NetConfig | None = None) -> RoadNetwork:
    """n x n lattice with ``spacing`` meters between neighbours.

    With ``jitter > 0`` each street weight is its geometric length times a
    factor drawn uniformly from [1, 1 + jitter], so weights stay >= the
    straight-line length.
    """
    if n < 1:
        raise ValueError("grid needs n >= 1")
    rng = rng if rng is not None else np.random.default_rng(0)
    lat0, lon0 = origin
    dlat = math.degrees(spacing / EARTH_RADIUS_M)
    dlon = dlat / math.cos(math.radians(lat0))
    nodes = []
    for i in range(n):
        for j in range(n):
            nodes.append((i * n + j, lat0 + i * dlat, lon0 + j * dlon))
    coords = {vid: (lat, lon) for vid, lat, lon in nodes}
    edges = []
    for i in range(n):
        for j in range(n):
            u = i * n + j
            for v in ((u + 1) if j + 1 < n else None, (u + n) if i + 1 < n else None):
                if v is None:
                    continue
                geo = haversine(*coords[u], *coords[v])
                factor = 1.0 + (float(rng.uniform(0.0, jitter)) if jitter > 0 else 0.0)
                edges.append((u, v, round(geo * factor, 3) if jitter > 0 else spacing))
    return RoadNetwork.from_records(nodes, edges, config)

