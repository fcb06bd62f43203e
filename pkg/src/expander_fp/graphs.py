"""Finite simple graphs: generation, girth, distances and walk distance laws."""

from __future__ import annotations

import logging
import math
from collections import deque
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

EXACT_MODE_MAX_VERTICES = 64


class GraphError(ValueError):
    """Raised for malformed graphs or infeasible generation requests."""


class DisconnectedGraphError(GraphError):
    pass


class UndirectedGraph:
    """Immutable finite simple graph on vertices ``0..n-1``.

    Parameters
    ----------
    vertex_count : int
        Number of vertices.
    edges : iterable of (int, int)
        Undirected edges. Self-loops and repeated edges are rejected.
    """

    def __init__(self, vertex_count: int, edges: Iterable[tuple[int, int]]):
        if vertex_count < 1:
            raise GraphError("vertex_count must be positive")
        nbrs: list[set[int]] = [set() for _ in range(vertex_count)]
        m = 0
        for u, v in edges:
            u, v = int(u), int(v)
            if not (0 <= u < vertex_count and 0 <= v < vertex_count):
                raise GraphError(f"edge ({u}, {v}) out of range")
            if u == v:
                raise GraphError(f"self-loop at {u}")
            if v in nbrs[u]:
                raise GraphError(f"multi-edge {{{u}, {v}}}")
            nbrs[u].add(v)
            nbrs[v].add(u)
            m += 1
        self.vertex_count = vertex_count
        self.adjacency: tuple[tuple[int, ...], ...] = tuple(tuple(sorted(s)) for s in nbrs)
        self.edge_count = m

    def __repr__(self) -> str:
        return f"UndirectedGraph(n={self.vertex_count}, m={self.edge_count})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, UndirectedGraph)
            and self.vertex_count == other.vertex_count
            and self.adjacency == other.adjacency
        )

    def __hash__(self) -> int:
        return hash((self.vertex_count, self.adjacency))

    @property
    def n(self) -> int:
        return self.vertex_count

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=np.int64)

    @cached_property
    def edges(self) -> tuple[tuple[int, int], ...]:
        """Edges as sorted pairs ``(u, v)`` with ``u < v``, in lexicographic order."""
        return tuple((u, v) for u in range(self.n) for v in self.adjacency[u] if u < v)

    @cached_property
    def is_connected(self) -> bool:
        return len(_bfs_layers(self.adjacency, 0)) == self.n

    def require_connected(self) -> None:
        if not self.is_connected:
            raise DisconnectedGraphError("operation requires a connected graph")

    @cached_property
    def is_bipartite(self) -> bool:
        color = [-1] * self.n
        for s in range(self.n):
            if color[s] >= 0:
                continue
            color[s] = 0
            queue = deque([s])
            while queue:
                u = queue.popleft()
                for w in self.adjacency[u]:
                    if color[w] < 0:
                        color[w] = 1 - color[u]
                        queue.append(w)
                    elif color[w] == color[u]:
                        return False
        return True

    def adjacency_matrix(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for u, v in self.edges:
            a[u, v] = a[v, u] = 1.0
        return a

    # -- edge-list text format -------------------------------------------------

    def to_edge_list(self) -> str:
        lines = [f"{self.n} {self.edge_count}"]
        lines += [f"{u} {v}" for u, v in self.edges]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edge_list(cls, text: str) -> "UndirectedGraph":
        rows = [ln.split() for ln in text.splitlines()]
        rows = [r for r in rows if r and not r[0].startswith("#")]
        if not rows or len(rows[0]) != 2:
            raise GraphError("edge list must start with a line 'n m'")
        n, m = int(rows[0][0]), int(rows[0][1])
        body = rows[1:]
        if len(body) != m:
            raise GraphError(f"header declares {m} edges, found {len(body)}")
        edges = []
        for r in body:
            if len(r) != 2:
                raise GraphError(f"bad edge line: {' '.join(r)!r}")
            edges.append((int(r[0]), int(r[1])))
        return cls(n, edges)

    @classmethod
    def read(cls, path: str | Path) -> "UndirectedGraph":
        return cls.from_edge_list(Path(path).read_text())

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_edge_list())


# -- standard families -----------------------------------------------------------


def cycle_graph(n: int) -> UndirectedGraph:
    if n < 3:
        raise GraphError("a cycle needs at least 3 vertices")
    return UndirectedGraph(n, [(i, (i + 1) % n) for i in range(n)])


def path_graph(n: int) -> UndirectedGraph:
    return UndirectedGraph(n, [(i, i + 1) for i in range(n - 1)])


def complete_graph(n: int) -> UndirectedGraph:
    return UndirectedGraph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def petersen_graph() -> UndirectedGraph:
    outer = [(i, (i + 1) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return UndirectedGraph(10, outer + spokes + inner)


def gen_random_regular(n: int, d: int, seed: int, max_tries: int = 10_000) -> UndirectedGraph:
    """Connected simple ``d``-regular graph from the pairing model.

    Half-edges are paired uniformly at random; outcomes with loops,
    multi-edges or more than one component are rejected and redrawn.
    The result is a deterministic function of ``seed``.
    """
    if d < 1 or n < 1:
        raise GraphError("n and d must be positive")
    if (n * d) % 2:
        raise GraphError(f"n*d must be even (got n={n}, d={d})")
    if d >= n:
        raise GraphError(f"degree {d} infeasible on {n} vertices")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(n), d)
    for _ in range(max_tries):
        pairs = rng.permutation(stubs).reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        lo = np.minimum(pairs[:, 0], pairs[:, 1])
        hi = np.maximum(pairs[:, 0], pairs[:, 1])
        keys = lo * n + hi
        if np.unique(keys).size != keys.size:
            continue
        g = UndirectedGraph(n, zip(lo.tolist(), hi.tolist()))
        if g.is_connected:
            return g
    raise GraphError(f"rejection budget of {max_tries} pairings exhausted")


# -- girth and distances -----------------------------------------------------------


def _bfs_layers(adjacency: Sequence[Sequence[int]], source: int) -> dict[int, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in adjacency[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def girth(g: UndirectedGraph) -> float:
    """Length of the shortest cycle, ``math.inf`` for forests.

    One BFS per root; a non-tree edge ``(u, w)`` met during the search
    closes a cycle of length at most ``dist[u] + dist[w] + 1`` and the
    minimum over all roots is exact.
    """
    best = math.inf
    adj = g.adjacency
    for root in range(g.n):
        dist = {root: 0}
        parent = {root: -1}
        queue = deque([root])
        while queue:
            u = queue.popleft()
            if 2 * dist[u] >= best:
                break
            for w in adj[u]:
                if w not in dist:
                    dist[w] = dist[u] + 1
                    parent[w] = u
                    queue.append(w)
                elif parent[u] != w:
                    best = min(best, dist[u] + dist[w] + 1)
    return best


class DistanceTable:
    """All-pairs hop distances of a connected graph."""

    def __init__(self, matrix: np.ndarray):
        self.matrix = matrix
        self.diameter = int(matrix.max())

    def __getitem__(self, key):
        return self.matrix[key]


_distance_cache: dict[UndirectedGraph, DistanceTable] = {}


def distances(g: UndirectedGraph) -> DistanceTable:
    g.require_connected()
    cached = _distance_cache.get(g)
    if cached is not None:
        return cached
    mat = np.empty((g.n, g.n), dtype=np.int64)
    for s in range(g.n):
        d = _bfs_layers(g.adjacency, s)
        for v, dv in d.items():
            mat[s, v] = dv
    mat.setflags(write=False)
    table = DistanceTable(mat)
    if len(_distance_cache) > 256:
        _distance_cache.clear()
    _distance_cache[g] = table
    return table


# -- walk distance laws ------------------------------------------------------------


def _walk_power_exact(g: UndirectedGraph, q: int) -> list[list[Fraction]]:
    n = g.n
    step = [[Fraction(0)] * n for _ in range(n)]
    for u in range(n):
        inv = Fraction(1, len(g.adjacency[u]))
        for w in g.adjacency[u]:
            step[u][w] = inv
    power = [[Fraction(int(u == v)) for v in range(n)] for u in range(n)]
    for _ in range(q):
        power = [
            [sum((power[u][w] * step[w][v] for w in range(n) if power[u][w]), Fraction(0)) for v in range(n)]
            for u in range(n)
        ]
    return power


def distance_distribution(g: UndirectedGraph, q: int, exact: bool = False) -> dict[int, float | Fraction]:
    """Law of the graph distance travelled by ``q`` steps of the stationary walk.

    Returns ``{l: P(l)}`` with ``P(l) = sum_u nu(u) sum_{v: d(u,v)=l} mu^q(u -> v)``
    where ``mu`` is the simple random walk and ``nu(u) = deg(u) / 2|E|``.
    Zero buckets are omitted. With ``exact=True`` probabilities are
    :class:`fractions.Fraction` (graphs up to 64 vertices).
    """
    g.require_connected()
    if q < 0:
        raise ValueError("q must be nonnegative")
    dist = distances(g).matrix
    out: dict[int, float | Fraction] = {}
    if exact:
        if g.n > EXACT_MODE_MAX_VERTICES:
            raise GraphError(f"exact mode limited to {EXACT_MODE_MAX_VERTICES} vertices")
        power = _walk_power_exact(g, q)
        two_m = 2 * g.edge_count
        for u in range(g.n):
            nu = Fraction(len(g.adjacency[u]), two_m)
            for v in range(g.n):
                if power[u][v]:
                    lv = int(dist[u, v])
                    out[lv] = out.get(lv, Fraction(0)) + nu * power[u][v]
        return dict(sorted(out.items()))
    deg = g.degrees.astype(float)
    kernel = g.adjacency_matrix() / deg[:, None]
    nu = deg / deg.sum()
    mass = nu[:, None] * np.linalg.matrix_power(kernel, q)
    for lv in range(dist.max() + 1):
        val = float(mass[dist == lv].sum())
        if val > 0.0:
            out[lv] = val
    return out


def short_distance_mass(g: UndirectedGraph, q: int) -> float:
    """``Q = sum_{l <= q/6} P(l)``, mass of walks that end unusually close."""
    law = distance_distribution(g, q)
    return float(sum(v for lv, v in law.items() if lv <= q / 6))


def check_short_distance_bound(g: UndirectedGraph, q: int) -> dict:
    """Compare ``Q`` with ``exp(-q/18)``; violations are logged, not raised.

    The bound is only claimed for minimum degree at least 3 and
    ``q < girth/2``; outside that regime the record is marked inapplicable.
    """
    qmass = short_distance_mass(g, q)
    bound = math.exp(-q / 18)
    applicable = int(g.degrees.min()) >= 3 and q < girth(g) / 2
    ok = qmass <= bound
    if applicable and not ok:
        logger.warning("short-distance mass %.4g exceeds exp(-q/18)=%.4g (q=%d, %r)", qmass, bound, q, g)
    return {"q": q, "Q": qmass, "bound": bound, "applicable": applicable, "ok": ok}
