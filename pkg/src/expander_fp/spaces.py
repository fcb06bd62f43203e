"""Metric-space oracles: distances, geodesics and uniform-convexity parameters.

Every space exposes ``dist(x, y)``, ``geodesic(y, z, t)`` (the point
``[y, z]_t``), ``random_point(rng)`` and ``convexity_constant(p)``, the
claimed constant ``c`` in

    d(x, [y,z]_t)^p <= (1-t) d(x,y)^p + t d(x,z)^p - c t(1-t) d(y,z)^p.

Claims are checked empirically by :func:`verify_p_convexity`.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from typing import Any, NamedTuple, Sequence

import numpy as np


class InvalidPointError(ValueError):
    pass


def clarkson_constant(p: float) -> float:
    """``2^(2-p)``: the two-point Clarkson constant, tight for the real line."""
    return 2.0 ** (2.0 - p)


class MetricSpace:
    kind = "abstract"
    #: True when ``log``/``exp`` maps are available (Riemannian structure)
    riemannian = False

    def dist(self, x, y) -> float:
        raise NotImplementedError

    def geodesic(self, y, z, t: float):
        raise NotImplementedError

    def validate(self, x):
        return x

    def random_point(self, rng: np.random.Generator):
        raise NotImplementedError

    def random_points(self, rng: np.random.Generator, n: int) -> list:
        return [self.random_point(rng) for _ in range(n)]

    def convexity_constant(self, p: float) -> float | None:
        """Claimed constant for exponent ``p`` (``None`` if no claim)."""
        return None

    def dist_batch(self, xs, ys) -> np.ndarray:
        return np.array([self.dist(x, y) for x, y in zip(xs, ys)])

    def geodesic_batch(self, ys, zs, ts) -> list:
        return [self.geodesic(y, z, t) for y, z, t in zip(ys, zs, ts)]

    def pairwise(self, points: Sequence) -> np.ndarray:
        n = len(points)
        out = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                out[i, j] = out[j, i] = self.dist(points[i], points[j])
        return out

    def descriptor(self) -> dict:
        return {"kind": self.kind}

    def _check_t(self, t: float) -> None:
        if not (0.0 <= t <= 1.0):
            raise ValueError(f"geodesic parameter t={t} outside [0, 1]")


class _VectorSpace(MetricSpace):
    """Points are 1-D float arrays of length ``dim``; batch ops broadcast on axis -1."""

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim

    def validate(self, x):
        a = np.asarray(x, dtype=float).reshape(-1)
        if a.shape != (self.dim,):
            raise InvalidPointError(f"expected a point of dimension {self.dim}, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidPointError("non-finite coordinates")
        return a

    def geodesic(self, y, z, t):
        self._check_t(t)
        y, z = self.validate(y), self.validate(z)
        return (1.0 - t) * y + t * z

    def dist_batch(self, xs, ys):
        return self._dist(np.asarray(xs, float), np.asarray(ys, float))

    def geodesic_batch(self, ys, zs, ts):
        ts = np.asarray(ts, float)[..., None]
        return (1.0 - ts) * np.asarray(ys, float) + ts * np.asarray(zs, float)

    def dist(self, x, y):
        return float(self._dist(self.validate(x), self.validate(y)))

    def pairwise(self, points):
        pts = np.asarray([self.validate(x) for x in points])
        return self._dist(pts[:, None, :], pts[None, :, :])

    def random_points(self, rng, n):
        return list(self._sample(rng, n))

    def random_point(self, rng):
        return self._sample(rng, 1)[0]

    def _sample(self, rng, n):
        return rng.normal(size=(n, self.dim))


class Euclidean(_VectorSpace):
    """``R^dim`` with the Euclidean metric; CAT(0), convexity (2, 1) is an identity."""

    kind = "euclidean"
    riemannian = True

    def _dist(self, x, y):
        return np.sqrt(np.sum((x - y) ** 2, axis=-1))

    def log(self, y, x):
        return np.asarray(x, float) - np.asarray(y, float)

    def exp(self, y, v):
        return np.asarray(y, float) + np.asarray(v, float)

    def norm_at(self, y, v) -> float:
        return float(np.linalg.norm(v))

    def convexity_constant(self, p):
        return 1.0 if p == 2 else clarkson_constant(p)

    def descriptor(self):
        return {"kind": self.kind, "dim": self.dim}

    def __repr__(self):
        return f"Euclidean({self.dim})"


class LpSpace(_VectorSpace):
    """``l_p^dim`` for ``p >= 2`` with straight-line geodesics."""

    kind = "lp"

    def __init__(self, dim: int, p: float):
        super().__init__(dim)
        if p < 2:
            raise ValueError("LpSpace supports p >= 2")
        self.p = float(p)

    def _dist(self, x, y):
        return np.sum(np.abs(x - y) ** self.p, axis=-1) ** (1.0 / self.p)

    def convexity_constant(self, p):
        if p == self.p:
            return clarkson_constant(p)
        return None

    def descriptor(self):
        return {"kind": self.kind, "dim": self.dim, "p": self.p}

    def __repr__(self):
        return f"LpSpace({self.dim}, p={self.p})"


def _sq(x):
    return np.sum(np.asarray(x) ** 2, axis=-1)


def mobius_add(x, y):
    """Mobius addition in the unit ball; ``y -> x (+) y`` is an isometry sending 0 to x."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    xy = np.sum(x * y, axis=-1)[..., None]
    xx = _sq(x)[..., None]
    yy = _sq(y)[..., None]
    num = (1 + 2 * xy + yy) * x + (1 - xx) * y
    den = 1 + 2 * xy + xx * yy
    return num / den


class HyperbolicPlane(_VectorSpace):
    """Poincare ball model (the plane for ``dim=2``); CAT(0) with constant 1.

    Geodesics are computed by Mobius-translating one endpoint to the origin,
    where geodesics are Euclidean rays.
    """

    kind = "hyperbolic"
    riemannian = True

    def __init__(self, dim: int = 2, sample_radius: float = 3.0):
        super().__init__(dim)
        self.sample_radius = sample_radius

    def validate(self, x):
        a = super().validate(x)
        if float(a @ a) >= 1.0:
            raise InvalidPointError("Poincare ball points must have norm < 1")
        return a

    def _dist(self, x, y):
        z = _sq(x - y) / ((1.0 - _sq(x)) * (1.0 - _sq(y)))
        # arccosh(1 + 2z) written to stay accurate for tiny z
        return 2.0 * np.arcsinh(np.sqrt(np.maximum(z, 0.0)))

    def geodesic(self, y, z, t):
        self._check_t(t)
        y, z = self.validate(y), self.validate(z)
        return self.geodesic_batch(y[None], z[None], [t])[0]

    def geodesic_batch(self, ys, zs, ts):
        ys = np.asarray(ys, float)
        w = mobius_add(-ys, np.asarray(zs, float))
        r = np.sqrt(_sq(w))
        ts = np.asarray(ts, float)
        big = np.arctanh(np.minimum(r, 1 - 1e-16))
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(r > 0, np.tanh(ts * big) / r, 0.0)
        return mobius_add(ys, scale[..., None] * w)

    def log(self, y, x):
        y = np.asarray(y, float)
        w = mobius_add(-y, np.asarray(x, float))
        r = float(np.sqrt(w @ w))
        if r == 0.0:
            return np.zeros_like(y)
        return (1.0 - y @ y) * np.arctanh(r) * w / r

    def exp(self, y, v):
        y = np.asarray(y, float)
        v = np.asarray(v, float)
        nv = float(np.sqrt(v @ v))
        if nv == 0.0:
            return y.copy()
        lam = 2.0 / (1.0 - y @ y)
        return mobius_add(y, np.tanh(lam * nv / 2.0) * v / nv)

    def norm_at(self, y, v) -> float:
        y = np.asarray(y, float)
        return float(2.0 / (1.0 - y @ y) * np.linalg.norm(v))

    def convexity_constant(self, p):
        return 1.0 if p == 2 else clarkson_constant(p)

    def _sample(self, rng, n):
        direction = rng.normal(size=(n, self.dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        rho = self.sample_radius * np.sqrt(rng.random(n))
        return np.tanh(rho / 2.0)[:, None] * direction

    def descriptor(self):
        return {"kind": self.kind, "dim": self.dim}

    def __repr__(self):
        return f"HyperbolicPlane(dim={self.dim})"


class TreePoint(NamedTuple):
    """Point on edge ``edge`` at distance ``offset`` from the edge's lower-numbered endpoint."""

    edge: int
    offset: float


class WeightedMetricTree(MetricSpace):
    """Metric tree with weighted edges; points include edge interiors.

    A vertex has one canonical representation: the incident edge of
    smallest id, offset 0 or the edge weight.
    """

    kind = "tree"

    def __init__(self, vertex_count: int, edges: Sequence[tuple[int, int, float]]):
        if len(edges) != vertex_count - 1:
            raise ValueError("a tree on n vertices has n-1 edges")
        self.vertex_count = vertex_count
        norm = []
        for a, b, w in edges:
            if w <= 0:
                raise ValueError("edge weights must be positive")
            a, b = (int(a), int(b)) if a < b else (int(b), int(a))
            norm.append((a, b, float(w)))
        self.edges = tuple(norm)
        self.edge_index = {(a, b): i for i, (a, b, _) in enumerate(self.edges)}
        self.adjacency: list[list[tuple[int, int]]] = [[] for _ in range(vertex_count)]
        for i, (a, b, _) in enumerate(self.edges):
            self.adjacency[a].append((b, i))
            self.adjacency[b].append((a, i))
        self._vdist = np.full((vertex_count, vertex_count), np.inf)
        self._pred = np.full((vertex_count, vertex_count), -1, dtype=np.int64)
        for root in range(vertex_count):
            self._vdist[root, root] = 0.0
            queue = deque([root])
            while queue:
                u = queue.popleft()
                for v, e in self.adjacency[u]:
                    if not np.isfinite(self._vdist[root, v]):
                        self._vdist[root, v] = self._vdist[root, u] + self.edges[e][2]
                        self._pred[root, v] = u
                        queue.append(v)
        if not np.all(np.isfinite(self._vdist)):
            raise ValueError("edges do not form a connected tree")
        self._weights = np.array([w for _, _, w in self.edges])

    @classmethod
    def path(cls, n: int, weight: float = 1.0) -> "WeightedMetricTree":
        return cls(n, [(i, i + 1, weight) for i in range(n - 1)])

    def vertex_point(self, v: int) -> TreePoint:
        e = min(i for _, i in self.adjacency[v])
        a, b, w = self.edges[e]
        return TreePoint(e, 0.0 if v == a else w)

    def validate(self, x):
        e, t = int(x[0]), float(x[1])
        if not 0 <= e < len(self.edges):
            raise InvalidPointError(f"edge id {e} out of range")
        a, b, w = self.edges[e]
        if not (-1e-12 <= t <= w + 1e-12):
            raise InvalidPointError(f"offset {t} outside edge of length {w}")
        if t <= 1e-15:
            return self.vertex_point(a)
        if t >= w - 1e-15 * max(1.0, w):
            return self.vertex_point(b)
        return TreePoint(e, t)

    def _ends(self, x: TreePoint):
        a, b, w = self.edges[x.edge]
        return ((a, x.offset), (b, w - x.offset))

    def dist(self, x, y):
        x, y = self.validate(x), self.validate(y)
        if x.edge == y.edge:
            return abs(x.offset - y.offset)
        return min(dx + self._vdist[i, j] + dy for i, dx in self._ends(x) for j, dy in self._ends(y))

    def vertex_path(self, i: int, j: int) -> list[int]:
        out = [j]
        while out[-1] != i:
            out.append(int(self._pred[i, out[-1]]))
        return out[::-1]

    def _walk(self, start_vertex_path: list[int], s: float) -> TreePoint:
        for u, v in zip(start_vertex_path[:-1], start_vertex_path[1:]):
            e = self.edge_index[(min(u, v), max(u, v))]
            w = self.edges[e][2]
            if s <= w:
                return self.validate(TreePoint(e, s if u < v else w - s))
            s -= w
        return self.vertex_point(start_vertex_path[-1])

    def geodesic(self, y, z, t):
        self._check_t(t)
        y, z = self.validate(y), self.validate(z)
        if y.edge == z.edge:
            return self.validate(TreePoint(y.edge, (1 - t) * y.offset + t * z.offset))
        total, i, dy, j = min(
            (dy + self._vdist[i, j] + dz, i, dy, j) for i, dy in self._ends(y) for j, dz in self._ends(z)
        )
        s = t * total
        a, b, w = self.edges[y.edge]
        if s <= dy:
            return self.validate(TreePoint(y.edge, y.offset - s if i == a else y.offset + s))
        s -= dy
        route = self.vertex_path(i, j)
        inner = self._vdist[i, j]
        if s <= inner:
            return self._walk(route, s)
        s = min(s - inner, total)
        a2, b2, w2 = self.edges[z.edge]
        return self.validate(TreePoint(z.edge, s if j == a2 else w2 - s))

    def random_point(self, rng):
        e = int(rng.choice(len(self.edges), p=self._weights / self._weights.sum()))
        return self.validate(TreePoint(e, float(rng.uniform(0, self.edges[e][2]))))

    def convexity_constant(self, p):
        return 1.0 if p == 2 else clarkson_constant(p)

    def apply_vertex_permutation(self, x, perm: Sequence[int]) -> TreePoint:
        """Image of ``x`` under the automorphism induced by the vertex map ``perm``."""
        x = self.validate(x)
        a, b, w = self.edges[x.edge]
        pa, pb = int(perm[a]), int(perm[b])
        key = (min(pa, pb), max(pa, pb))
        if key not in self.edge_index:
            raise ValueError("permutation is not a tree automorphism")
        e = self.edge_index[key]
        return self.validate(TreePoint(e, x.offset if pa < pb else self.edges[e][2] - x.offset))

    def is_automorphism(self, perm: Sequence[int]) -> bool:
        for a, b, w in self.edges:
            key = (min(perm[a], perm[b]), max(perm[a], perm[b]))
            e = self.edge_index.get(key)
            if e is None or abs(self.edges[e][2] - w) > 1e-12:
                return False
        return True

    def diameter_endpoints(self) -> tuple[TreePoint, TreePoint]:
        i, j = np.unravel_index(np.argmax(self._vdist), self._vdist.shape)
        return self.vertex_point(int(i)), self.vertex_point(int(j))

    def descriptor(self):
        return {"kind": self.kind, "vertices": self.vertex_count, "edges": [list(e) for e in self.edges]}

    def __repr__(self):
        return f"WeightedMetricTree(n={self.vertex_count})"


class LpProduct(MetricSpace):
    """``l_p`` sum of factor spaces; points are tuples of factor points."""

    kind = "product"

    def __init__(self, factors: Sequence[MetricSpace], p: float):
        if not factors:
            raise ValueError("need at least one factor")
        self.factors = tuple(factors)
        self.p = float(p)

    def validate(self, x):
        if len(x) != len(self.factors):
            raise InvalidPointError("wrong number of factor coordinates")
        return tuple(f.validate(xi) for f, xi in zip(self.factors, x))

    def dist(self, x, y):
        x, y = self.validate(x), self.validate(y)
        return float(sum(f.dist(a, b) ** self.p for f, a, b in zip(self.factors, x, y)) ** (1 / self.p))

    def geodesic(self, y, z, t):
        self._check_t(t)
        y, z = self.validate(y), self.validate(z)
        return tuple(f.geodesic(a, b, t) for f, a, b in zip(self.factors, y, z))

    def random_point(self, rng):
        return tuple(f.random_point(rng) for f in self.factors)

    def convexity_constant(self, p):
        if p != self.p:
            return None
        cs = [f.convexity_constant(p) for f in self.factors]
        if any(c is None for c in cs):
            return None
        return min(cs)

    def descriptor(self):
        return {"kind": self.kind, "p": self.p, "factors": [f.descriptor() for f in self.factors]}

    def __repr__(self):
        return f"LpProduct({list(self.factors)}, p={self.p})"


def space_from_descriptor(desc: dict | str) -> MetricSpace:
    """Build a space from its JSON descriptor (see ``MetricSpace.descriptor``)."""
    if isinstance(desc, str):
        desc = json.loads(desc)
    kind = desc["kind"]
    if kind in ("euclidean", "real"):
        return Euclidean(int(desc.get("dim", 1)))
    if kind == "lp":
        return LpSpace(int(desc["dim"]), float(desc["p"]))
    if kind == "hyperbolic":
        return HyperbolicPlane(int(desc.get("dim", 2)))
    if kind == "tree":
        edges = [(int(e[0]), int(e[1]), float(e[2]) if len(e) > 2 else 1.0) for e in desc["edges"]]
        return WeightedMetricTree(int(desc.get("vertices", len(edges) + 1)), edges)
    if kind == "product":
        return LpProduct([space_from_descriptor(f) for f in desc["factors"]], float(desc["p"]))
    raise ValueError(f"unknown space kind {kind!r}")


def encode_point(x: Any):
    if isinstance(x, TreePoint):
        return [int(x.edge), float(x.offset)]
    if isinstance(x, tuple):
        return [encode_point(xi) for xi in x]
    return np.asarray(x, float).tolist()


# -- convexity verification ---------------------------------------------------------


@dataclass
class ConvexityReport:
    min_slack: float
    witness: tuple | None
    samples: int
    p: float
    c: float

    @property
    def holds(self) -> bool:
        return self.min_slack >= -1e-9


def _sample_batch(space: MetricSpace, rng, n):
    pts = space.random_points(rng, n)
    if isinstance(space, _VectorSpace):
        return np.asarray(pts)
    return pts


def convexity_slack(space: MetricSpace, p: float, c: float, xs, ys, zs, ts) -> np.ndarray:
    """RHS minus LHS of the p-convexity inequality, per sample."""
    ts = np.asarray(ts, float)
    mid = space.geodesic_batch(ys, zs, ts)
    lhs = space.dist_batch(xs, mid) ** p
    rhs = (1 - ts) * space.dist_batch(xs, ys) ** p + ts * space.dist_batch(xs, zs) ** p
    rhs = rhs - c * ts * (1 - ts) * space.dist_batch(ys, zs) ** p
    return rhs - lhs


def verify_p_convexity(space: MetricSpace, p: float, c: float, sample_count: int, seed: int,
                       chunk: int = 20_000) -> ConvexityReport:
    """Minimum slack of the p-convexity inequality over random ``(x, y, z, t)``.

    A ``min_slack`` below ``-1e-9`` refutes the claimed ``(p, c)``; the
    offending sample is returned as ``witness``.
    """
    if p < 2 or c <= 0:
        raise ValueError("need p >= 2 and c > 0")
    rng = np.random.default_rng(seed)
    best, witness = math.inf, None
    done = 0
    while done < sample_count:
        m = min(chunk, sample_count - done)
        xs, ys, zs = (_sample_batch(space, rng, m) for _ in range(3))
        ts = rng.random(m)
        slack = convexity_slack(space, p, c, xs, ys, zs, ts)
        i = int(np.argmin(slack))
        if slack[i] < best:
            best = float(slack[i])
            witness = (xs[i], ys[i], zs[i], float(ts[i]))
        done += m
    return ConvexityReport(best, witness if best < -1e-9 else None, sample_count, p, c)


def certify_convexity_constant(space: MetricSpace, p: float, c0: float | None = None,
                               sample_count: int = 20_000, seed: int = 0, iterations: int = 30) -> float:
    """Largest ``c <= c0`` (found by bisection) that survives :func:`verify_p_convexity`.

    ``c0`` defaults to the Clarkson constant. The result is an empirical
    certificate on random samples, not a proof.
    """
    c0 = clarkson_constant(p) if c0 is None else c0
    if verify_p_convexity(space, p, c0, sample_count, seed).holds:
        return c0
    lo, hi = 0.0, c0
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if mid > 0 and verify_p_convexity(space, p, mid, sample_count, seed).holds:
            lo = mid
        else:
            hi = mid
    if lo <= 0:
        raise ValueError("no positive constant survived certification")
    return lo
