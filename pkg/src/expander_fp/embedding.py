"""Padded stochastic decompositions and snowflake embeddings of finite metric spaces.

Everything works on a finite working set with a precomputed distance
matrix. A partition is an integer label per point. The distance from a
point ``x`` to the complement of its cluster is taken over the working set
only, and is ``inf`` when the cluster is everything.

A ``Delta``-bounded decomposition is ``(eps, delta)``-padded when every
point's cluster contains the closed ball ``B(x, eps * Delta)`` with
probability at least ``delta``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.spatial.distance import cdist

DIAMETER_RTOL = 1e-12


class DecompositionError(ValueError):
    pass


def read_points_csv(path: str | Path) -> np.ndarray:
    """Point set from a CSV file, one row of coordinates per point."""
    pts = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    return pts


def grid_points(side: int, dim: int = 2, spacing: float = 1.0) -> np.ndarray:
    axes = [np.arange(side) * spacing] * dim
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def canonical_labels(labels: np.ndarray) -> np.ndarray:
    """Relabel clusters ``0, 1, ...`` in order of their smallest member."""
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inv.reshape(-1)]


def outside_distance(dist: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """``d(x, X \\ P(x))`` over the working set (``inf`` if the cluster is everything)."""
    other = labels[:, None] != labels[None, :]
    masked = np.where(other, dist, np.inf)
    return masked.min(axis=1)


def cluster_diameters(dist: np.ndarray, labels: np.ndarray) -> np.ndarray:
    same = labels[:, None] == labels[None, :]
    per_point = np.where(same, dist, 0.0).max(axis=1)
    out = np.zeros(labels.max() + 1)
    np.maximum.at(out, labels, per_point)
    return out


def assert_bounded(dist: np.ndarray, labels: np.ndarray, delta_scale: float) -> None:
    diam = cluster_diameters(dist, labels).max()
    if diam > delta_scale * (1 + DIAMETER_RTOL):
        raise DecompositionError(f"cluster diameter {diam:.6g} exceeds bound {delta_scale:.6g}")


@dataclass
class PaddingReport:
    scale: float
    eps: float
    delta: float
    samples: int
    fractions: np.ndarray
    stderr: np.ndarray

    @property
    def worst_margin(self) -> float:
        """``min_x fraction(x) - (delta - 3 stderr(x))``; negative means certification fails."""
        return float(np.min(self.fractions - (self.delta - 3 * self.stderr)))

    @property
    def passed(self) -> bool:
        return self.worst_margin >= 0.0


class DecompositionScheme:
    """Random ``Delta``-bounded partitions of a finite working set.

    Subclasses implement :meth:`_sample`. Every sampled partition is checked
    for the diameter bound before it is returned.
    """

    kind = "abstract"

    def __init__(self, dist: np.ndarray, eps: float, delta: float):
        self.dist = np.asarray(dist, float)
        self.eps = float(eps)
        self.delta = float(delta)

    @property
    def size(self) -> int:
        return self.dist.shape[0]

    def sample(self, scale: float, rng: np.random.Generator) -> np.ndarray:
        labels = canonical_labels(self._sample(scale, rng))
        assert_bounded(self.dist, labels, scale)
        return labels

    def _sample(self, scale, rng):  # pragma: no cover - abstract
        raise NotImplementedError

    def padded(self, labels: np.ndarray, scale: float) -> np.ndarray:
        return outside_distance(self.dist, labels) > self.eps * scale

    def certify(self, scale: float, samples: int = 2000, seed: int = 0) -> PaddingReport:
        rng = np.random.default_rng(seed)
        hits = np.zeros(self.size)
        for _ in range(samples):
            hits += self.padded(self.sample(scale, rng), scale)
        frac = hits / samples
        stderr = np.sqrt(np.maximum(frac * (1 - frac), 0.0) / samples)
        return PaddingReport(scale, self.eps, self.delta, samples, frac, stderr)


class ShiftedGridScheme(DecompositionScheme):
    """Uniformly shifted axis-parallel grid with cell side ``Delta / sqrt(dim)``.

    Declared padding is ``eps = 1/(4 dim)`` and
    ``delta = (1 - 1/(2 sqrt(dim)))^dim``: the probability that a ball of
    radius ``eps * Delta`` around a fixed point stays inside its cell, which
    equals ``1/2`` in dimension one.
    """

    kind = "shifted-grid"

    def __init__(self, points: np.ndarray):
        pts = np.asarray(points, float)
        if pts.ndim == 1:
            pts = pts[:, None]
        self.points = pts
        self.dim = pts.shape[1]
        super().__init__(cdist(pts, pts), 1.0 / (4 * self.dim), (1 - 1 / (2 * math.sqrt(self.dim))) ** self.dim)

    def _sample(self, scale, rng):
        side = scale / math.sqrt(self.dim)
        shift = rng.uniform(0.0, side, size=self.dim)
        cells = np.floor((self.points + shift) / side).astype(np.int64)
        _, inv = np.unique(cells, axis=0, return_inverse=True)
        return inv.reshape(-1)


def shifted_grid_scheme(points: np.ndarray, dim: int | None = None, certify_scales: Sequence[float] = (),
                        samples: int = 2000, seed: int = 0) -> ShiftedGridScheme:
    """Shifted-grid scheme on a Euclidean point set, certified at the given scales.

    Raises
    ------
    DecompositionError
        If the empirical padding at one of ``certify_scales`` falls more than
        three standard errors below the declared ``delta``.
    """
    scheme = ShiftedGridScheme(points)
    if dim is not None and dim != scheme.dim:
        raise DecompositionError(f"points have dimension {scheme.dim}, not {dim}")
    for i, s in enumerate(certify_scales):
        rep = scheme.certify(s, samples, seed + i)
        if not rep.passed:
            raise DecompositionError(f"padding certification failed at scale {s} (margin {rep.worst_margin:.3g})")
    return scheme


# -- Nagata covers and peeling ------------------------------------------------------------------


@dataclass
class NagataCover:
    """Families ``B_0, ..., B_d`` of point-index sets at one scale.

    Sets within a family are disjoint with diameter at most ``r**(j+1)``,
    and every closed ball ``B(x, r**j)`` of the working set lies inside
    some member. Both conditions are checked at construction.
    """

    families: list
    dist: np.ndarray
    r: float
    j: int

    def __post_init__(self):
        self.dist = np.asarray(self.dist, float)
        n = self.dist.shape[0]
        self.families = [[np.unique(np.asarray(b, dtype=np.int64)) for b in fam if len(b)] for fam in self.families]
        if not self.families:
            raise DecompositionError("need at least one family")
        bound = self.r ** (self.j + 1)
        member_of = []
        for i, fam in enumerate(self.families):
            seen = np.zeros(n, dtype=bool)
            for b in fam:
                if b.min() < 0 or b.max() >= n:
                    raise DecompositionError("set refers to a point outside the working set")
                if seen[b].any():
                    raise DecompositionError(f"family {i} has overlapping sets")
                seen[b] = True
                if self.dist[np.ix_(b, b)].max() > bound * (1 + DIAMETER_RTOL):
                    raise DecompositionError(f"family {i} has a set of diameter above r^(j+1)")
            member_of.append(seen)
        radius = self.r**self.j
        for x in range(n):
            ball = np.flatnonzero(self.dist[x] <= radius)
            if not any(np.all(np.isin(ball, b)) for fam in self.families for b in fam):
                raise DecompositionError(f"ball around point {x} is not contained in any member")

    @property
    def d(self) -> int:
        return len(self.families) - 1

    @property
    def ball_radius(self) -> float:
        return self.r**self.j

    @property
    def bound(self) -> float:
        return self.r ** (self.j + 1)


def nagata_peeling(cover: NagataCover, seed: int | np.random.Generator) -> np.ndarray:
    """Random partition obtained by peeling the families in a random order.

    The family ``pi(0)`` is kept whole; each later family only keeps what
    earlier families left uncovered.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = cover.dist.shape[0]
    labels = np.full(n, -1, dtype=np.int64)
    nxt = 0
    for i in rng.permutation(cover.d + 1):
        for b in cover.families[i]:
            free = b[labels[b] < 0]
            if free.size:
                labels[free] = nxt
                nxt += 1
    if np.any(labels < 0):
        raise DecompositionError("cover does not cover the working set")
    labels = canonical_labels(labels)
    assert_bounded(cover.dist, labels, cover.bound)
    return labels


def ball_contained(dist: np.ndarray, labels: np.ndarray, radius: float) -> np.ndarray:
    """Per point: does its cluster contain the closed ``radius``-ball?"""
    return outside_distance(dist, labels) > radius


def interval_cover(n_points: int, width: int, r: float = 4.0, j: int = 1) -> NagataCover:
    """Two interleaved interval families on the path ``0, 1, ..., n_points - 1``.

    Family 0 uses the blocks ``[2 w m, 2 w (m + 1))``, family 1 the same
    blocks shifted by ``w``. With ``w = r^(j+1) / 2`` both families have
    diameter below ``r^(j+1)`` and every ``r^j``-ball lies in one of them
    whenever ``r^j <= w / 2``.
    """
    x = np.arange(n_points)
    dist = np.abs(x[:, None] - x[None, :]).astype(float)
    span = 2 * width
    fam_a = [np.flatnonzero((x // span) == m) for m in range(n_points // span + 1)]
    fam_b = [np.flatnonzero(((x + width) // span) == m) for m in range((n_points + width) // span + 1)]
    return NagataCover([fam_a, fam_b], dist, r, j)


class NagataScheme(DecompositionScheme):
    """Peeling of a fixed cover viewed as an ``r^(j+1)``-bounded scheme.

    ``eps = 1/r`` so that ``eps * Delta = r^j``; ``delta = 1/(d+1)``.
    """

    kind = "nagata-peeling"

    def __init__(self, cover: NagataCover):
        self.cover = cover
        super().__init__(cover.dist, 1.0 / cover.r, 1.0 / (cover.d + 1))

    def _sample(self, scale, rng):
        if scale < self.cover.bound * (1 - DIAMETER_RTOL):
            raise DecompositionError("peeling partitions are only bounded at the cover's scale")
        return nagata_peeling(self.cover, rng)

    def padded(self, labels, scale):
        return ball_contained(self.dist, labels, self.cover.ball_radius)


# -- snowflake embedding --------------------------------------------------------------------------

_SEED_OFFSET = 4096  # keeps scale indices nonnegative in seed sequences


def default_scale_range(dist: np.ndarray) -> range:
    off = dist[~np.eye(dist.shape[0], dtype=bool)]
    off = off[off > 0]
    if off.size == 0:
        return range(0, 1)
    return range(math.floor(math.log2(off.min())) - 2, math.ceil(math.log2(off.max())) + 2 + 1)


def _scale_block(scheme: DecompositionScheme, k: int, samples: int, seed: int) -> np.ndarray:
    """Raw values ``sigma_P(x) * min(d(x, X \\ P(x)), 2^k)``, shape ``(samples, n)``."""
    n = scheme.size
    out = np.empty((samples, n))
    cap = 2.0**k
    for s in range(samples):
        rng = np.random.default_rng([seed, k + _SEED_OFFSET, s])
        labels = scheme.sample(cap, rng)
        # representative of each cluster: its smallest member
        reps = np.unique(labels, return_index=True)[1]
        sign_rng = np.random.default_rng([seed, k + _SEED_OFFSET, s, 1])
        signs = np.where(sign_rng.random(n) < 0.5, -1.0, 1.0)
        outside = outside_distance(scheme.dist, labels)
        # a single cluster has no outside; every point then gets the same value,
        # so any constant works for differences and 0 keeps F(x) finite and centred
        outside[np.isinf(outside)] = 0.0
        out[s] = signs[reps[labels]] * np.minimum(outside, cap)
    return out


@dataclass
class SnowflakeEmbedding:
    """Finite-sample snowflake map; ``vectors[x]`` is the image of point ``x``."""

    theta: float
    scales: list
    samples: int
    raw: np.ndarray  # (len(scales), samples, n)
    dist: np.ndarray
    seed: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def vectors(self) -> np.ndarray:
        w = np.array([2.0 ** (-k * (1 - self.theta)) for k in self.scales])
        blocks = self.raw * w[:, None, None] / math.sqrt(self.samples)
        return blocks.transpose(2, 0, 1).reshape(self.raw.shape[2], -1)

    def block(self, k: int) -> np.ndarray:
        return self.raw[self.scales.index(k)]

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "scales": list(self.scales),
            "samples": self.samples,
            "vectors": self.vectors.tolist(),
        }


def snowflake_embed(scheme: DecompositionScheme, theta: float, k_range: Sequence[int] | None = None,
                    samples: int = 1000, seed: int = 0, workers: int = 1) -> SnowflakeEmbedding:
    """Empirical snowflake embedding ``F = sum_k 2^{-k(1-theta)} f_k (x) e_k``.

    Each ``f_k`` is represented by ``samples`` independent draws of a
    ``2^k``-bounded partition with independent cluster signs, scaled so
    that squared norms are sample means. Draw ``(k, s)`` uses its own seed
    derived from ``(seed, k, s)``, so the output does not depend on
    ``workers``.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    scales = list(default_scale_range(scheme.dist) if k_range is None else k_range)
    if not scales:
        raise ValueError("empty scale range")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(_scale_block, [scheme] * len(scales), scales, [samples] * len(scales),
                                   [seed] * len(scales)))
    else:
        blocks = [_scale_block(scheme, k, samples, seed) for k in scales]
    return SnowflakeEmbedding(theta, scales, samples, np.stack(blocks), scheme.dist, seed,
                              {"eps": scheme.eps, "delta": scheme.delta, "kind": scheme.kind})


def check_cases_bound(emb: SnowflakeEmbedding) -> float:
    """Largest violation of ``|f_j(x) - f_j(y)| <= 2 min(d(x,y), 2^j)`` over all samples.

    Returns ``max(lhs - rhs)``; nonpositive means the bound holds exactly.
    """
    worst = -np.inf
    for idx, k in enumerate(emb.scales):
        rhs = 2 * np.minimum(emb.dist, 2.0**k)
        for s in range(emb.samples):
            v = emb.raw[idx, s]
            worst = max(worst, float(np.max(np.abs(v[:, None] - v[None, :]) - rhs)))
    return worst


@dataclass
class LowerBoundRow:
    pair: tuple
    scale: int
    mean: float
    stderr: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.mean >= self.bound - 3 * self.stderr


def critical_scale(d: float) -> int:
    """The ``k`` with ``2^k < d <= 2^(k+1)``."""
    return math.ceil(math.log2(d)) - 1


def check_lower_bound(emb: SnowflakeEmbedding, eps: float | None = None,
                      delta: float | None = None) -> list[LowerBoundRow]:
    """Block-``k`` lower bound at each pair's critical scale.

    For ``2^k < d(x,y) <= 2^(k+1)`` the weighted scale-``k`` block has
    expected squared difference at least ``delta (eps 2^k)^2 / 2^{2k(1-theta)}``.
    Rows compare the Monte Carlo mean (and its standard error) to that value.
    """
    eps = emb.meta["eps"] if eps is None else eps
    delta = emb.meta["delta"] if delta is None else delta
    rows = []
    n = emb.dist.shape[0]
    for x in range(n):
        for y in range(x + 1, n):
            d = emb.dist[x, y]
            if d <= 0:
                continue
            k = critical_scale(d)
            if k not in emb.scales:
                continue
            w = 2.0 ** (-2 * k * (1 - emb.theta))
            sq = w * (emb.block(k)[:, x] - emb.block(k)[:, y]) ** 2
            rows.append(LowerBoundRow((x, y), k, float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(emb.samples)),
                                      delta * (eps * 2.0**k) ** 2 * w))
    return rows


@dataclass
class DistortionReport:
    expansion: float
    contraction: float
    distortion: float
    pairs: list
    theory: float | None = None

    @property
    def fitted_constant(self) -> float | None:
        return None if self.theory is None else self.distortion / self.theory


def theoretical_distortion(eps: float, delta: float, theta: float) -> float:
    """``1 / (eps sqrt(delta theta (1 - theta)))``, the shape of the snowflake distortion bound."""
    return 1.0 / (eps * math.sqrt(delta * theta * (1 - theta)))


def distortion(dist: np.ndarray, vectors: np.ndarray, theta: float, eps: float | None = None,
               delta: float | None = None) -> DistortionReport:
    """Ratios ``||F(x) - F(y)|| / d(x,y)^theta`` over pairs; coincident points skipped."""
    dist = np.asarray(dist, float)
    n = dist.shape[0]
    if n < 2:
        raise ValueError("need at least two points")
    fd = cdist(vectors, vectors)
    iu = np.triu_indices(n, 1)
    keep = dist[iu] > 0
    ratio = fd[iu][keep] / dist[iu][keep] ** theta
    if ratio.size == 0:
        raise ValueError("all points coincide")
    hi, lo = float(ratio.max()), float(ratio.min())
    pairs = [(int(a), int(b), float(r)) for a, b, r in zip(iu[0][keep], iu[1][keep], ratio)]
    theory = theoretical_distortion(eps, delta, theta) if eps and delta else None
    return DistortionReport(hi, lo, hi / lo if lo > 0 else math.inf, pairs, theory)


def upper_constant(emb: SnowflakeEmbedding) -> float:
    """Fitted ``C`` in ``||F(x)-F(y)||^2 <= C d^{2 theta} / (theta (1 - theta))``."""
    v = emb.vectors
    fd2 = cdist(v, v, "sqeuclidean")
    mask = emb.dist > 0
    return float(np.max(fd2[mask] / emb.dist[mask] ** (2 * emb.theta)) * emb.theta * (1 - emb.theta))


def truncation_error(emb: SnowflakeEmbedding) -> float:
    """Bound on omitted scales relative to the smallest ``d^{2 theta}``.

    Scales ``j`` below the range add at most ``4 * 4^{j theta}`` each, and scales
    above it at most ``4 d^2 4^{-j(1-theta)}``; both are geometric tails.
    """
    th = emb.theta
    off = emb.dist[emb.dist > 0]
    kmin, kmax = min(emb.scales), max(emb.scales)
    below = 4 * 4.0 ** (kmin * th) / (4.0**th - 1)
    above = 4 * off.max() ** 2 * 4.0 ** (-(kmax + 1) * (1 - th)) / (1 - 4.0 ** (-(1 - th)))
    return float((below + above) / off.min() ** (2 * th))


# -- theta optimisation and chained bounds --------------------------------------------------------


def theta_bound(theta: float, eps: float, delta: float, p: float, sigma: float, c: float = 1.0) -> float:
    """``((p / (theta sqrt(sigma))) * c / (eps sqrt(delta theta (1-theta))))^(1/theta)``.

    Returns ``inf`` when the value exceeds the float range, which happens for
    small ``theta``; use :func:`log_theta_bound` to compare such values.
    """
    try:
        return math.exp(log_theta_bound(theta, eps, delta, p, sigma, c))
    except OverflowError:
        return math.inf


def log_theta_bound(theta, eps, delta, p, sigma, c=1.0):
    inner = (math.log(p) - math.log(theta) - 0.5 * math.log(sigma) + math.log(c) - math.log(eps)
             - 0.5 * math.log(delta * theta * (1 - theta)))
    return inner / theta


def asymptotic_theta(sigma: float) -> float:
    """``1 - log log(1/sigma) / log(1/sigma)``."""
    l = math.log(1.0 / sigma)
    return 1.0 - math.log(l) / l


def optimize_theta(eps: float, delta: float, p: float, sigma: float, c: float = 1.0, tol: float = 1e-10) -> float:
    """Minimiser over ``theta in (0,1)`` of :func:`theta_bound`, by golden-section search.

    The logarithm of the bound is minimised; it tends to infinity at both
    ends of the interval.
    """
    if not (0 < eps < 1 and 0 < delta < 1 and 0 < sigma < 1 and p > 0):
        raise ValueError("need eps, delta, sigma in (0,1) and p > 0")
    f = lambda t: log_theta_bound(t, eps, delta, p, sigma, c)
    invphi = (math.sqrt(5) - 1) / 2
    a, b = 1e-9, 1 - 1e-12
    x1, x2 = b - invphi * (b - a), a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
    return 0.5 * (a + b)


def modulus_via_embedding(eps: float, delta: float, p: float, sigma: float, c: float = 1.0) -> float:
    """Chained bound: square-root snowflake into Hilbert space, then the Hilbert ``2p`` modulus.

    With ``D = c / (eps sqrt(delta / 4))`` the distortion of ``(Y, d^(1/2))``
    and ``4p / sqrt(sigma)`` the Hilbert modulus at exponent ``2p``, the
    bound is ``D^2 (4p / sqrt(sigma))^2``.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    dist_factor = c * theoretical_distortion(eps, delta, 0.5)
    return dist_factor**2 * (4 * p / math.sqrt(sigma)) ** 2
