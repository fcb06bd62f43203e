"""Graph-model labelings and induced walks on the free-group Cayley tree.

Free-group words are tuples of nonzero integers: ``i`` stands for the
generator ``s_i`` and ``-i`` for its inverse. As text, generators are the
letters ``a..z`` and inverses the matching upper-case letters, so ``"aB"``
is ``s_1 s_2^{-1}``.

The Cayley graph of the free group on ``k`` generators is the ``2k``-regular
tree ``X``; a vertex of ``X`` is a reduced word. Distributions on ``X`` are
sparse maps ``word -> probability``.
"""

from __future__ import annotations

import json
import logging
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .graphs import UndirectedGraph, distance_distribution, girth

logger = logging.getLogger(__name__)

Word = tuple


class WordError(ValueError):
    pass


class GirthError(ValueError):
    """Raised when a walk length reaches half the girth."""


# -- free group arithmetic ---------------------------------------------------------------


def _check_letter(x) -> int:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool) and int(x) != 0:
        return int(x)
    raise WordError(f"unknown letter {x!r}")


def reduce(letters: Iterable[int]) -> Word:
    """Freely reduce a letter sequence."""
    out: list[int] = []
    for x in letters:
        x = _check_letter(x)
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def is_reduced(w: Sequence[int]) -> bool:
    return all(a != -b for a, b in zip(w, w[1:]))


def multiply(w1: Sequence[int], w2: Sequence[int]) -> Word:
    return reduce(tuple(w1) + tuple(w2))


def inverse(w: Sequence[int]) -> Word:
    return tuple(-_check_letter(x) for x in reversed(w))


def word_from_str(text: str) -> Word:
    out = []
    for ch in text:
        if "a" <= ch <= "z":
            out.append(ord(ch) - ord("a") + 1)
        elif "A" <= ch <= "Z":
            out.append(-(ord(ch) - ord("A") + 1))
        else:
            raise WordError(f"unknown letter {ch!r}")
    return tuple(out)


def word_to_str(w: Sequence[int]) -> str:
    chars = []
    for x in w:
        x = _check_letter(x)
        if abs(x) > 26:
            raise WordError("text form supports at most 26 generators")
        chars.append(chr(ord("a") + x - 1) if x > 0 else chr(ord("A") - x - 1))
    return "".join(chars)


def generators(k: int) -> list[int]:
    """The symmetric generating set ``s_1, s_1^{-1}, ..., s_k, s_k^{-1}``."""
    return [s for i in range(1, k + 1) for s in (i, -i)]


def reduced_words(k: int, length: int) -> list[Word]:
    """All reduced words of the given length, in lexicographic letter order."""
    gens = generators(k)
    words: list[Word] = [()]
    for _ in range(length):
        words = [w + (s,) for w in words for s in gens if not w or w[-1] != -s]
    return words


def sphere_size(k: int, r: int) -> int:
    return 1 if r == 0 else 2 * k * (2 * k - 1) ** (r - 1)


# -- distributions on the tree --------------------------------------------------------------


class TreeDistribution(dict):
    """Sparse probability distribution on reduced words."""

    weights: dict | None = None

    def total(self) -> float:
        return float(sum(self.values()))

    def radius(self) -> int:
        return max((len(w) for w in self), default=0)

    def tv(self, other: dict) -> float:
        keys = set(self) | set(other)
        return 0.5 * float(sum(abs(self.get(w, 0.0) - other.get(w, 0.0)) for w in keys))

    def radial(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for w, m in self.items():
            out[len(w)] = out.get(len(w), 0.0) + m
        return dict(sorted(out.items()))

    def translate(self, g: Sequence[int]) -> "TreeDistribution":
        """Push forward under left multiplication by ``g``."""
        out = TreeDistribution()
        for w, m in self.items():
            key = multiply(g, w)
            out[key] = out.get(key, 0.0) + m
        return out

    def to_json(self) -> str:
        return json.dumps({word_to_str(w): float(m) for w, m in sorted(self.items())})


def tree_radial(k: int, m: int) -> np.ndarray:
    """``P(|X_m| = r)`` for ``r = 0..m``: a birth-death chain on word length."""
    law = np.zeros(m + 1)
    law[0] = 1.0
    down = 1.0 / (2 * k)
    for _ in range(m):
        new = np.zeros(m + 1)
        new[1:2] += law[0]
        new[2:] += law[1:-1] * (1 - down)
        new[:-1] += law[1:] * down
        law = new
    return law


def tree_walk(k: int, m: int) -> TreeDistribution:
    """``mu_X^m`` from the identity.

    The walk is radially symmetric, so the mass of a word depends only on
    its length: the length law is computed exactly and spread evenly over
    each sphere.
    """
    if m < 0:
        raise ValueError("m must be nonnegative")
    law = tree_radial(k, m)
    out = TreeDistribution()
    for r in range(m + 1):
        if law[r] <= 0.0 or (m - r) % 2:
            continue
        share = law[r] / sphere_size(k, r)
        for w in reduced_words(k, r):
            out[w] = share
    return out


def tree_walk_convolution(k: int, m: int) -> TreeDistribution:
    """Same law as :func:`tree_walk`, by repeated convolution over words (oracle)."""
    dist = {(): 1.0}
    gens = generators(k)
    for _ in range(m):
        new: dict = {}
        for w, p in dist.items():
            for s in gens:
                key = w[:-1] if w and w[-1] == -s else w + (s,)
                new[key] = new.get(key, 0.0) + p / (2 * k)
        dist = new
    return TreeDistribution(dist)


def string_law(k: int, length: int) -> TreeDistribution:
    """Law of a uniform string of ``length`` letters, reduced; equals ``mu_X^length``."""
    return tree_walk(k, length)


# -- labelings ---------------------------------------------------------------------------------


@dataclass
class Labeling:
    """Symmetric labeling of the oriented edges by length-``j`` letter strings.

    ``labels[(u, v)]`` is stored unreduced; ``labels[(v, u)]`` is its
    formal inverse (reversed with every letter inverted).
    """

    graph: UndirectedGraph
    k: int
    j: int
    labels: dict

    def __post_init__(self):
        for (u, v) in self.graph.edges:
            a, b = self.labels.get((u, v)), self.labels.get((v, u))
            if a is None or b is None:
                raise WordError(f"edge ({u}, {v}) is unlabeled")
            if len(a) != self.j or tuple(b) != inverse(a):
                raise WordError(f"labels on ({u}, {v}) break symmetry or length")
            for x in a:
                if abs(_check_letter(x)) > self.k:
                    raise WordError(f"letter {x} outside the {self.k} generators")

    def __call__(self, u: int, v: int) -> Word:
        return self.labels[(u, v)]

    def to_json(self) -> str:
        edges = {f"{u},{v}": word_to_str(self.labels[(u, v)]) for u, v in self.graph.edges}
        return json.dumps({"k": self.k, "j": self.j, "edges": edges}, sort_keys=True)

    @classmethod
    def from_json(cls, graph: UndirectedGraph, text: str) -> "Labeling":
        data = json.loads(text)
        labels = {}
        for key, s in data["edges"].items():
            u, v = (int(t) for t in key.split(","))
            w = word_from_str(s)
            labels[(u, v)] = w
            labels[(v, u)] = inverse(w)
        return cls(graph, int(data["k"]), int(data["j"]), labels)


def _letters_from_index(idx: np.ndarray) -> Word:
    return tuple(int(i // 2 + 1) * (1 if i % 2 == 0 else -1) for i in idx)


def sample_labeling(g: UndirectedGraph, k: int, j: int, seed: int | np.random.Generator) -> Labeling:
    """Independent uniform strings in ``S^j`` on each edge ``u < v``; the reverse edge gets the inverse."""
    if k < 1 or j < 1:
        raise ValueError("k and j must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    draws = rng.integers(0, 2 * k, size=(g.edge_count, j))
    labels = {}
    for (u, v), row in zip(g.edges, draws):
        w = _letters_from_index(row)
        labels[(u, v)] = w
        labels[(v, u)] = inverse(w)
    return Labeling(g, k, j, labels)


def constant_labeling(g: UndirectedGraph, k: int, word: Sequence[int]) -> Labeling:
    """Every edge ``u < v`` carries the same string."""
    w = tuple(word)
    labels = {}
    for u, v in g.edges:
        labels[(u, v)] = w
        labels[(v, u)] = inverse(w)
    return Labeling(g, k, len(w), labels)


def alpha_path(alpha: Labeling, path: Sequence[int]) -> Word:
    """Reduced product of the labels along a vertex path."""
    letters: list[int] = []
    adj = alpha.graph.adjacency
    for u, v in zip(path, path[1:]):
        if v not in adj[u]:
            raise WordError(f"{u} and {v} are not adjacent")
        letters.extend(alpha.labels[(u, v)])
    return reduce(letters)


def _bfs_tree(g: UndirectedGraph, root: int, radius: float = math.inf) -> tuple[dict, dict]:
    parent = {root: -1}
    depth = {root: 0}
    queue = deque([root])
    while queue:
        u = queue.popleft()
        if depth[u] >= radius:
            continue
        for w in g.adjacency[u]:
            if w not in parent:
                parent[w] = u
                depth[w] = depth[u] + 1
                queue.append(w)
    return parent, depth


def _path_to_root(parent: dict, v: int) -> list[int]:
    path = [v]
    while parent[path[-1]] >= 0:
        path.append(parent[path[-1]])
    return path[::-1]


def relators(alpha: Labeling, g: UndirectedGraph | None = None) -> list[Word]:
    """Reduced words of a fundamental cycle basis (one per non-tree edge of a BFS tree).

    The full set of cycle words is infinite; this basis has ``m - n + 1``
    members for a connected graph.
    """
    g = alpha.graph if g is None else g
    g.require_connected()
    parent, _ = _bfs_tree(g, 0)
    out = []
    for u, v in g.edges:
        if parent.get(v) == u or parent.get(u) == v:
            continue
        cycle = _path_to_root(parent, u) + _path_to_root(parent, v)[::-1]
        out.append(alpha_path(alpha, cycle))
    return out


# -- induced walks -----------------------------------------------------------------------------


def _require_short(g: UndirectedGraph, q: int) -> None:
    if q < 0:
        raise ValueError("q must be nonnegative")
    if not q < girth(g) / 2:
        raise GirthError(f"q={q} is not below half the girth ({girth(g)})")


def beta_map(alpha: Labeling, u: int, radius: int, basepoint: Sequence[int] = ()) -> dict[int, Word]:
    """``beta_{u->x}(v) = x alpha(shortest path u..v)`` for ``d(u, v) <= radius``."""
    parent, _ = _bfs_tree(alpha.graph, u, radius)
    order = sorted(parent, key=lambda v: len(_path_to_root(parent, v)))
    out = {u: reduce(basepoint)}
    for v in order:
        if v == u:
            continue
        out[v] = multiply(out[parent[v]], alpha.labels[(parent[v], v)])
    return out


def _walk_power(g: UndirectedGraph, q: int) -> tuple[np.ndarray, np.ndarray]:
    deg = g.degrees.astype(float)
    kernel = g.adjacency_matrix() / deg[:, None]
    return deg / deg.sum(), np.linalg.matrix_power(kernel, q)


def simulate_walk(alpha: Labeling, q: int, basepoint: Sequence[int] = (), method: str = "ball") -> TreeDistribution:
    """``mu^q_{G,alpha}(x -> .)``: the labeled walk pushed to the tree.

    ``method="ball"`` pushes ``mu_G^q(u -> .)`` forward through
    ``beta_{u->x}`` for every start ``u``. ``method="paths"`` enumerates all
    ``q``-step paths and asserts that each path word equals the word of its
    backtrack-erased path.
    """
    g = alpha.graph
    g.require_connected()
    _require_short(g, q)
    if method == "paths":
        return _simulate_by_paths(alpha, q, basepoint)
    if method != "ball":
        raise ValueError(f"unknown method {method!r}")
    nu, power = _walk_power(g, q)
    out = TreeDistribution()
    for u in range(g.n):
        beta = beta_map(alpha, u, q, basepoint)
        for v in np.flatnonzero(power[u] > 0):
            key = beta[int(v)]
            out[key] = out.get(key, 0.0) + nu[u] * power[u, v]
    return out


def erase_backtracks(path: Sequence[int]) -> list[int]:
    out: list[int] = []
    for v in path:
        if len(out) >= 2 and out[-2] == v:
            out.pop()
        else:
            out.append(v)
    return out


def enumerate_paths(g: UndirectedGraph, q: int):
    """Yield ``(path, probability)`` for every ``q``-step path of the stationary walk."""
    deg = g.degrees
    two_m = 2 * g.edge_count
    stack = [((u,), deg[u] / two_m) for u in range(g.n)]
    while stack:
        path, prob = stack.pop()
        if len(path) == q + 1:
            yield path, prob
            continue
        last = path[-1]
        for w in g.adjacency[last]:
            stack.append((path + (w,), prob / deg[last]))


def _simulate_by_paths(alpha, q, basepoint):
    out = TreeDistribution()
    base = reduce(basepoint)
    for path, prob in enumerate_paths(alpha.graph, q):
        word = alpha_path(alpha, path)
        simple = erase_backtracks(path)
        if alpha_path(alpha, simple) != word:
            raise AssertionError(f"backtrack erasure changed the word along {path}")
        key = multiply(base, word)
        out[key] = out.get(key, 0.0) + float(prob)
    return out


def reduced_length_law(g: UndirectedGraph, q: int, exact: bool = False) -> dict:
    """``P_G^q(l)`` from path enumeration: mass of paths whose erased length is ``l``."""
    out: dict = {}
    deg = g.degrees
    two_m = 2 * g.edge_count
    if exact:
        stack = [((u,), Fraction(int(deg[u]), two_m)) for u in range(g.n)]
        while stack:
            path, prob = stack.pop()
            if len(path) == q + 1:
                l = len(erase_backtracks(path)) - 1
                out[l] = out.get(l, Fraction(0)) + prob
                continue
            for w in g.adjacency[path[-1]]:
                stack.append((path + (w,), prob / int(deg[path[-1]])))
        return dict(sorted(out.items()))
    for path, prob in enumerate_paths(g, q):
        l = len(erase_backtracks(path)) - 1
        out[l] = out.get(l, 0.0) + float(prob)
    return dict(sorted(out.items()))


def mean_walk(g: UndirectedGraph, q: int, j: int, k: int, exact: bool = False) -> TreeDistribution:
    """Expected labeled walk ``sum_l P_G^q(l) mu_X^{jl}``.

    The weights ``P_G^q`` (the law of the distance travelled by ``q``
    stationary steps) are attached as ``.weights``.
    """
    g.require_connected()
    _require_short(g, q)
    weights = distance_distribution(g, q, exact=exact)
    out = TreeDistribution()
    for l, pl in weights.items():
        for w, m in tree_walk(k, j * l).items():
            out[w] = out.get(w, 0.0) + float(pl) * m
    out.weights = {int(l): (pl if exact else float(pl)) for l, pl in weights.items()}
    return out


def eps_dkj(d: int, k: int, j: int) -> float:
    """``1 / (d (2k)^j)``."""
    return 1.0 / (d * (2 * k) ** j)


def min_mass_report(g: UndirectedGraph, q: int, j: int, k: int) -> dict:
    """Smallest nonzero mean-walk mass against ``eps(d,k,j)^q``, ``d`` the maximum degree."""
    mw = mean_walk(g, q, j, k)
    d = int(g.degrees.max())
    floor = eps_dkj(d, k, j) ** q
    smallest = min(mw.values())
    tight = [word_to_str(w) for w, m in mw.items() if math.isclose(m, floor, rel_tol=1e-12)]
    if tight:
        logger.info("mean walk attains eps^q on %d words", len(tight))
    return {"min_mass": float(smallest), "floor": floor, "ratio": float(smallest / floor), "tight_words": tight,
            "ok": bool(smallest >= floor * (1 - 1e-12))}


# -- effective simulation ---------------------------------------------------------------------


@dataclass
class EffectiveSimulationReport:
    ok: bool
    worst_ratio_low: float
    worst_ratio_high: float
    q0: int
    per_q: dict
    missing: int

    def to_dict(self) -> dict:
        return {"ok": self.ok, "worst_ratio_low": self.worst_ratio_low, "worst_ratio_high": self.worst_ratio_high,
                "q0": self.q0, "per_q": self.per_q, "missing": self.missing}


def effective_simulation_check(alpha: Labeling, q0: int, k: int | None = None,
                               j: int | None = None) -> EffectiveSimulationReport:
    """Pointwise comparison of the labeled walks with their means, from the identity.

    Checks ``mu^q_{G,alpha} >= mean/2`` on the support of the mean for
    ``1 <= q <= q0`` and ``mu^1_{G,alpha} <= 2 mu_X^j`` everywhere. With
    ``q0 = 0`` only the second condition is tested. One basepoint suffices
    because both sides are equivariant.
    """
    g = alpha.graph
    k = alpha.k if k is None else k
    j = alpha.j if j is None else j
    _require_short(g, max(q0, 1))
    low, missing, per_q = math.inf, 0, {}
    for q in range(1, q0 + 1):
        sim = simulate_walk(alpha, q)
        mean = mean_walk(g, q, j, k)
        ratios = [sim.get(w, 0.0) / m for w, m in mean.items()]
        missing += sum(1 for w in mean if w not in sim)
        per_q[q] = float(min(ratios))
        low = min(low, per_q[q])
    sim1 = simulate_walk(alpha, 1)
    ref = tree_walk(k, j)
    high = float(max(m / ref[w] if w in ref else math.inf for w, m in sim1.items()))
    ok = bool(low >= 0.5 and high <= 2.0)
    return EffectiveSimulationReport(ok, low, high, q0, per_q, missing)


# -- concentration bound ------------------------------------------------------------------------


def tau(q: int, d: int, N: int) -> float:
    """Hamming-Lipschitz constant ``(4q / 3N) (d/3)^q``."""
    return 4 * q / (3 * N) * (d / 3) ** q


def azuma_failure_bound(d: int, k: int, j: int, q0: int, N: int, edge_count: int) -> dict:
    """Union bound on the probability that effective simulation fails at some ``q <= q0``.

    Per ``q``: tail ``exp(-eps^{2q} / (8 |E| tau_q^2))`` times the number
    ``(2k)^{qj}`` of random variables.
    """
    if min(d, k, j, N, edge_count) <= 0 or q0 < 1:
        raise ValueError("parameters must be positive")
    eps = eps_dkj(d, k, j)
    taus, tails, terms = {}, {}, {}
    for q in range(1, q0 + 1):
        t = tau(q, d, N)
        tail = math.exp(-(eps ** (2 * q)) / (8 * edge_count * t * t))
        taus[q], tails[q] = t, tail
        terms[q] = (2 * k) ** (q * j) * tail
    total = sum(terms.values())
    return {"eps": eps, "tau": taus, "tail": tails, "terms": terms, "total": total,
            "probability": min(1.0, total)}
