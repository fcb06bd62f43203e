"""Poincare moduli of finite reversible chains with values in metric spaces.

For a chain ``(V, mu, nu)`` and ``f: V -> Y`` the Rayleigh ratio is

    sum_{u,v} nu(u) nu(v) d(f(u), f(v))^p / sum_{u,v} nu(u) mu(u->v) d(f(u), f(v))^p

and the modulus is the ``p``-th root of its supremum over ``f``. For
Hilbert targets at ``p = 2`` the supremum is ``1/sigma`` (``sigma`` the
spectral gap), attained by the second eigenvector; everywhere else the
optimiser below only produces lower bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .markov import MarkovChain, convolve, second_eigenvector, spectral_gap
from .spaces import (Euclidean, HyperbolicPlane, LpProduct, LpSpace, MetricSpace, WeightedMetricTree, _VectorSpace,
                     encode_point)

DEFAULT_RESTARTS = 32


class RayleighRatio(NamedTuple):
    value: float
    lhs: float
    rhs: float
    degenerate: bool


def _dist_power_matrix(space: MetricSpace, f: Sequence, p: float) -> np.ndarray:
    return space.pairwise(list(f)) ** p


def rayleigh_ratio(chain: MarkovChain, space: MetricSpace, p: float, f: Sequence) -> RayleighRatio:
    """Both sides of the Poincare inequality for the single map ``f``.

    A map with zero right-hand side (constant on every edge of the chain)
    gives ``value = 0`` and ``degenerate = True``.
    """
    if len(f) != chain.state_count:
        raise ValueError("f must assign a point to every state")
    dp = _dist_power_matrix(space, f, p)
    nu = chain.stationary
    lhs = float(nu @ dp @ nu)
    rhs = float(np.sum(nu[:, None] * chain.kernel * dp))
    if rhs <= 0.0:
        return RayleighRatio(0.0, lhs, rhs, True)
    return RayleighRatio(lhs / rhs, lhs, rhs, False)


def chain_energy(chain: MarkovChain, space: MetricSpace, p: float, f: Sequence, n: int = 1) -> float:
    """``E_{mu^n}(f) = 1/2 sum nu(u) mu^n(u->v) d(f(u), f(v))^p``."""
    k = convolve(chain, n).kernel if n > 1 else chain.kernel
    dp = _dist_power_matrix(space, f, p)
    return 0.5 * float(np.sum(chain.stationary[:, None] * k * dp))


@dataclass
class PoincareEstimate:
    chain: str
    space: dict
    p: float
    lam: float
    exact: bool
    witness: list
    sigma: float
    ratio: float
    method: str
    restarts: int = 0
    history: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "chain": self.chain,
            "space": self.space,
            "p": self.p,
            "lambda": self.lam,
            "exact": self.exact,
            "witness": [encode_point(x) for x in self.witness],
            "sigma": self.sigma,
        }


# -- witnesses on lines -----------------------------------------------------------------


def line_segment(space: MetricSpace):
    """Two points of ``space`` whose geodesic serves as an isometric copy of an interval."""
    if isinstance(space, WeightedMetricTree):
        return space.diameter_endpoints()
    if isinstance(space, HyperbolicPlane):
        a = np.zeros(space.dim)
        b = np.zeros(space.dim)
        a[0], b[0] = -0.5, 0.5
        return a, b
    if isinstance(space, (Euclidean, LpSpace)):
        a = np.zeros(space.dim)
        b = np.zeros(space.dim)
        b[0] = 1.0
        return a, b
    if isinstance(space, LpProduct):
        ends = [line_segment(space.factors[0])]
        rest = [fac.random_point(np.random.default_rng(0)) for fac in space.factors[1:]]
        return (ends[0][0], *rest), (ends[0][1], *rest)
    raise TypeError(f"no line segment known for {space!r}")


def embed_real_map(space: MetricSpace, values: Sequence[float]) -> list:
    """Place real values on a geodesic of ``space``, preserving distance ratios."""
    v = np.asarray(values, float)
    lo, hi = float(v.min()), float(v.max())
    a, b = line_segment(space)
    if hi == lo:
        return [a] * len(v)
    return [space.geodesic(a, b, float((x - lo) / (hi - lo))) for x in v]


# -- optimisers ---------------------------------------------------------------------------


def _norm_power_and_grad(space, diff, p):
    """``phi(D) = ||D||^p`` and its gradient, for an array of difference vectors."""
    if isinstance(space, LpSpace):
        q = space.p
        nrm = np.sum(np.abs(diff) ** q, axis=-1) ** (1.0 / q)
        with np.errstate(divide="ignore", invalid="ignore"):
            coef = np.where(nrm > 0, p * nrm ** (p - q), 0.0)
        grad = coef[..., None] * np.abs(diff) ** (q - 2) * diff
        return nrm**p, grad
    nrm = np.sqrt(np.sum(diff * diff, axis=-1))
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(nrm > 0, p * nrm ** (p - 2), 0.0) if p != 2 else np.full_like(nrm, 2.0)
    return nrm**p, coef[..., None] * diff


def _vector_ascent(chain, space, p, x0):
    """L-BFGS on ``log rhs - log lhs`` over maps into a normed coordinate space."""
    n, dim = x0.shape
    nu = chain.stationary
    w_all = np.outer(nu, nu)
    w_edge = nu[:, None] * chain.kernel
    w_edge = 0.5 * (w_edge + w_edge.T)

    def objective(z):
        f = z.reshape(n, dim)
        diff = f[:, None, :] - f[None, :, :]
        phi, dphi = _norm_power_and_grad(space, diff, p)
        lhs = float(np.sum(w_all * phi))
        rhs = float(np.sum(w_edge * phi))
        if lhs <= 0 or rhs <= 0:
            return 0.0, np.zeros_like(z)
        g_l = 2 * np.einsum("uv,uvk->uk", w_all, dphi)
        g_r = 2 * np.einsum("uv,uvk->uk", w_edge, dphi)
        val = math.log(rhs) - math.log(lhs)
        return val, (g_r / rhs - g_l / lhs).ravel()

    res = minimize(objective, x0.ravel(), jac=True, method="L-BFGS-B",
                   options={"maxiter": 2000, "gtol": 1e-12, "ftol": 1e-15})
    return res.x.reshape(n, dim)


def _coordinate_ascent(chain, space, p, f, rng, sweeps=25, extra_anchors=2):
    """Move one value at a time along geodesics towards anchors, maximising the ratio."""
    f = list(f)
    n = len(f)
    nu = chain.stationary
    w_all = np.outer(nu, nu)
    w_edge = nu[:, None] * chain.kernel
    w_edge = 0.5 * (w_edge + w_edge.T)
    dp = _dist_power_matrix(space, f, p)
    lhs = float(np.sum(w_all * dp))
    rhs = float(np.sum(w_edge * dp))

    vector = isinstance(space, _VectorSpace)
    arr = np.array(f, dtype=float) if vector else None

    def trial(u, point):
        if vector:
            row = space.dist_batch(np.broadcast_to(point, arr.shape), arr)
            row[u] = 0.0
            row = row**p
        else:
            row = np.array([space.dist(point, f[v]) if v != u else 0.0 for v in range(n)]) ** p
        delta = row - dp[u]
        new_l = lhs + 2 * float(w_all[u] @ delta)
        new_r = rhs + 2 * float(w_edge[u] @ delta)
        return new_l, new_r, row

    def ratio(lv, rv):
        return lv / rv if rv > 1e-300 else 0.0

    best = ratio(lhs, rhs)
    for _ in range(sweeps):
        gained = 0.0
        for u in range(n):
            anchors = [f[v] for v in range(n) if v != u] + space.random_points(rng, extra_anchors)
            for anchor in anchors:
                start = f[u]
                res = minimize_scalar(lambda t: -ratio(*trial(u, space.geodesic(start, anchor, t))[:2]),
                                      bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-6})
                cand = space.geodesic(start, anchor, float(res.x))
                new_l, new_r, row = trial(u, cand)
                val = ratio(new_l, new_r)
                if val > best * (1 + 1e-12):
                    gained += val - best
                    f[u] = cand
                    if vector:
                        arr[u] = cand
                    dp[u, :] = row
                    dp[:, u] = row
                    lhs, rhs, best = new_l, new_r, val
        if gained <= 1e-7 * max(best, 1.0):
            break
    return f


def _real_witness(chain, p, restarts, seed):
    """Best map into the real line; exact eigenvector for ``p = 2``."""
    if p == 2:
        _, vec = second_eigenvector(chain)
        return vec
    line = Euclidean(1)
    best_val, best_f = -1.0, None
    _, vec = second_eigenvector(chain)
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        x0 = vec[:, None] if r == 0 else rng.normal(size=(chain.state_count, 1))
        f = _vector_ascent(chain, line, p, x0)
        val = rayleigh_ratio(chain, line, p, list(f)).value
        if val > best_val:
            best_val, best_f = val, f[:, 0]
    return best_f


def modulus_estimate(chain: MarkovChain, space: MetricSpace, p: float = 2.0, restarts: int = DEFAULT_RESTARTS,
                     seed: int = 0, method: str = "auto") -> PoincareEstimate:
    """Estimate the Poincare modulus of ``chain`` into ``space``.

    Parameters
    ----------
    method : {"auto", "optimize"}
        ``"auto"`` uses the exact eigenvector solution for Euclidean targets
        at ``p = 2``; ``"optimize"`` always runs the multi-start search.

    Returns
    -------
    PoincareEstimate
        ``lam`` is a lower bound unless ``exact`` is set.

    Notes
    -----
    Restart 0 starts from the best real-valued witness laid along a
    geodesic, so the estimate for a space containing a line is never below
    the estimate for the line itself.
    """
    sigma = spectral_gap(chain).gap
    desc = space.descriptor()
    name = chain.name or f"chain[{chain.state_count}]"
    if method == "auto" and p == 2 and isinstance(space, Euclidean):
        vec = _real_witness(chain, 2, 1, seed)
        f = embed_real_map(space, vec)
        rr = rayleigh_ratio(chain, space, p, f)
        return PoincareEstimate(name, desc, p, math.sqrt(rr.value), True, f, sigma, rr.value, "eigenvector")

    real = _real_witness(chain, p, max(1, restarts // 4), seed)
    best_val, best_f, history = -1.0, None, []
    vector = isinstance(space, (Euclidean, LpSpace))
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        if r == 0:
            f0 = embed_real_map(space, real)
        else:
            f0 = space.random_points(rng, chain.state_count)
        if vector:
            f = list(_vector_ascent(chain, space, p, np.asarray(f0, float)))
        else:
            f = _coordinate_ascent(chain, space, p, f0, rng)
        rr = rayleigh_ratio(chain, space, p, f)
        history.append(rr.value)
        if not rr.degenerate and rr.value > best_val:
            best_val, best_f = rr.value, f
    return PoincareEstimate(name, desc, p, best_val ** (1.0 / p), False, best_f, sigma, best_val,
                            "lbfgs" if vector else "coordinate-ascent", restarts, history)


def local_modulus(chain: MarkovChain, space: MetricSpace, p: float, N: int, restarts: int = DEFAULT_RESTARTS,
                  seed: int = 0) -> PoincareEstimate:
    """Estimate restricted to maps whose image has at most ``N`` points.

    Each restart samples an ``N``-point subset of ``space`` and runs a
    discrete local search over assignments ``V -> subset``. Restart 0 uses
    quantiles of the real witness placed on a geodesic.
    """
    sigma = spectral_gap(chain).gap
    name = chain.name or f"chain[{chain.state_count}]"
    n = chain.state_count
    if N < 1:
        raise ValueError("N must be positive")
    if N == 1:
        return PoincareEstimate(name, space.descriptor(), p, 0.0, True, [], sigma, 0.0, "constant")
    if N >= n:
        return modulus_estimate(chain, space, p, restarts, seed)
    nu = chain.stationary
    w_all = np.outer(nu, nu)
    w_edge = nu[:, None] * chain.kernel
    real = _real_witness(chain, p, max(1, restarts // 4), seed)
    best_val, best_f = 0.0, None
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        if r == 0:
            qs = np.quantile(real, np.linspace(0, 1, N))
            subset = embed_real_map(space, np.concatenate([qs, real]))[:N]
            assign = np.abs(real[:, None] - qs[None, :]).argmin(axis=1)
        else:
            subset = space.random_points(rng, N)
            assign = rng.integers(0, N, size=n)
        dp = space.pairwise(subset) ** p

        def value(a):
            m = dp[np.ix_(a, a)]
            rhs = float(np.sum(w_edge * m))
            return float(np.sum(w_all * m)) / rhs if rhs > 0 else 0.0

        cur = value(assign)
        improved = True
        while improved:
            improved = False
            for u in range(n):
                keep = assign[u]
                for s in range(N):
                    if s == keep:
                        continue
                    assign[u] = s
                    val = value(assign)
                    if val > cur * (1 + 1e-12):
                        cur, keep, improved = val, s, True
                assign[u] = keep
        if cur > best_val:
            best_val, best_f = cur, [subset[i] for i in assign]
    return PoincareEstimate(name, space.descriptor(), p, best_val ** (1.0 / p), False, best_f or [], sigma,
                            best_val, "discrete-local-search", restarts)


# -- extrapolation ------------------------------------------------------------------------


def matousek_bound(modulus: float, p: float, q: float, branch: str | None = None) -> float:
    """Modulus at exponent ``q`` from a real-valued modulus at exponent ``p``.

    The extrapolation lemma is phrased with a constant ``A`` such that the
    ``p``-modulus equals ``A p``. This function takes the modulus itself,
    sets ``A = modulus / p``, and returns ``4 A q`` when ``q >= p`` and
    ``A q`` when ``1 < q <= p``. At ``q = p`` both apply; ``branch`` picks
    ``"upper"`` (default) or ``"lower"``.

    Examples
    --------
    >>> matousek_bound(1.0, 2, 2)
    4.0
    >>> matousek_bound(1.0, 2, 2, branch="lower")
    1.0
    """
    if q <= 1:
        raise ValueError("q must exceed 1")
    a = modulus / p
    if branch is None:
        branch = "upper" if q >= p else "lower"
    if branch == "upper":
        if q < p:
            raise ValueError("upper branch needs q >= p")
        return 4.0 * a * q
    if branch == "lower":
        if q > p:
            raise ValueError("lower branch needs q <= p")
        return a * q
    raise ValueError(f"unknown branch {branch!r}")


def real_modulus_upper_bound(sigma: float, p: float) -> float:
    """``2p / sqrt(sigma)``: extrapolation from the Hilbert value at exponent 2."""
    return matousek_bound(1.0 / math.sqrt(sigma), 2.0, p) if p >= 2 else 1.0 / math.sqrt(sigma)


# -- finite versus infinite forms ---------------------------------------------------------


@dataclass
class FiniteFormCheck:
    c_bar: float
    ratios: dict
    ok: bool


def finite_form_check(chain: MarkovChain, space: MetricSpace, p: float, f: Sequence, m: int,
                      n_values: Sequence[int]) -> FiniteFormCheck:
    """Compare the infinite and finite forms of the inequality for one map.

    ``c_bar`` is the smallest constant with
    ``sum nu nu d^p <= c_bar^p E_{mu^m}(f)``; for every ``n > m`` the
    ratio ``(E_{mu^n}(f) / E_{mu^m}(f))^(1/p)`` must not exceed ``2 c_bar``.
    """
    e_m = chain_energy(chain, space, p, f, m)
    lhs = rayleigh_ratio(chain, space, p, f).lhs
    if e_m <= 0:
        return FiniteFormCheck(0.0, {}, True)
    c_bar = (lhs / e_m) ** (1.0 / p)
    ratios = {}
    ok = True
    for n in n_values:
        if n <= m:
            continue
        r = (chain_energy(chain, space, p, f, n) / e_m) ** (1.0 / p)
        ratios[int(n)] = r
        ok = ok and r <= 2 * c_bar * (1 + 1e-9)
    return FiniteFormCheck(c_bar, ratios, ok)
