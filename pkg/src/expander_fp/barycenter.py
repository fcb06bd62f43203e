"""Geodesic p-centers of mass and circumcenters of finite sets.

The p-center of a finitely supported measure ``sigma`` is the unique
minimiser of the moment ``y -> sum_i w_i d(y, x_i)^p``. Solvers:

* Riemannian spaces (Euclidean, hyperbolic): Newton steps along ``exp``
  with backtracking on the moment.
* ``l_p`` spaces with matching exponent: the moment separates by coordinate.
* ``l_p`` products with matching exponent: one solve per factor.
* Everything else (metric trees): a Sturm-type stochastic midpoint phase
  for ``p = 2`` followed by cyclic line searches along the geodesics to the
  support points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.optimize import brentq, least_squares, minimize_scalar

from .spaces import Euclidean, HyperbolicPlane, LpProduct, LpSpace, MetricSpace, WeightedMetricTree, _VectorSpace

STOCHASTIC_CAP = 10_000
POLISH_CAP = 1_000


class BarycenterError(RuntimeError):
    """Raised when a solver exhausts its iteration budget."""


@dataclass
class FiniteMeasure:
    support: list
    weights: np.ndarray

    def __post_init__(self):
        self.support = list(self.support)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if not self.support:
            raise ValueError("support must be non-empty")
        if w.shape != (len(self.support),):
            raise ValueError("one weight per support point")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        self.weights = w

    @classmethod
    def normalized(cls, support: Sequence, weights: Sequence[float] | None = None) -> "FiniteMeasure":
        w = np.ones(len(support)) if weights is None else np.asarray(weights, dtype=float)
        keep = w > 0
        support = [x for x, k in zip(support, keep) if k]
        w = w[keep]
        return cls(support, w / w.sum())

    @classmethod
    def uniform(cls, support: Sequence) -> "FiniteMeasure":
        return cls.normalized(support)

    def __len__(self):
        return len(self.support)


@dataclass
class BarycenterResult:
    center: Any
    moment: float
    iterations: int
    converged: bool
    method: str = ""
    trace: list = field(default_factory=list, repr=False)


def moment(space: MetricSpace, sigma: FiniteMeasure, y, p: float) -> float:
    """``d_p(sigma, y)^p``."""
    d = np.array([space.dist(y, x) for x in sigma.support])
    return float(np.dot(sigma.weights, d**p))


def moments_batch(space: MetricSpace, sigma: FiniteMeasure, ys, p: float) -> np.ndarray:
    """Moments at many points at once (vectorised for coordinate spaces)."""
    n = len(ys)
    out = np.zeros(n)
    for x, w in zip(sigma.support, sigma.weights):
        if isinstance(space, _VectorSpace):
            d = space.dist_batch(np.asarray(ys), np.broadcast_to(np.asarray(x, float), (n, space.dim)))
        else:
            d = space.dist_batch(ys, [x] * n)
        out += w * d**p
    return out


def default_tol(space: MetricSpace) -> float:
    return 1e-6 if isinstance(space, WeightedMetricTree) else 1e-8


def p_center(space: MetricSpace, sigma: FiniteMeasure, p: float = 2.0, tol: float | None = None,
             seed: int = 0, start=None) -> BarycenterResult:
    """p-center of mass of ``sigma`` in ``space``.

    Parameters
    ----------
    tol : float, optional
        Target accuracy of the minimal moment; defaults to 1e-8, or 1e-6 on
        metric trees.
    seed : int
        Seed for the stochastic phase (trees only).
    start : point, optional
        Warm start; otherwise the best support point.

    Raises
    ------
    BarycenterError
        If the iteration budget runs out before the stopping rule holds.
    """
    if tol is None:
        tol = default_tol(space)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if p < 1:
        raise ValueError("p must be at least 1")
    support = [space.validate(x) for x in sigma.support]
    sigma = FiniteMeasure(support, sigma.weights)
    if len(support) == 1:
        return BarycenterResult(support[0], 0.0, 0, True, "trivial")
    if isinstance(space, LpProduct) and p == space.p:
        return _product_center(space, sigma, p, tol, seed)
    if isinstance(space, LpSpace) and p == space.p:
        return _separable_center(space, sigma, p)
    if space.riemannian:
        return _riemannian_center(space, sigma, p, tol, start)
    return _geodesic_descent(space, sigma, p, tol, seed, start)


def _best_support_point(space, sigma, p):
    ms = [moment(space, sigma, x, p) for x in sigma.support]
    return sigma.support[int(np.argmin(ms))]


def _product_center(space: LpProduct, sigma, p, tol, seed):
    parts, iters, ok = [], 0, True
    for k, factor in enumerate(space.factors):
        sub = FiniteMeasure([x[k] for x in sigma.support], sigma.weights)
        res = p_center(factor, sub, p, tol / len(space.factors), seed + k)
        parts.append(res.center)
        iters += res.iterations
        ok = ok and res.converged
    center = tuple(parts)
    return BarycenterResult(center, moment(space, sigma, center, p), iters, ok, "product")


def _separable_center(space: LpSpace, sigma, p):
    pts = np.asarray(sigma.support)
    w = sigma.weights
    center = np.empty(space.dim)
    for k in range(space.dim):
        col = pts[:, k]
        lo, hi = float(col.min()), float(col.max())
        if hi - lo == 0.0:
            center[k] = lo
            continue

        def deriv(y, col=col):
            diff = y - col
            return float(np.dot(w, np.abs(diff) ** (p - 1) * np.sign(diff)))

        center[k] = brentq(deriv, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return BarycenterResult(center, moment(space, sigma, center, p), space.dim, True, "separable")


def _frame(space, y):
    """Conformal factor of the metric at ``y`` and the transverse Hessian factor.

    The Hessian of ``d(., x)^2 / 2`` in an orthonormal frame is ``1`` along
    the geodesic to ``x`` and ``kappa(d)`` across it: ``kappa = 1`` in flat
    space and ``d coth d`` in curvature ``-1``.
    """
    if isinstance(space, HyperbolicPlane):
        lam = 2.0 / (1.0 - float(np.dot(y, y)))
        return lam, lambda d: d / math.tanh(d) if d > 1e-8 else 1.0 + d * d / 3.0
    return 1.0, lambda d: 1.0


def _riemannian_center(space, sigma, p, tol, start):
    pts = [np.asarray(x, float) for x in sigma.support]
    w = sigma.weights
    y = np.asarray(_best_support_point(space, sigma, p) if start is None else space.validate(start), float)
    f_y = moment(space, sigma, y, p)
    scale = max(max(space.dist(y, x) for x in pts), 1e-300)
    dim = y.shape[0]
    trace = [f_y]
    for it in range(1, POLISH_CAP + 1):
        lam, kappa = _frame(space, y)
        logs = [lam * space.log(y, x) for x in pts]  # orthonormal coordinates
        d = np.array([np.linalg.norm(v) for v in logs])
        a = w * d ** (p - 2) if p != 2 else w.copy()
        g = sum(ai * v for ai, v in zip(a, logs))
        hess = np.zeros((dim, dim))
        for ai, v, di in zip(a, logs, d):
            if di > 0:
                u = v / di
                P = np.outer(u, u)
                hess += ai * ((p - 1) * P + kappa(di) * (np.eye(dim) - P))
            else:
                hess += ai * np.eye(dim)
        try:
            step = np.linalg.solve(hess, g)
        except np.linalg.LinAlgError:
            step = g / max(a.sum(), 1e-300)
        step_len = float(np.linalg.norm(step))
        if step_len <= 1e-13 * scale:
            return BarycenterResult(y, f_y, it, True, "riemannian-newton", trace)
        step = step / lam
        s = 1.0
        while True:
            cand = space.exp(y, s * step)
            f_c = moment(space, sigma, cand, p)
            if f_c <= f_y or s < 1e-12:
                break
            s *= 0.5
        if f_c > f_y:
            # no descent left at machine precision
            return BarycenterResult(y, f_y, it, True, "riemannian-newton", trace)
        moved = space.dist(y, cand)
        y, f_y = cand, f_c
        trace.append(f_y)
        if moved <= 1e-13 * scale:
            return BarycenterResult(y, f_y, it, True, "riemannian-newton", trace)
    raise BarycenterError(f"no convergence within {POLISH_CAP} iterations")


def _tree_line_search(space: WeightedMetricTree, sigma, p, y, target):
    """Exact minimiser of the moment along ``[y, target]``.

    In a metric tree the distance from ``[y,target]_s`` to ``x_i`` is
    ``|s - s_i| + h_i`` where ``s_i`` is the Gromov product of ``target``
    and ``x_i`` at ``y``. The derivative is monotone, so bisection on its
    sign is exact up to floating point.
    """
    length = space.dist(y, target)
    if length == 0.0:
        return 0.0
    dy = np.array([space.dist(y, x) for x in sigma.support])
    dt = np.array([space.dist(target, x) for x in sigma.support])
    s_i = np.clip(0.5 * (length + dy - dt), 0.0, length)
    h_i = np.maximum(dy - s_i, 0.0)
    w = sigma.weights

    def right_deriv(s):
        r = np.abs(s - s_i) + h_i
        sign = np.where(s >= s_i, 1.0, -1.0)
        return float(np.dot(w, r ** (p - 1) * sign))

    if right_deriv(0.0) >= 0.0:
        return 0.0
    if right_deriv(length * (1 - 1e-16)) < 0.0:
        return 1.0
    lo, hi = 0.0, length
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if right_deriv(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return hi / length


def _generic_line_search(space, sigma, p, y, target):
    res = minimize_scalar(lambda t: moment(space, sigma, space.geodesic(y, target, t), p),
                          bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-12})
    return float(res.x)


def _geodesic_descent(space, sigma, p, tol, seed, start):
    rng = np.random.default_rng(seed)
    y = _best_support_point(space, sigma, p) if start is None else space.validate(start)
    iters = 0
    if p == 2 and start is None:
        # inductive means with a random support point at each step
        n_stoch = min(STOCHASTIC_CAP, 200 * len(sigma))
        picks = rng.choice(len(sigma), size=n_stoch, p=sigma.weights)
        for k, i in enumerate(picks, start=1):
            y = space.geodesic(y, sigma.support[i], 1.0 / (k + 1))
        iters = n_stoch
        best = _best_support_point(space, sigma, p)
        if moment(space, sigma, best, p) < moment(space, sigma, y, p):
            y = best
    search = _tree_line_search if isinstance(space, WeightedMetricTree) else _generic_line_search
    f_y = moment(space, sigma, y, p)
    trace = [f_y]
    order = np.argsort(-sigma.weights, kind="stable")
    for sweep in range(1, POLISH_CAP + 1):
        start_f = f_y
        moved_total = 0.0
        for i in order:
            target = sigma.support[i]
            t = search(space, sigma, p, y, target)
            if t <= 0.0:
                continue
            cand = space.geodesic(y, target, t)
            f_c = moment(space, sigma, cand, p)
            if f_c <= f_y:
                moved_total += space.dist(y, cand)
                y, f_y = cand, f_c
        trace.append(f_y)
        if moved_total <= 1e-14 or start_f - f_y <= 1e-3 * tol * 1e-6:
            return BarycenterResult(y, f_y, iters + sweep, True, "geodesic-descent", trace)
    raise BarycenterError(f"no convergence within {POLISH_CAP} sweeps")


# -- circumcenter ---------------------------------------------------------------------


def radius(space: MetricSpace, points: Sequence, y) -> float:
    return max(space.dist(y, a) for a in points)


@dataclass
class CircumcenterResult:
    center: Any
    radius: float
    position_bound: float
    iterations: int
    weights: np.ndarray


def circumcenter(space: MetricSpace, points: Sequence, tol: float = 1e-7, max_iter: int = 2_000,
                 full: bool = False):
    """Minimiser of the radius function ``y -> max_a d(y, a)``.

    Solved through the dual problem: for weights ``lam`` on the simplex,
    ``V(lam) = min_y sum lam_a d(y,a)^2`` is attained at the 2-center of
    ``lam`` and the circumcenter is the 2-center of the maximising weights.
    Weights follow softmax updates at decreasing temperature, then the
    active set is solved for equal distances by least squares.

    In CAT(0) spaces ``d(y*, c_lam)^2 <= r(c_lam)^2 - V(lam)``; the square
    root of that gap is reported as ``position_bound`` and must fall below
    ``tol``.
    """
    pts = [space.validate(a) for a in points]
    if not pts:
        raise ValueError("need at least one point")
    if len(pts) == 1:
        res = CircumcenterResult(pts[0], 0.0, 0.0, 0, np.ones(1))
        return res if full else res.center
    n = len(pts)
    lam = np.full(n, 1.0 / n)
    warm = None

    def solve(lam_, warm_):
        meas = FiniteMeasure.normalized(pts, lam_)
        return p_center(space, meas, 2.0, tol=min(1e-12, tol), start=warm_).center

    def evaluate(c, lam_):
        d2 = np.array([space.dist(c, a) for a in pts]) ** 2
        return d2, float(d2.max() - np.dot(lam_, d2))

    best = None
    temperature = 1.0
    it = 0
    for it in range(1, max_iter + 1):
        c = solve(lam, warm)
        warm = c
        d2, gap = evaluate(c, lam)
        r2 = float(d2.max())
        if best is None or gap < best[1]:
            best = (c, gap, lam.copy())
        if math.sqrt(max(gap, 0.0)) <= tol or gap <= 1e-15 * max(r2, 1e-300):
            break
        if it % 25 == 0:
            refined = _refine_active_set(space, pts, lam, d2, solve, evaluate, warm)
            if refined is not None and refined[1] < best[1]:
                best = refined
                lam = refined[2].copy()
                if math.sqrt(max(refined[1], 0.0)) <= tol:
                    break
        logits = np.log(np.maximum(lam, 1e-300)) + (d2 - r2) / (max(r2, 1e-300) * temperature)
        logits -= logits.max()
        lam = np.exp(logits)
        lam /= lam.sum()
        temperature = max(temperature * 0.97, 1e-3)
    c, gap, lam = best
    bound = math.sqrt(max(gap, 0.0))
    if bound > tol:
        raise BarycenterError(f"circumcenter position bound {bound:.3g} above tol {tol:.3g}")
    res = CircumcenterResult(c, math.sqrt(float(np.max(evaluate(c, lam)[0]))), bound, it, lam)
    return res if full else res.center


def _refine_active_set(space, pts, lam, d2, solve, evaluate, warm):
    r2 = d2.max()
    active = np.flatnonzero((d2 >= r2 * (1 - 1e-2)) | (lam > 1e-3))
    if active.size < 2:
        return None

    def resid(x):
        lam_ = np.zeros(len(pts))
        lam_[active] = np.maximum(x, 0.0)
        if lam_.sum() <= 0:
            return np.full(active.size + 1, 1e3)
        lam_ /= lam_.sum()
        c = solve(lam_, warm)
        dd = np.array([space.dist(c, pts[i]) ** 2 for i in active])
        return np.append((dd - dd.mean()) / max(r2, 1e-300), x.sum() - 1.0)

    x0 = lam[active] / lam[active].sum()
    try:
        sol = least_squares(resid, x0, bounds=(0.0, 1.0), xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200)
    except ValueError:
        return None
    lam_ = np.zeros(len(pts))
    lam_[active] = np.maximum(sol.x, 0.0)
    if lam_.sum() <= 0:
        return None
    lam_ /= lam_.sum()
    c = solve(lam_, warm)
    _, gap = evaluate(c, lam_)
    return c, gap, lam_


# -- growth and variance inequalities --------------------------------------------------


@dataclass
class GrowthReport:
    min_slack: float
    center: Any
    min_moment: float
    samples: int
    c_y: float


def growth_check(space: MetricSpace, sigma: FiniteMeasure, p: float, y_samples: int, seed: int,
                 c_y: float | None = None, center=None) -> GrowthReport:
    """Minimum over random ``y`` of ``d_p(sigma,y)^p - d_p(sigma,c)^p - c_Y^p d(c,y)^p``.

    ``c_Y`` defaults to the ``p``-th root of ``space.convexity_constant(p)``
    (that constant multiplies ``d^p`` directly in the convexity inequality).
    """
    if c_y is None:
        c_p = space.convexity_constant(p)
        if c_p is None:
            raise ValueError(f"{space!r} makes no convexity claim at p={p}")
        c_y = c_p ** (1.0 / p)
    if center is None:
        center = p_center(space, sigma, p, seed=seed).center
    m0 = moment(space, sigma, center, p)
    rng = np.random.default_rng(seed)
    ys = space.random_points(rng, y_samples)
    if isinstance(space, _VectorSpace):
        ys = np.asarray(ys)
        dc = space.dist_batch(ys, np.broadcast_to(np.asarray(center, float), ys.shape))
    else:
        dc = space.dist_batch(ys, [center] * y_samples)
    slack = moments_batch(space, sigma, ys, p) - m0 - c_y**p * dc**p
    return GrowthReport(float(slack.min()), center, m0, y_samples, c_y)


@dataclass
class VarianceSandwich:
    variance: float
    double_integral: float
    upper: float

    @property
    def holds(self) -> bool:
        tol = 1e-9 * max(1.0, self.upper)
        return self.variance <= self.double_integral + tol and self.double_integral <= self.upper + tol


def variance_sandwich(space: MetricSpace, values: Sequence, nu: Sequence[float], p: float,
                      tol: float | None = None) -> VarianceSandwich:
    """``V(f) <= sum nu nu d(f(u), f(v))^p <= 2^(p-1) V(f)`` for ``f`` given by ``values``.

    ``V(f) = sum_u nu(u) d(f(u), c_p(f_* nu))^p``.
    """
    nu = np.asarray(nu, float)
    center = p_center(space, FiniteMeasure.normalized(values, nu), p, tol=tol).center
    variance = float(sum(n * space.dist(v, center) ** p for n, v in zip(nu, values)))
    dmat = space.pairwise(values)
    dbl = float(nu @ (dmat**p) @ nu)
    return VarianceSandwich(variance, dbl, 2 ** (p - 1) * variance)
