"""Equivariant energies, the averaging operator and fixed-point iteration.

A finite group ``G`` acts on a space ``Y`` by isometries ``rho``, and
``X = Cay(G, S)`` has a single orbit, so an equivariant map ``f: X -> Y``
is determined by its value ``y0 = f(e)``:  ``f(g) = rho(g) y0``.  A walk on
``X`` is a probability vector ``mu`` over group elements (the step
``x -> x g`` has probability ``mu(g)``), and

    E_mu(f) = 1/2 sum_g mu(g) d(y0, rho(g) y0)^p,
    (A_mu f)(e) = c_p( sum_g mu(g) delta_{rho(g) y0} ).

The transfer experiment lets a free group act through a homomorphism
into such a finite group and compares walks on a labeled finite graph with
walks on the free group's Cayley tree.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy.optimize import nnls

from .barycenter import FiniteMeasure, p_center
from .graphs import UndirectedGraph, girth
from .markov import standard_walk
from .poincare import chain_energy, modulus_estimate
from .random_group import Labeling, alpha_path, beta_map, effective_simulation_check, relators, simulate_walk
from .spaces import Euclidean, HyperbolicPlane, MetricSpace, WeightedMetricTree, encode_point, space_from_descriptor


class ActionError(ValueError):
    pass


class PrerequisiteError(RuntimeError):
    """A precondition of an experiment (e.g. effective simulation) does not hold."""


# -- finite group actions ---------------------------------------------------------------------


def _matrix_key(a):
    return tuple(np.round(np.asarray(a, float), 9).ravel() + 0.0)


def _linear_apply(a, y):
    return np.asarray(a) @ np.asarray(y, float)


def _perm_compose(a, b):
    # (a * b)(v) = a(b(v)): first b, then a
    return tuple(a[i] for i in b)


@dataclass
class GroupAction:
    """Finite group given by explicit elements acting on ``space``.

    ``table[a, b]`` is the index of the product ``a * b`` and
    ``rho(a * b) = rho(a) rho(b)``. ``S`` is the generating multiset as a
    tuple of element indices.
    """

    space: MetricSpace
    elements: list
    table: np.ndarray
    S: tuple
    apply_fn: Callable[[Any, Any], Any]
    name: str = "action"
    descriptor: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.elements)
        if self.table.shape != (n, n):
            raise ActionError("multiplication table has the wrong shape")
        ident = [i for i in range(n) if np.array_equal(self.table[i], np.arange(n))]
        if len(ident) != 1:
            raise ActionError("no unique identity element")
        self.identity = ident[0]
        self.inverse = np.array([int(np.flatnonzero(self.table[a] == self.identity)[0]) for a in range(n)])
        if not self.S:
            raise ActionError("S must be non-empty")
        if sorted(self.S) != sorted(int(self.inverse[s]) for s in self.S):
            raise ActionError("S is not symmetric as a multiset")

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def k(self) -> int:
        return len(self.S) // 2

    def act(self, g: int, y):
        return self.space.validate(self.apply_fn(self.elements[g], y))

    def orbit(self, y, elements: Sequence[int] | None = None) -> list:
        idx = range(self.order) if elements is None else elements
        return [self.act(int(g), y) for g in idx]

    def check(self, samples: int = 20, seed: int = 0, atol: float = 1e-10) -> None:
        """Raise :class:`ActionError` unless ``rho`` is an isometric homomorphism on samples."""
        rng = np.random.default_rng(seed)
        sp = self.space
        for _ in range(samples):
            a, b = (int(x) for x in rng.integers(0, self.order, size=2))
            y, z = sp.random_point(rng), sp.random_point(rng)
            lhs = self.act(int(self.table[a, b]), y)
            rhs = self.act(a, self.act(b, y))
            if sp.dist(lhs, rhs) > atol:
                raise ActionError(f"rho is not a homomorphism on elements {a}, {b}")
            if abs(sp.dist(self.act(a, y), self.act(a, z)) - sp.dist(y, z)) > atol:
                raise ActionError(f"element {a} does not preserve distances")

    @classmethod
    def generate(cls, space: MetricSpace, gens: Sequence, S: Sequence[tuple[int, int]] | None = None,
                 compose: Callable = None, key: Callable = None, apply: Callable = None, name: str = "action",
                 descriptor: dict | None = None, max_order: int = 10_000) -> "GroupAction":
        """Close ``gens`` under composition.

        ``S`` lists ``(generator index, +1 or -1)`` pairs; by default each
        generator contributes itself and its inverse (an involution thus
        appears twice).
        """
        compose = compose or (lambda a, b: np.asarray(a) @ np.asarray(b))
        key = key or _matrix_key
        apply = apply or _linear_apply
        elements, index = [], {}

        def add(x):
            kx = key(x)
            if kx not in index:
                index[kx] = len(elements)
                elements.append(x)
            return index[kx]

        gen_idx = [add(g) for g in gens]
        frontier = list(range(len(elements)))
        while frontier:
            new = []
            for a in frontier:
                for g in gen_idx:
                    before = len(elements)
                    add(compose(elements[a], elements[g]))
                    if len(elements) > before:
                        new.append(len(elements) - 1)
                    if len(elements) > max_order:
                        raise ActionError("group closure exceeded max_order")
            frontier = new
        n = len(elements)
        table = np.array([[index[key(compose(a, b))] for b in elements] for a in elements], dtype=np.int64)
        ident = next(i for i in range(n) if np.array_equal(table[i], np.arange(n)))
        inv = [int(np.flatnonzero(table[a] == ident)[0]) for a in range(n)]
        if S is None:
            S = [(i, s) for i in range(len(gens)) for s in (1, -1)]
        s_idx = tuple(gen_idx[i] if sign > 0 else inv[gen_idx[i]] for i, sign in S)
        return cls(space, elements, table, s_idx, apply, name, descriptor or {})


def _rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _planar(space):
    if not (isinstance(space, (Euclidean, HyperbolicPlane)) and space.dim == 2):
        raise ActionError("planar actions need Euclidean(2) or HyperbolicPlane(2)")


def dihedral_action(space: MetricSpace, n: int = 3) -> GroupAction:
    """``D_n`` acting linearly on the plane or the Poincare disk.

    Generators: rotation ``r`` by ``2 pi / n`` about 0 and reflection ``t``
    in the first axis; ``S = (r, r^-1, t, t)``. Linear orthogonal maps fix
    0 and are isometries of the disk model as well.
    """
    _planar(space)
    gens = [_rotation(2 * math.pi / n), np.diag([1.0, -1.0])]
    return GroupAction.generate(space, gens, name=f"D{n}", descriptor={"group": "dihedral", "n": n,
                                                                       "space": space.descriptor()})


def cyclic_action(space: MetricSpace, n: int) -> GroupAction:
    """Rotations by multiples of ``2 pi / n``; ``S = (r, r^-1)``."""
    _planar(space)
    return GroupAction.generate(space, [_rotation(2 * math.pi / n)], name=f"C{n}",
                                descriptor={"group": "cyclic", "n": n, "space": space.descriptor()})


def reflection_action(dim: int = 1) -> GroupAction:
    """``Z/2`` acting on ``R^dim`` by ``y -> -y``; ``S = (s, s)``."""
    space = Euclidean(dim)
    return GroupAction.generate(space, [-np.eye(dim)], name="Z2",
                                descriptor={"group": "reflection", "space": space.descriptor()})


def permutation_action(tree: WeightedMetricTree, perms: Sequence[Sequence[int]],
                       S: Sequence[tuple[int, int]] | None = None) -> GroupAction:
    """Group of tree automorphisms generated by vertex permutations."""
    perms = [tuple(int(v) for v in p) for p in perms]
    for p in perms:
        if sorted(p) != list(range(tree.vertex_count)) or not tree.is_automorphism(p):
            raise ActionError(f"{p} is not an automorphism of the tree")
    return GroupAction.generate(tree, perms, S, compose=_perm_compose, key=tuple,
                                apply=lambda perm, y: tree.apply_vertex_permutation(y, perm), name="Aut",
                                descriptor={"group": "permutations", "generators": [list(p) for p in perms],
                                            "space": tree.descriptor()})


def star_tree_action(leaves: int = 3, weight: float = 1.0) -> GroupAction:
    """Symmetric group on the leaves of a star; the center is the only fixed point."""
    tree = WeightedMetricTree(leaves + 1, [(0, i, weight) for i in range(1, leaves + 1)])
    swap = list(range(leaves + 1))
    swap[1], swap[2] = 2, 1
    cyc = [0] + list(range(2, leaves + 1)) + [1]
    return permutation_action(tree, [cyc, swap])


def action_from_descriptor(desc: dict) -> GroupAction:
    """Inverse of ``GroupAction.descriptor`` for the built-in families."""
    group = desc["group"]
    space = space_from_descriptor(desc["space"]) if "space" in desc else Euclidean(2)
    if group == "dihedral":
        return dihedral_action(space, int(desc.get("n", 3)))
    if group == "cyclic":
        return cyclic_action(space, int(desc["n"]))
    if group == "reflection":
        return reflection_action(getattr(space, "dim", 1))
    if group == "permutations":
        return permutation_action(space, desc["generators"])
    if group == "star":
        return star_tree_action(int(desc.get("leaves", 3)))
    raise ActionError(f"unknown group {group!r}")


# -- walks on the group ------------------------------------------------------------------------


def step_measure(action: GroupAction) -> np.ndarray:
    """Uniform probability on the multiset ``S``."""
    mu = np.zeros(action.order)
    for s in action.S:
        mu[s] += 1.0 / len(action.S)
    return mu


def convolve_measures(action: GroupAction, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``(a * b)(g) = sum_{xy = g} a(x) b(y)``."""
    out = np.zeros(action.order)
    np.add.at(out, action.table.ravel(), np.outer(a, b).ravel())
    return out


def measure_power(action: GroupAction, mu: np.ndarray, n: int) -> np.ndarray:
    if n < 0:
        raise ValueError("n must be nonnegative")
    out = np.zeros(action.order)
    out[action.identity] = 1.0
    for _ in range(n):
        out = convolve_measures(action, out, mu)
    return out


@dataclass
class EquivariantMap:
    """An equivariant map, stored as its value at the identity."""

    action: GroupAction
    value: Any

    def __post_init__(self):
        self.value = self.action.space.validate(self.value)

    def __call__(self, g: int):
        return self.action.act(g, self.value)


def _value(action, f):
    return f.value if isinstance(f, EquivariantMap) else action.space.validate(f)


def displacement_powers(action: GroupAction, f, p: float, mu: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Support of ``mu`` and ``d(y0, rho(g) y0)^p`` on it."""
    y0 = _value(action, f)
    supp = np.flatnonzero(mu > 0)
    d = np.array([action.space.dist(y0, action.act(int(g), y0)) for g in supp])
    return supp, d**p


def energy(action: GroupAction, f, mu: np.ndarray, p: float = 2.0) -> float:
    """``E_mu(f) = 1/2 sum_g mu(g) d(y0, rho(g) y0)^p``."""
    supp, dp = displacement_powers(action, f, p, mu)
    return 0.5 * float(mu[supp] @ dp)


def gradient(action: GroupAction, f, mu: np.ndarray, p: float = 2.0) -> float:
    """``D_mu f(e)^p``, which equals ``2 E_mu(f)`` on a single orbit."""
    return 2.0 * energy(action, f, mu, p)


@dataclass
class EnergyReport:
    energy: float
    gradient: float
    p: float
    value: list
    trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"energy": self.energy, "gradient": self.gradient, "p": self.p, "value": self.value,
                "trace": self.trace}


def energy_report(action: GroupAction, f, mu: np.ndarray, p: float = 2.0) -> EnergyReport:
    e = energy(action, f, mu, p)
    return EnergyReport(e, 2 * e, p, encode_point(_value(action, f)))


def pushforward(action: GroupAction, f, mu: np.ndarray) -> FiniteMeasure:
    """``f_* mu_e``: the measure ``sum_g mu(g) delta_{rho(g) y0}``."""
    y0 = _value(action, f)
    supp = np.flatnonzero(mu > 0)
    return FiniteMeasure([action.act(int(g), y0) for g in supp], mu[supp] / mu[supp].sum())


def average_map(action: GroupAction, f, mu: np.ndarray, p: float = 2.0, tol: float | None = None):
    """Value at the identity of ``A_mu f``: the ``p``-center of ``f_* mu_e``.

    Raises
    ------
    BarycenterError
        If the barycenter solver does not converge.
    """
    y0 = _value(action, f)
    return p_center(action.space, pushforward(action, y0, mu), p, tol=tol, start=y0).center


def orbit_diameter(action: GroupAction, y, elements: Sequence[int] | None = None) -> float:
    """Diameter of ``{y} + {rho(s) y : s in elements}`` (``S`` by default)."""
    pts = [action.space.validate(y)] + action.orbit(y, action.S if elements is None else elements)
    return float(action.space.pairwise(pts).max())


# -- fixed-point iteration ---------------------------------------------------------------------


@dataclass
class FixedPointResult:
    point: Any
    converged: bool
    iterations: int
    trace: list
    reason: str

    def to_dict(self) -> dict:
        return {"fixed_point": encode_point(self.point), "converged": self.converged,
                "iterations": self.iterations, "reason": self.reason, "trace": self.trace}


def iterate_to_fixed_point(action: GroupAction, f0, n: int = 1, p: float = 2.0, tol: float = 1e-14,
                           max_iter: int = 200, barycenter_tol: float | None = None) -> FixedPointResult:
    """Iterate ``f_{k+1} = A_{mu^n} f_k`` until the energy vanishes numerically.

    Stops when ``E_mu(f_k) < tol`` and the generator orbit of the value has
    diameter below ``tol^(1/p)``. Running out of iterations is reported in
    the result (``converged=False``) together with the full trace, whose
    rows hold the energy, the value, the contraction factor
    ``E(f_{k}) / E(f_{k-1})`` and the step length ``d(f_k, f_{k-1})``.
    """
    mu = step_measure(action)
    mu_n = measure_power(action, mu, n)
    y = _value(action, f0)
    trace = []
    prev_e, prev_y = None, None
    for it in range(max_iter + 1):
        e = energy(action, y, mu, p)
        row = {"iteration": it, "energy": e, "value": encode_point(y),
               "factor": (e / prev_e if prev_e else None),
               "step": (action.space.dist(prev_y, y) if prev_y is not None else None)}
        trace.append(row)
        if e < tol and orbit_diameter(action, y) < tol ** (1.0 / p):
            return FixedPointResult(y, True, it, trace, "energy below tol")
        if it == max_iter:
            break
        prev_e, prev_y = e, y
        y = average_map(action, y, mu_n, p, barycenter_tol)
    decayed = len(trace) > 1 and trace[-1]["energy"] < trace[0]["energy"]
    reason = "max_iter exceeded" + ("" if decayed else " without energy decay")
    return FixedPointResult(y, False, max_iter, trace, reason)


def cauchy_fit(result: FixedPointResult, p: float = 2.0, window: int = 5) -> dict:
    """Geometric envelope of the step lengths once contraction sets in.

    Looks for ``window`` consecutive rounds whose contraction factors are
    all at most some ``c < 1``; then fits the smallest ``K`` with
    ``step_k^p <= K c^k`` for every later ``k``.
    """
    rows = [r for r in result.trace if r["factor"] is not None and r["step"] is not None]
    for start in range(len(rows) - window + 1):
        fac = [r["factor"] for r in rows[start:start + window]]
        c = max(fac)
        if c < 1:
            tail = rows[start:]
            ks = np.array([r["iteration"] for r in tail], float)
            steps = np.array([r["step"] for r in tail], float) ** p
            c_env = max(c, max(r["factor"] for r in tail))
            if c_env >= 1:
                return {"found": True, "start": rows[start]["iteration"], "c": c_env, "K": math.inf, "ok": False}
            K = float(np.max(steps / c_env**ks))
            return {"found": True, "start": rows[start]["iteration"], "c": c_env, "K": K,
                    "ok": bool(np.all(steps <= K * c_env**ks * (1 + 1e-12)))}
    return {"found": False, "start": None, "c": None, "K": None, "ok": False}


# -- inequality suite ----------------------------------------------------------------------------


def _holds(lhs, rhs, atol):
    return bool(lhs <= rhs + atol * max(1.0, abs(rhs)))


def cancellation_constant(p: float, c_p: float) -> float:
    """``2^(p-1) (1 + 2 / c)`` where ``c`` is the convexity constant (``c_Y^p``)."""
    return 2 ** (p - 1) * (1 + 2 / c_p)


@dataclass
class SuiteReport:
    p: float
    n: int
    checks: list

    @property
    def ok(self) -> bool:
        return all(c["holds"] for c in self.checks)

    @property
    def violations(self) -> list:
        return [c["name"] for c in self.checks if not c["holds"]]

    def to_dict(self) -> dict:
        return {"p": self.p, "n": self.n, "ok": self.ok, "checks": self.checks, "violations": self.violations}


def energy_inequality_suite(action: GroupAction, f, p: float = 2.0, n: int = 2, atol: float = 1e-9,
                            barycenter_tol: float | None = None) -> SuiteReport:
    """Evaluate three energy inequalities for one equivariant map.

    1. ``E_{mu^n}(f) <= n^(p-1) E_mu(f)`` (triangle inequality along words).
    2. ``c d(f, A_mu f)^p <= 2 E_mu(f)``, ``c`` the convexity constant of
       the target (the growth inequality at ``y = f(e)``).
    3. ``sum_g mu^n(g) d(A_{mu^n} f(e), rho(g) y0)^p`` against
       ``2^(p-1) (1 + 2/c) E_{mu^n}(f)``. The constant follows the route
       through the triangle inequality; the sharper ``2 E_{mu^n}(f)`` holds
       because the center minimises the moment, and is reported too.

    Tolerances are ``atol`` times ``max(1, |rhs|)``.
    """
    space = action.space
    c = space.convexity_constant(p)
    if c is None:
        raise ActionError(f"no convexity constant claimed for p={p}")
    mu = step_measure(action)
    mu_n = measure_power(action, mu, n)
    y0 = _value(action, f)
    e1 = energy(action, y0, mu, p)
    en = energy(action, y0, mu_n, p)
    checks = []
    rhs = n ** (p - 1) * e1
    checks.append({"name": "bound-energies", "lhs": en, "rhs": rhs, "holds": _holds(en, rhs, atol)})
    a1 = average_map(action, y0, mu, p, barycenter_tol)
    lhs = c * space.dist(y0, a1) ** p
    checks.append({"name": "avg-control", "lhs": lhs, "rhs": 2 * e1, "holds": _holds(lhs, 2 * e1, atol)})
    an = average_map(action, y0, mu_n, p, barycenter_tol)
    supp = np.flatnonzero(mu_n > 0)
    integral = float(sum(mu_n[g] * space.dist(an, action.act(int(g), y0)) ** p for g in supp))
    rhs = cancellation_constant(p, c) * en
    checks.append({"name": "cancellation", "lhs": integral, "rhs": rhs, "holds": _holds(integral, rhs, atol)})
    checks.append({"name": "cancellation-sharp", "lhs": integral, "rhs": 2 * en,
                   "holds": _holds(integral, 2 * en, atol)})
    return SuiteReport(p, n, checks)


# -- contraction ----------------------------------------------------------------------------------


@dataclass
class ContractionReport:
    rows: list
    c1: float | None
    c2: float | None
    degenerate: bool

    def to_dict(self) -> dict:
        return {"rows": self.rows, "c1": self.c1, "c2": self.c2, "degenerate": self.degenerate}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=["n", "ratio", "shape_log", "shape_inv", "fitted"])
        w.writeheader()
        for r in self.rows:
            w.writerow(r)
        return buf.getvalue()


def contraction_report(action: GroupAction, f, p: float = 2.0, n_list: Sequence[int] = (1, 2, 3, 4, 5, 6),
                       j: int = 1, barycenter_tol: float | None = None) -> ContractionReport:
    """Tabulate ``E_{mu^j}(A_{mu^{jn}} f) / E_{mu^j}(f)`` against the expected shape.

    The shape is ``c1 sqrt(log n / n) E_{mu^{jn}}(f) / E_{mu^j}(f) + c2 / n``;
    ``c1, c2 >= 0`` are fitted by nonnegative least squares since the
    implicit constants are not known. A fixed point gives ``0/0`` for every
    row and is flagged as degenerate.
    """
    mu = step_measure(action)
    mu_j = measure_power(action, mu, j)
    y0 = _value(action, f)
    base = energy(action, y0, mu_j, p)
    if base <= 0.0:
        rows = [{"n": int(n), "ratio": None, "shape_log": None, "shape_inv": None, "fitted": None} for n in n_list]
        return ContractionReport(rows, None, None, True)
    rows = []
    for n in n_list:
        mu_jn = measure_power(action, mu, j * n)
        ratio = energy(action, average_map(action, y0, mu_jn, p, barycenter_tol), mu_j, p) / base
        shape_log = math.sqrt(math.log(n) / n) * energy(action, y0, mu_jn, p) / base
        rows.append({"n": int(n), "ratio": ratio, "shape_log": shape_log, "shape_inv": 1.0 / n})
    design = np.array([[r["shape_log"], r["shape_inv"]] for r in rows])
    coef, _ = nnls(design, np.array([r["ratio"] for r in rows]))
    for r, fit in zip(rows, design @ coef):
        r["fitted"] = float(fit)
    return ContractionReport(rows, float(coef[0]), float(coef[1]), False)


# -- transfer from a labeled graph to the tree -------------------------------------------------------


def word_element(action: GroupAction, hom: Sequence[int], word: Sequence[int]) -> int:
    """Image of a free-group word under ``generator i -> hom[i-1]``."""
    g = action.identity
    for letter in word:
        h = hom[abs(letter) - 1]
        g = int(action.table[g, h if letter > 0 else action.inverse[h]])
    return g


def free_step_measure(action: GroupAction, hom: Sequence[int]) -> np.ndarray:
    """Image of the simple random walk step on the free group (uniform on ``2k`` letters)."""
    mu = np.zeros(action.order)
    for h in hom:
        mu[h] += 0.5 / len(hom)
        mu[action.inverse[h]] += 0.5 / len(hom)
    return mu


def push_words(action: GroupAction, hom: Sequence[int], dist: dict) -> np.ndarray:
    out = np.zeros(action.order)
    for w, m in dist.items():
        out[word_element(action, hom, w)] += m
    return out


@dataclass
class TransferReport:
    lam: float
    sigma: float
    p: float
    q0: int
    rows: list
    best_m: int | None
    best_ratio: float
    identity_error: float
    factors: bool
    simulation: dict
    degenerate: bool

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "sigma": self.sigma, "p": self.p, "q0": self.q0, "rows": self.rows,
                "best_m": self.best_m, "best_ratio": self.best_ratio, "identity_error": self.identity_error,
                "factors": self.factors, "simulation": self.simulation, "degenerate": self.degenerate}


def transfer_experiment(g: UndirectedGraph, alpha: Labeling, action: GroupAction, hom: Sequence[int], f,
                        p: float = 2.0, q0: int | None = None, m_max: int | None = None,
                        require_simulation: bool = True, restarts: int = 8, seed: int = 0) -> TransferReport:
    """Compare ``E_{mu_X^{jm}}(f)`` with ``Lambda^p E_{mu_X^j}(f)`` for a finite stand-in action.

    The free group on ``k`` letters acts on the target through
    ``hom``: letter ``i`` goes to the element ``hom[i-1]``. For every
    ``q <= q0`` the labeled walk ``mu^q_{G,alpha}`` is pushed to the group and
    its gradient is computed twice, directly and as
    ``sum_u nu(u) D_{mu_G^q}(f o beta_{u->x})^p(u)``; ``identity_error`` is
    the largest discrepancy. When every relator of ``alpha`` maps to the
    identity the action factors through the quotient, and both are also
    compared with ``2 E_{mu_G^q}(f_0)`` for the map ``f_0`` on the graph.

    ``Lambda`` is estimated for the simple walk on ``g``. The report lists,
    for each ``2 <= m <= m_max`` (default ``max(q0, 2)``), the measured
    constant ``C_m = E_{mu_X^{jm}}(f) / (Lambda^p E_{mu_X^j}(f))`` and picks
    the smallest. ``m = 1`` is skipped: it compares ``E_{mu_X^j}`` with
    itself.

    Raises
    ------
    ValueError
        If ``j`` is odd (the connectivity argument needs ``S^j`` to contain
        ``S^2``) or ``hom`` has the wrong length.
    PrerequisiteError
        If ``require_simulation`` is set and effective simulation fails up
        to ``q0``.
    """
    k, j = alpha.k, alpha.j
    if j % 2:
        raise ValueError("transfer needs an even label length j, so that S^j contains S^2")
    if len(hom) != k:
        raise ValueError(f"hom must give an image for each of the {k} generators")
    if alpha.graph != g:
        raise ValueError("labeling belongs to a different graph")
    space = action.space
    y0 = _value(action, f)
    if q0 is None:
        q0 = min(2, math.ceil(girth(g) / 2) - 1)
    sim = effective_simulation_check(alpha, q0)
    if require_simulation and not sim.ok:
        raise PrerequisiteError(f"effective simulation fails up to q0={q0}: low ratio {sim.worst_ratio_low:.4g}, "
                                f"high ratio {sim.worst_ratio_high:.4g}")
    chain = standard_walk(g)
    est = modulus_estimate(chain, space, p, restarts=restarts, seed=seed)
    lam = est.lam

    factors = all(word_element(action, hom, r) == action.identity for r in relators(alpha, g))
    f0 = None
    if factors:
        f0 = [action.act(word_element(action, hom, alpha_path(alpha, _path(g, 0, v))), y0) for v in range(g.n)]

    nu = chain.stationary
    identity_error = 0.0
    rows = []
    for q in range(1, q0 + 1):
        direct = gradient(action, y0, push_words(action, hom, simulate_walk(alpha, q)), p)
        power = np.linalg.matrix_power(chain.kernel, q)
        plugged = 0.0
        for u in range(g.n):
            beta = beta_map(alpha, u, q)
            for v in np.flatnonzero(power[u] > 0):
                img = action.act(word_element(action, hom, beta[int(v)]), y0)
                plugged += nu[u] * power[u, v] * space.dist(y0, img) ** p
        identity_error = max(identity_error, abs(direct - plugged))
        row = {"q": q, "gradient": direct, "plugged": float(plugged)}
        if f0 is not None:
            row["graph_energy_x2"] = 2 * chain_energy(chain, space, p, f0, q)
            identity_error = max(identity_error, abs(direct - row["graph_energy_x2"]))
        rows.append(row)

    mu_x = free_step_measure(action, hom)
    e_j = energy(action, y0, measure_power(action, mu_x, j), p)
    m_max = max(q0, 2) if m_max is None else m_max
    scan = []
    for m in range(2, m_max + 1):
        e_jm = energy(action, y0, measure_power(action, mu_x, j * m), p)
        c_m = e_jm / (lam**p * e_j) if e_j > 0 else 0.0
        scan.append({"m": m, "energy_jm": e_jm, "energy_j": e_j, "C": c_m})
    best = min(scan, key=lambda r: r["C"]) if scan else None
    return TransferReport(lam, est.sigma, p, q0, rows + scan, best["m"] if best else None,
                          best["C"] if best else 0.0, identity_error, factors, sim.to_dict(), e_j <= 0)


def _path(g: UndirectedGraph, u: int, v: int) -> list[int]:
    """Some path from ``u`` to ``v`` (BFS order)."""
    prev = {u: None}
    queue = [u]
    for x in queue:
        if x == v:
            break
        for y in g.adjacency[x]:
            if y not in prev:
                prev[y] = x
                queue.append(y)
    out = [v]
    while prev[out[-1]] is not None:
        out.append(prev[out[-1]])
    return out[::-1]
