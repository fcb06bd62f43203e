"""Reversible finite Markov chains, convolution powers and spectral gaps."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import eigsh

from .graphs import UndirectedGraph

ROW_TOL = 1e-12
BALANCE_TOL = 1e-12
STATIONARY_TOL = 1e-10
DENSE_LIMIT = 2000


class ChainError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MarkovChain:
    """Row-stochastic kernel ``kernel[u, v] = mu(u -> v)`` with stationary law ``stationary``.

    Invariants (rows summing to one, stationarity, and detailed balance when
    ``reversible`` is set) are validated at construction.
    """

    kernel: np.ndarray
    stationary: np.ndarray
    reversible: bool = True
    name: str = ""

    def __post_init__(self):
        k = np.array(self.kernel, dtype=float)
        nu = np.array(self.stationary, dtype=float)
        if k.ndim != 2 or k.shape[0] != k.shape[1]:
            raise ChainError("kernel must be square")
        if nu.shape != (k.shape[0],):
            raise ChainError("stationary vector has the wrong length")
        if np.any(k < 0) or np.any(nu < 0):
            raise ChainError("negative probabilities")
        if np.max(np.abs(k.sum(axis=1) - 1.0)) > ROW_TOL:
            raise ChainError("kernel rows must sum to 1")
        if abs(nu.sum() - 1.0) > ROW_TOL:
            raise ChainError("stationary vector must sum to 1")
        if np.max(np.abs(nu @ k - nu)) > STATIONARY_TOL:
            raise ChainError("stationary vector is not invariant")
        if self.reversible:
            flow = nu[:, None] * k
            if np.max(np.abs(flow - flow.T)) > BALANCE_TOL:
                raise ChainError("detailed balance fails")
        k.setflags(write=False)
        nu.setflags(write=False)
        object.__setattr__(self, "kernel", k)
        object.__setattr__(self, "stationary", nu)

    @property
    def state_count(self) -> int:
        return self.kernel.shape[0]

    @cached_property
    def is_irreducible(self) -> bool:
        ncomp, _ = connected_components(sp.csr_matrix(self.kernel > 0), directed=True, connection="strong")
        return ncomp == 1

    @cached_property
    def period(self) -> int:
        """Period of the positive-entry digraph (1 means aperiodic).

        Computed as the gcd of ``level(u) + 1 - level(v)`` over all arcs,
        with BFS levels from state 0; valid for irreducible chains.
        """
        n = self.state_count
        level = [-1] * n
        level[0] = 0
        frontier = [0]
        support = [np.flatnonzero(row > 0) for row in self.kernel]
        while frontier:
            nxt = []
            for u in frontier:
                for v in support[u]:
                    if level[v] < 0:
                        level[v] = level[u] + 1
                        nxt.append(v)
            frontier = nxt
        g = 0
        for u in range(n):
            if level[u] < 0:
                continue
            for v in support[u]:
                if level[v] >= 0:
                    g = math.gcd(g, level[u] + 1 - level[v])
        return abs(g) if g else 0

    @property
    def is_aperiodic(self) -> bool:
        return self.period == 1

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.state_count,
                "kernel": self.kernel.ravel().tolist(),
                "nu": self.stationary.tolist(),
                "reversible": bool(self.reversible),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "MarkovChain":
        data = json.loads(text)
        n = int(data["n"])
        kernel = np.asarray(data["kernel"], dtype=float).reshape(n, n)
        return cls(kernel, np.asarray(data["nu"], dtype=float), bool(data.get("reversible", False)))


def standard_walk(g: UndirectedGraph) -> MarkovChain:
    """Simple random walk on ``g``; ``nu(u) = deg(u) / 2|E|``."""
    g.require_connected()
    deg = g.degrees.astype(float)
    kernel = g.adjacency_matrix() / deg[:, None]
    return MarkovChain(kernel, deg / deg.sum(), reversible=True, name=f"walk(n={g.n}, m={g.edge_count})")


def chain_from_weights(weights: np.ndarray) -> MarkovChain:
    """Reversible chain ``mu(u->v) = w(u,v) / w(u)`` from a symmetric weight matrix."""
    w = np.asarray(weights, dtype=float)
    if np.max(np.abs(w - w.T)) > 0:
        raise ChainError("weights must be symmetric")
    row = w.sum(axis=1)
    if np.any(row <= 0):
        raise ChainError("every state needs positive weight")
    return MarkovChain(w / row[:, None], row / row.sum(), reversible=True)


def random_reversible_chain(n: int, seed: int, density: float = 0.5, laziness: float = 0.0) -> MarkovChain:
    """Random irreducible reversible chain on ``n`` states.

    A random spanning path guarantees irreducibility; extra symmetric
    weights are added with probability ``density``.
    """
    rng = np.random.default_rng(seed)
    w = np.zeros((n, n))
    order = rng.permutation(n)
    for a, b in zip(order[:-1], order[1:]):
        w[a, b] = w[b, a] = rng.uniform(0.2, 1.0)
    extra = np.triu(rng.random((n, n)) < density, k=1)
    vals = np.triu(rng.uniform(0.05, 1.0, (n, n)), k=1) * extra
    w = w + vals + vals.T
    if laziness > 0:
        w[np.diag_indices(n)] += laziness * w.sum(axis=1)
    return chain_from_weights(w)


def convolve(c: MarkovChain, n: int) -> MarkovChain:
    """``n``-step kernel ``mu^n``; same stationary law and reversibility flag."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    if n == 1:
        return c
    kernel = np.linalg.matrix_power(c.kernel, n)
    # renormalise rows against rounding drift
    kernel = kernel / kernel.sum(axis=1, keepdims=True)
    if c.reversible:
        flow = c.stationary[:, None] * kernel
        flow = 0.5 * (flow + flow.T)
        kernel = flow / c.stationary[:, None]
    return MarkovChain(kernel, c.stationary, c.reversible, name=f"{c.name}^{n}")


@dataclass(frozen=True)
class SpectralReport:
    second_largest_eigenvalue: float
    gap: float
    method: str

    @property
    def sigma(self) -> float:
        return self.gap


def symmetrized_kernel(c: MarkovChain) -> np.ndarray:
    """``D^{1/2} K D^{-1/2}`` with ``D = diag(nu)``; symmetric for reversible chains."""
    s = np.sqrt(c.stationary)
    a = s[:, None] * c.kernel / s[None, :]
    return 0.5 * (a + a.T)


def spectral_gap(c: MarkovChain, method: str = "auto") -> SpectralReport:
    """``1 - lambda_2`` of the averaging operator of a reversible ergodic chain.

    Dense symmetric eigensolve up to 2000 states, otherwise the two
    largest eigenvalues from an implicitly restarted Lanczos iteration.
    """
    if not c.reversible:
        raise ChainError("spectral gap requires a reversible chain")
    if c.state_count < 2:
        raise ChainError("need at least two states")
    if not c.is_irreducible:
        raise ChainError("chain is not ergodic (reducible)")
    if method == "auto":
        method = "exact-dense" if c.state_count <= DENSE_LIMIT else "iterative"
    if method == "exact-dense":
        evals = np.linalg.eigvalsh(symmetrized_kernel(c))
        top, second = evals[-1], evals[-2]
    elif method == "iterative":
        s = np.sqrt(c.stationary)
        a = sp.csr_matrix(c.kernel).multiply(s[:, None]).multiply(1.0 / s[None, :]).tocsr()
        a = 0.5 * (a + a.T)
        evals = eigsh(a, k=2, which="LA", tol=1e-12, return_eigenvectors=False)
        second, top = np.sort(evals)
    else:
        raise ValueError(f"unknown method {method!r}")
    if 1.0 - second < 1e-10:
        raise ChainError("eigenvalue 1 is not simple; chain is not ergodic")
    return SpectralReport(float(second), float(1.0 - second), method)


def second_eigenvector(c: MarkovChain) -> tuple[float, np.ndarray]:
    """Eigenpair ``(lambda_2, f)`` of the averaging operator, ``f`` normalised in ``L^2(nu)``."""
    evals, evecs = np.linalg.eigh(symmetrized_kernel(c))
    phi = evecs[:, -2]
    f = phi / np.sqrt(c.stationary)
    return float(evals[-2]), f
