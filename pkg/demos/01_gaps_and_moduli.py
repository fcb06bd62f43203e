"""Spectral gaps and Poincare moduli on a few small graphs.

For a real-valued target at exponent 2 the modulus is exactly
1/sqrt(gap). For larger exponents it has to be searched for, and the
search result is compared with the bound 2p/sqrt(gap).

Run: python demos/01_gaps_and_moduli.py
"""

import math

from expander_fp.graphs import cycle_graph, gen_random_regular, girth, petersen_graph
from expander_fp.markov import spectral_gap, standard_walk
from expander_fp.poincare import modulus_estimate
from expander_fp.spaces import Euclidean, HyperbolicPlane

graphs = {"C5": cycle_graph(5), "Petersen": petersen_graph(), "random 3-regular, n=40": gen_random_regular(40, 3, 1)}

print("graph                     girth   gap      1/sqrt(gap)")
for name, g in graphs.items():
    gap = spectral_gap(standard_walk(g)).gap
    print(f"{name:25s} {girth(g):5.0f}   {gap:.4f}   {1 / math.sqrt(gap):.4f}")

print("\nModulus estimates for the Petersen walk:")
chain = standard_walk(graphs["Petersen"])
for label, space, p in [("R, p=2", Euclidean(1), 2), ("R, p=4", Euclidean(1), 4),
                        ("plane, p=2", Euclidean(2), 2), ("hyperbolic plane, p=2", HyperbolicPlane(2), 2)]:
    est = modulus_estimate(chain, space, p, restarts=6, seed=0)
    kind = "exact" if est.exact else "lower bound"
    extra = f"   (2p/sqrt(gap) = {2 * p / math.sqrt(est.sigma):.3f})" if p > 2 else ""
    print(f"  {label:24s} {est.lam:.4f}  [{kind}]{extra}")
