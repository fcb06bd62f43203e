"""Centers of mass in three geometries.

The same three-point measure is placed in the plane, in the Poincare disk
and on a metric tree. In the plane the 2-center is the weighted mean; in
the disk it is pulled toward the origin by curvature; on the tree it stays at
the hub until one leaf outweighs the other two together.

Run: python demos/02_centers_of_mass.py
"""

import numpy as np

from expander_fp.barycenter import FiniteMeasure, circumcenter, growth_check, p_center
from expander_fp.spaces import Euclidean, HyperbolicPlane, TreePoint, WeightedMetricTree

pts = [np.array([0.6, 0.0]), np.array([-0.3, 0.5]), np.array([-0.3, -0.5])]
weights = [0.5, 0.25, 0.25]

for name, space in [("plane", Euclidean(2)), ("Poincare disk", HyperbolicPlane(2))]:
    sigma = FiniteMeasure.normalized(pts, weights)
    c2 = p_center(space, sigma, 2).center
    c4 = p_center(space, sigma, 4).center
    cc = circumcenter(space, pts)
    print(f"{name:14s} 2-center {np.round(c2, 4)}  4-center {np.round(c4, 4)}  circumcenter {np.round(cc, 4)}")
    slack = growth_check(space, sigma, 2, 20_000, seed=1).min_slack
    print(f"{'':14s} smallest slack of the growth inequality over 20000 points: {slack:.2e}")

star = WeightedMetricTree(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)])
print()
leaves = [TreePoint(0, 1.0), TreePoint(1, 1.0), TreePoint(2, 1.0)]
for tree_weights in ([0.5, 0.25, 0.25], [0.6, 0.2, 0.2]):
    res = p_center(star, FiniteMeasure.normalized(leaves, tree_weights), 2)
    print(f"star tree, leaf weights {tree_weights} -> 2-center {res.center} (offset measured from the hub)")
