"""Finding a fixed point by repeated averaging.

The dihedral group of order six acts on the plane and on the hyperbolic
disk, fixing only the origin. Starting from any point, replacing the
value by the center of mass of its neighbours under the generators drives
the energy to zero geometrically, and the limit is the fixed point.

Run: python demos/05_fixed_points.py
"""

from expander_fp.fixed_point import (cauchy_fit, contraction_report, dihedral_action, energy_inequality_suite,
                                     iterate_to_fixed_point, star_tree_action)
from expander_fp.spaces import Euclidean, HyperbolicPlane, TreePoint

for name, space in [("plane", Euclidean(2)), ("hyperbolic disk", HyperbolicPlane(2))]:
    action = dihedral_action(space)
    res = iterate_to_fixed_point(action, [0.3, 0.2])
    fit = cauchy_fit(res)
    print(f"{name}: converged={res.converged} after {res.iterations} rounds at {res.point}")
    print(f"  energy {res.trace[0]['energy']:.3e} -> {res.trace[-1]['energy']:.3e}, "
          f"per-round factor <= {fit['c']:.4f}")

tree = star_tree_action(3)
res = iterate_to_fixed_point(tree, TreePoint(0, 0.7), tol=1e-12)
print(f"star tree: converged={res.converged} at {res.point} after {res.iterations} rounds")

action = dihedral_action(Euclidean(2))
suite = energy_inequality_suite(action, [1.0, 0.0], p=2, n=3)
print("\nenergy inequalities (n = 3):")
for c in suite.checks:
    print(f"  {c['name']:20s} {c['lhs']:.4f} <= {c['rhs']:.4f}  {'ok' if c['holds'] else 'VIOLATED'}")

rep = contraction_report(action, [1.0, 0.0])
print("\naveraging over longer walks contracts the energy further:")
print(rep.to_csv())
