"""Build a two-dimensional control-distance cover and its squared partition.

For f = x^2 + y^2 the control distance is dominated everywhere by the
Hessian term (constant 2), so the cover is a uniform ball packing at radius
rho / 200.  The bumps are exp-transition plateaus normalized by the square
root of their summed squares, which makes the partition identity
sum Phi_nu^2 = 1 hold to machine precision, and the greedy coloring splits
the cells into classes whose tripled balls are pairwise disjoint.

Run:  python3 demos/demo_partition_2d.py
"""

import numpy as np

from sosreg.calculus import FunctionHandle
from sosreg.cover import (
    ControlDistanceParams,
    build_cover,
    build_partition,
    color_classes,
    partition_derivative_report,
)
from sosreg.exprlang import parse_expression
from sosreg.geometry import Ball, ball_grid

f = FunctionHandle.from_expr(
    parse_expression("x^2 + y^2"), ("x", "y"), domain=Ball((0.0, 0.0), 2.0)
)
region = Ball((0.0, 0.0), 0.25)

cells = build_cover(f, ControlDistanceParams(delta=0.25), region, floor=1e-3)
print(f"cover: {len(cells)} cells, radius range "
      f"[{min(c.radius for c in cells):.5f}, {max(c.radius for c in cells):.5f}]")

partition = build_partition(cells, region)
grid = ball_grid(Ball((0.0, 0.0), 0.245), 100)
err = partition.check_unity(grid)
print(f"partition of unity: max |sum Phi^2 - 1| = {err:.2e} on {len(grid)} points")
print(f"observed overlap multiplicity: {partition.observe_overlap(grid)}")

cells = color_classes(cells)
n_colors = len({c.color for c in cells})
print(f"color classes with pairwise disjoint tripled balls: {n_colors}")

deriv = partition_derivative_report(partition, per_cell_samples=48, max_cells=12)
print("scaled bump derivative sups (r^|a| * sup |D^a Phi|):")
print(f"  order 1: {deriv['scaled_sup_order1']:.2f}   order 2: {deriv['scaled_sup_order2']:.2f}")
