"""Weak-monotonicity classification at work.

Three profiles on the unit interval:

  * exp(-1/t): increasing, so f(y) <= f(x) <= f(x)^s for every s, and the
    classifier reports s-power monotonicity across the whole grid
    ("nearly monotone");
  * an oscillating flat profile phi^(1/g-1) (sin^2(pi/x) + phi): the worst
    pairs sit at consecutive extrema of the oscillation and finiteness flips
    at s = 1/(1+g) ("Hölder monotone" but not nearly monotone);
  * the linear profile x, whose functional with the square-root modulus has
    the closed-form supremum 1 (attained at x = y = 1).

Run:  python3 demos/demo_monotone_thresholds.py
"""

import math

from sosreg.calculus import FunctionHandle, Modulus
from sosreg.exprlang import Const, FlatExp, Pow, Prod, Quot, Sin, Sum, Var, parse_expression
from sosreg.geometry import Ball
from sosreg.monotone import classify_monotonicity, monotone_functional

# closed-form check: f(x) = x with the square-root modulus
f_lin = FunctionHandle.from_expr(parse_expression("x"), ("x",), domain=Ball((0.5,), 0.5))
rep = monotone_functional(f_lin, Modulus.omega(0.5), outer_samples=300, inner_samples=64,
                          t_min=1e-3, region=Ball((0.5,), 0.5))
print(f"f(x)=x, omega_0.5: searched supremum {rep.estimate:.6f} (analytic value 1.0)")

# increasing flat profile: every s in the grid is finite
f_flat = FunctionHandle.from_expr(parse_expression("flatexp(t)"), ("t",), domain=Ball((0.5,), 0.5))
cls = classify_monotonicity(f_flat, [0.25, 0.5, 0.75, 0.9], region=Ball((0.55,), 0.42),
                            t_min=5e-2, outer_samples=100, inner_samples=32)
print(f"\nexp(-1/t): finite flags {cls.finite}")
print(f"  nearly monotone: {cls.nearly_monotone}")

# oscillating profile with threshold s = 1/(1+g), here g = 1
gamma = 1.0
phi = FlatExp(Pow(Var("x"), 2.0))
body = Prod((Const(1.0), Sum((Pow(Sin(Quot(Const(math.pi), Var("x"))), 2.0), phi))))
f_osc = FunctionHandle.from_expr(body, ("x",), domain=Ball((0.5,), 0.5))
cls2 = classify_monotonicity(f_osc, [0.3, 0.45, 0.6, 0.8], region=Ball((0.55,), 0.4),
                             t_min=5e-2, outer_samples=150, inner_samples=48)
print(f"\noscillating flat profile (threshold at s = {1/(1+gamma):.2f}):")
for s, finite in cls2.finite.items():
    print(f"  s = {s}: {'finite' if finite else 'divergent'}")
print(f"  Hölder monotone: {cls2.holder_monotone}, nearly monotone: {cls2.nearly_monotone}")
