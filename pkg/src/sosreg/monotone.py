"""Weak-monotonicity functionals over the two-point ball family.

The central object is the supremum of f(y) / omega(f(x)) over x in the unit
ball and y in B(x/2, |x|/2), the ball having the segment from the origin to
x as a diameter.  Finiteness of this functional for the one-parameter moduli
omega_s classifies a nonnegative function as s-power monotone; holding for
every s < 1 is "nearly monotone", for some s is "Hölder monotone".

Suprema are approximated by nested low-discrepancy grids plus deterministic
coordinate ascent; a "finite" verdict additionally requires stability under
doubling the sample counts and halving the truncation radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .calculus import FunctionHandle, Modulus
from .errors import DomainError, NonnegativityError
from .geometry import Ball, ball_points

__all__ = [
    "MonotoneReport",
    "monotone_functional",
    "classify_monotonicity",
    "verify_power_bound",
    "MonotonicityClassification",
    "PowerBoundReport",
]

STABILITY_TOLERANCE = 0.05  # "finite" verdict: < 5% change under refinement


@dataclass
class MonotoneReport:
    modulus: str
    estimate: float
    log_estimate: float
    maximizing_x: tuple
    maximizing_y: tuple
    outer_samples: int
    inner_samples: int
    t_min: float
    rescale: float
    divergent: bool = False
    witness: tuple | None = None

    def as_dict(self) -> dict:
        return {
            "op": "monotone_functional",
            "modulus": self.modulus,
            "estimate": float(self.estimate),
            "log_estimate": float(self.log_estimate),
            "maximizing_x": list(map(float, self.maximizing_x)),
            "maximizing_y": list(map(float, self.maximizing_y)),
            "outer_samples": self.outer_samples,
            "inner_samples": self.inner_samples,
            "t_min": float(self.t_min),
            "rescale": float(self.rescale),
            "divergent": self.divergent,
            "witness": None if self.witness is None else [list(map(float, p)) for p in self.witness],
        }


def _inner_ball_grid(x: np.ndarray, count: int) -> np.ndarray:
    """Nested grid on B(x/2, |x|/2).  In one dimension this is the interval
    (0, x); in higher dimensions a low-discrepancy ball grid."""
    n = x.size
    if n == 1:
        # dyadic-refinable 1-D grid on (0, x): k/(count+1), k = 1..count
        fracs = np.arange(1, count + 1) / (count + 1.0)
        return (fracs * x[0]).reshape(-1, 1)
    return ball_points(Ball(center=tuple(x / 2.0), radius=float(np.linalg.norm(x) / 2.0)), count)


def _log_ratio(f: FunctionHandle, m: Modulus, scale_log: float, xs: np.ndarray, ys: np.ndarray):
    """log of f(y)/scale / omega(f(x)/scale) for paired sample arrays."""
    log_fy = f.log_values(ys) - scale_log
    log_fx = f.log_values(xs) - scale_log
    out = np.empty(len(xs))
    for i in range(len(xs)):
        if log_fx[i] == -math.inf:
            out[i] = math.inf if log_fy[i] > -math.inf else -math.inf
        else:
            out[i] = log_fy[i] - m.log_eval(min(log_fx[i], 0.0))
    return out


def monotone_functional(
    f: FunctionHandle,
    m: Modulus,
    outer_samples: int = 200,
    inner_samples: int = 64,
    t_min: float = 1e-3,
    region: Ball | None = None,
    ascent_steps: int = 50,
) -> MonotoneReport:
    """Estimate sup f(y) / omega(f(x)) over x in the region, y in B(x/2,|x|/2).

    f is first rescaled by its sampled supremum so the modulus argument stays
    in [0,1]; the rescaling is reported.  A zero of f at a sampled x with a
    nonvanishing paired f(y) makes the functional infinite and is reported as
    divergence with the witness pair.
    """
    if t_min <= 0:
        raise DomainError("t_min must be positive")
    region = region or Ball(center=(0.0,) * f.arity, radius=1.0)
    n = f.arity

    xs = ball_points(region, outer_samples, inner_radius=t_min)
    if len(xs) == 0:
        raise DomainError("no outer samples outside the truncation radius")

    sup_f = float(np.max(f.values(xs)))
    if sup_f < 0:
        raise NonnegativityError("f is negative on the sampled region")
    scale_log = math.log(sup_f) if sup_f > 1.0 else 0.0
    rescale = math.exp(scale_log)

    best_log = -math.inf
    best_pair = (tuple(xs[0]), tuple(xs[0]))
    divergent = False
    witness = None
    for x in xs:
        ys = _inner_ball_grid(x, inner_samples)
        logs = _log_ratio(f, m, scale_log, np.repeat(x[None, :], len(ys), axis=0), ys)
        i = int(np.argmax(logs))
        if logs[i] == math.inf:
            divergent = True
            witness = (tuple(x), tuple(ys[i]))
            continue
        if logs[i] > best_log:
            best_log = logs[i]
            best_pair = (tuple(x), tuple(ys[i]))

    # deterministic ascent from the best grid pair: coordinate moves on x and
    # y plus joint dilations (the ball constraint is dilation invariant)
    x = np.array(best_pair[0])
    y = np.array(best_pair[1])
    step = 0.25 * float(np.linalg.norm(x))

    def feasible(cx, cy):
        if np.linalg.norm(cx - np.asarray(region.center)) > region.radius * (1 + 1e-12):
            return False
        if np.linalg.norm(cx) < t_min:
            return False
        return np.linalg.norm(cy - cx / 2.0) <= np.linalg.norm(cx) / 2.0 * (1 + 1e-12)

    for _ in range(ascent_steps):
        improved = False
        candidates = []
        for idx in (0, 1):
            for axis in range(n):
                for sgn in (1.0, -1.0):
                    cx, cy = x.copy(), y.copy()
                    (cx if idx == 0 else cy)[axis] += sgn * step
                    candidates.append((cx, cy))
        nx = float(np.linalg.norm(x))
        if nx > 0:
            for sgn in (1.0, -1.0):
                lam = 1.0 + sgn * step / nx
                if lam > 0:
                    candidates.append((lam * x, lam * y))
        for cx, cy in candidates:
            if not feasible(cx, cy):
                continue
            val = _log_ratio(f, m, scale_log, cx[None, :], cy[None, :])[0]
            if val > best_log and val < math.inf:
                best_log = val
                x, y = cx, cy
                improved = True
        if not improved:
            step *= 0.5
            if step < 1e-12:
                break

    return MonotoneReport(
        modulus=m.name,
        estimate=float(np.exp(best_log)) if best_log < 700 else math.inf,
        log_estimate=float(best_log),
        maximizing_x=tuple(x),
        maximizing_y=tuple(y),
        outer_samples=len(xs),
        inner_samples=inner_samples,
        t_min=t_min,
        rescale=rescale,
        divergent=divergent,
        witness=witness,
    )


@dataclass
class MonotonicityClassification:
    s_grid: list
    c_max: float
    estimates: dict = field(default_factory=dict)
    finite: dict = field(default_factory=dict)
    nearly_monotone: bool = False
    holder_monotone: bool = False

    def as_dict(self) -> dict:
        return {
            "op": "classify_monotonicity",
            "s_grid": [float(s) for s in self.s_grid],
            "c_max": float(self.c_max),
            "estimates": {f"{k:g}": float(v) for k, v in self.estimates.items()},
            "finite": {f"{k:g}": bool(v) for k, v in self.finite.items()},
            "nearly_monotone": self.nearly_monotone,
            "holder_monotone": self.holder_monotone,
        }


def classify_monotonicity(
    f: FunctionHandle,
    s_grid,
    c_max: float = 1e6,
    outer_samples: int = 150,
    inner_samples: int = 48,
    t_min: float = 1e-2,
    region: Ball | None = None,
) -> MonotonicityClassification:
    """Flag each omega_s as finite (<= c_max and refinement-stable) or divergent.

    Nearly monotone = every s in the grid finite; Hölder monotone = some s
    finite.  Refinement doubles both sample counts and halves t_min; the
    nested sampling makes the estimate nondecreasing, so stability means the
    refined estimate grew by less than 5%.
    """
    s_grid = list(s_grid)
    if not s_grid:
        raise DomainError("s_grid must be nonempty")
    out = MonotonicityClassification(s_grid=s_grid, c_max=c_max)
    for s in s_grid:
        m = Modulus.omega(s)
        base = monotone_functional(f, m, outer_samples, inner_samples, t_min, region)
        fine = monotone_functional(f, m, 2 * outer_samples, 2 * inner_samples, t_min / 2.0, region)
        est = fine.log_estimate
        out.estimates[s] = float(np.exp(min(est, 700.0)))
        grow = fine.log_estimate - base.log_estimate
        stable = (not fine.divergent) and (not base.divergent) and grow < math.log(1.0 + STABILITY_TOLERANCE)
        out.finite[s] = bool(stable and est <= math.log(c_max))
    out.nearly_monotone = all(out.finite.values())
    out.holder_monotone = any(out.finite.values())
    return out


@dataclass
class PowerBoundReport:
    s: float
    s_prime: float
    constants: dict = field(default_factory=dict)
    stable: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "op": "verify_power_bound",
            "s": float(self.s),
            "s_prime": float(self.s_prime),
            "constants": {str(k): float(v) for k, v in self.constants.items()},
            "stable": {str(k): bool(v) for k, v in self.stable.items()},
        }


def verify_power_bound(
    f: FunctionHandle,
    s: float,
    s_prime: float,
    m_max: int,
    region: Ball,
    samples: int = 400,
) -> PowerBoundReport:
    """Empirical constants in |grad^m f| <= Gamma * f^((s')^m) for m <= m_max.

    Requires 0 < s' < s < 1 and f <= 1 on the region (callers assert f is
    flat and positive away from the origin; samples with f = 0 but a nonzero
    derivative are a precondition violation).
    """
    if not 0.0 < s_prime < s < 1.0:
        raise DomainError(f"need 0 < s' < s < 1, got s'={s_prime}, s={s}")
    pts = ball_points(region, samples)
    fvals = f.values(pts)
    if np.any(fvals > 1.0 + 1e-12):
        raise DomainError("f must be <= 1 on the region (rescale first)")
    log_f = f.log_values(pts)

    report = PowerBoundReport(s=s, s_prime=s_prime)
    for m in range(1, m_max + 1):
        exponent = s_prime**m

        def worst(points, logs):
            best = -math.inf
            d = np.zeros(len(points))
            for alpha in _multiindices_cached(f.arity, m):
                d = np.maximum(d, np.abs(f.derivative_values(points, alpha)))
            with np.errstate(divide="ignore"):
                logd = np.log(d)
            for i in range(len(points)):
                if logs[i] == -math.inf:
                    if logd[i] > -math.inf:
                        raise NonnegativityError(
                            f"f vanishes at {points[i]} with a nonzero order-{m} derivative; "
                            "shrink the region away from the flat point"
                        )
                    continue
                best = max(best, logd[i] - exponent * logs[i])
            return best

        base = worst(pts, log_f)
        fine_pts = ball_points(region, 2 * samples)
        fine = worst(fine_pts, f.log_values(fine_pts))
        report.constants[m] = float(np.exp(min(fine, 700.0)))
        report.stable[m] = bool(fine - base < math.log(1.0 + STABILITY_TOLERANCE))
    return report


_MI_CACHE: dict = {}


def _multiindices_cached(n, order):
    from .calculus import multiindices

    key = (n, order)
    if key not in _MI_CACHE:
        _MI_CACHE[key] = multiindices(n, order)
    return _MI_CACHE[key]
