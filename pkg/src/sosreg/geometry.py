"""Balls, grids and deterministic low-discrepancy sampling shared by all modules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc


@dataclass(frozen=True)
class Ball:
    """Closed ball B(center, radius) in R^n."""

    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if self.radius <= 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")

    @property
    def dim(self) -> int:
        return len(self.center)

    def contains(self, x, slack: float = 0.0):
        x = np.asarray(x, dtype=float)
        c = np.asarray(self.center)
        if x.ndim == 1:
            return float(np.linalg.norm(x - c)) <= self.radius + slack
        return np.linalg.norm(x - c, axis=-1) <= self.radius + slack


def halton(n: int, dim: int) -> np.ndarray:
    """First n points of the unscrambled Halton sequence in [0,1)^dim.

    Unscrambled so that prefixes are nested: halton(2n)[:n] == halton(n).
    """
    eng = qmc.Halton(d=dim, scramble=False)
    return eng.random(n)


def ball_points(ball: Ball, n: int, inner_radius: float = 0.0) -> np.ndarray:
    """Deterministic low-discrepancy points in the (possibly annular) ball.

    Points are taken from a Halton sequence in the bounding cube and filtered,
    so doubling n yields a superset of the previous point set.
    """
    c = np.asarray(ball.center)
    dim = ball.dim
    pts = []
    m = max(4 * n, 16)
    while True:
        cube = halton(m, dim)
        cand = c + (2.0 * cube - 1.0) * ball.radius
        d = np.linalg.norm(cand - c, axis=1)
        mask = (d <= ball.radius) & (d >= inner_radius)
        if mask.sum() >= n:
            pts = cand[mask][:n]
            break
        m *= 2
    return pts


def sphere_points(n: int, dim: int) -> np.ndarray:
    """n low-discrepancy points on the unit sphere S^(dim-1)."""
    u = halton(n, dim)
    g = ndtri(np.clip(u, 1e-12, 1 - 1e-12))
    norms = np.linalg.norm(g, axis=1)
    norms[norms == 0] = 1.0
    return g / norms[:, None]


def ball_grid(ball: Ball, per_axis: int) -> np.ndarray:
    """Regular grid over the bounding cube, restricted to the ball."""
    c = np.asarray(ball.center)
    axes = [np.linspace(ci - ball.radius, ci + ball.radius, per_axis) for ci in c]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    keep = np.linalg.norm(pts - c, axis=1) <= ball.radius
    return pts[keep]
