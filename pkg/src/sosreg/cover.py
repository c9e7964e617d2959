"""Control distance, slow variation, ball covers and squared partitions.

The control distance attached to a nonnegative function f and an exponent
delta is the pointwise maximum of f^(1/(4+2d)), the positive directional
Hessian part to the power 1/(2+2d), and (in the full variant) the max
fourth-derivative entry to the power 1/(2d).  Cells of the cover are balls
of radius s * rho(center); the squared bumps chi_nu / sqrt(sum chi^2) give a
partition of unity with sum of squares exactly one on the covered region.

Cover construction is sequential and deterministic (greedy order matters);
partition evaluation is vectorized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .calculus import FunctionHandle, directional_hessian_plus_values
from .errors import CoverBudgetError, CoverageHoleError, DomainError
from .geometry import Ball, ball_points, sphere_points

__all__ = [
    "ControlDistanceParams",
    "CoverCell",
    "Partition",
    "control_distance",
    "control_distance_values",
    "verify_slowly_varying",
    "build_cover",
    "build_partition",
    "color_classes",
    "SlowVariationReport",
]

DEFAULT_CELL_SCALE = 1.0 / 200.0


@dataclass(frozen=True)
class ControlDistanceParams:
    """Exponent and variant of the control distance.

    variant "full" uses all three terms; "reduced" drops the fourth-derivative
    term (the two-term distance that drives the slow-variation estimate).

    The distance itself only needs delta > 0; the decomposition pipeline
    additionally restricts to delta < 1/2 when it consumes these parameters.
    """

    delta: float
    variant: str = "full"

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise DomainError(f"delta must lie in (0, 1), got {self.delta}")
        if self.variant not in ("full", "reduced"):
            raise DomainError(f"variant must be 'full' or 'reduced', got {self.variant!r}")


@dataclass
class CoverCell:
    nu: int
    center: tuple
    radius: float
    bump_scale: float
    color: int | None = None

    def as_dict(self) -> dict:
        return {
            "nu": self.nu,
            "center": [float(c) for c in self.center],
            "radius": float(self.radius),
            "color": self.color,
        }


def control_distance_values(f: FunctionHandle, X, p: ControlDistanceParams) -> np.ndarray:
    """Vectorized control distance on an (N, n) batch of points."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = p.delta
    fvals = np.maximum(f.values(X), 0.0)
    term_f = fvals ** (1.0 / (4.0 + 2.0 * d))
    term_h = directional_hessian_plus_values(f, X) ** (1.0 / (2.0 + 2.0 * d))
    rho = np.maximum(term_f, term_h)
    if p.variant == "full":
        term_4 = f.max_entry_values(X, 4) ** (1.0 / (2.0 * d))
        rho = np.maximum(rho, term_4)
    if not np.all(np.isfinite(rho)):
        raise DomainError("control distance evaluated non-finite")
    return rho


def control_distance(f: FunctionHandle, x, p: ControlDistanceParams) -> float:
    """max{ f^(1/(4+2d)), [directional Hessian]_+^(1/(2+2d)), |grad^4 f|^(1/2d) } at x."""
    return float(control_distance_values(f, np.atleast_2d(np.asarray(x, dtype=float)), p)[0])


# ---------------------------------------------------------------------------
# Slow variation
# ---------------------------------------------------------------------------


@dataclass
class SlowVariationReport:
    delta: float
    bound: float
    worst_ratio: float
    violations: list
    pairs: int
    rescale: float

    @property
    def passed(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {
            "op": "slow_variation",
            "delta": float(self.delta),
            "bound": float(self.bound),
            "worst_ratio": float(self.worst_ratio),
            "violations": self.violations,
            "pairs": self.pairs,
            "rescale": float(self.rescale),
            "passed": self.passed,
        }


def verify_slowly_varying(
    f: FunctionHandle,
    p: ControlDistanceParams,
    region: Ball,
    samples: int = 2000,
) -> SlowVariationReport:
    """Check |r(x) - r(y)| <= (1/2)^(1/(4+2d)) r(x) for |x-y| <= r(x)/200.

    Uses the reduced (two-term) distance.  f is divided by the sampled sup of
    its fourth derivative entries (when above one) so the normalized function
    satisfies the |grad^4| <= 1 hypothesis; the factor is reported.
    """
    n = f.arity
    xs = ball_points(region, samples)
    sup4 = float(np.max(f.max_entry_values(xs, 4)))
    if not math.isfinite(sup4):
        raise DomainError("fourth derivative unbounded on region; cannot rescale")
    M = max(1.0, 1.05 * sup4)
    g = f.rescaled(1.0 / M)
    reduced = ControlDistanceParams(delta=p.delta, variant="reduced")

    rx = control_distance_values(g, xs, reduced)
    dirs = sphere_points(max(16, samples // 8), n) if n > 1 else np.array([[1.0], [-1.0]])
    fracs = np.linspace(0.1, 1.0, 7)
    bound = 0.5 ** (1.0 / (4.0 + 2.0 * p.delta))

    worst = 0.0
    violations = []
    pair_count = 0
    ys_all, rx_rep = [], []
    for k, x in enumerate(xs):
        d = dirs[k % len(dirs)]
        frac = fracs[k % len(fracs)]
        y = x + frac * (rx[k] / 200.0) * d
        ys_all.append(y)
        rx_rep.append(rx[k])
    ys_all = np.array(ys_all)
    ry = control_distance_values(g, ys_all, reduced)
    for k in range(len(xs)):
        if rx_rep[k] <= 0:
            continue
        pair_count += 1
        ratio = abs(rx_rep[k] - ry[k]) / rx_rep[k]
        if ratio > worst:
            worst = ratio
        if ratio > bound * (1 + 1e-12):
            violations.append(
                {"x": [float(v) for v in xs[k]], "y": [float(v) for v in ys_all[k]], "ratio": float(ratio)}
            )
    return SlowVariationReport(
        delta=p.delta, bound=bound, worst_ratio=worst, violations=violations, pairs=pair_count, rescale=M
    )


# ---------------------------------------------------------------------------
# Cover construction
# ---------------------------------------------------------------------------


def build_cover(
    f: FunctionHandle,
    p: ControlDistanceParams,
    region: Ball,
    s: float = DEFAULT_CELL_SCALE,
    floor: float = 1e-3,
    max_cells: int = 200_000,
) -> list:
    """Greedy ball cover of {x in region : rho(x) >= floor} with radii s*rho.

    Candidate centers on a regular grid are sorted by rho descending and
    accepted when not already within half the radius of an accepted cell, a
    constructive stand-in for a bounded-overlap cube decomposition.
    """
    if not 0.0 < s <= DEFAULT_CELL_SCALE + 1e-15:
        raise DomainError(f"cell scale s must lie in (0, 1/200], got {s}")
    if floor <= 0:
        raise DomainError("floor must be positive")
    n = region.dim

    # probe to learn the radius range on the region
    probe = ball_points(region, 512)
    rho_probe = control_distance_values(f, probe, p)
    rho_max = float(np.max(rho_probe))
    live = rho_probe[rho_probe >= floor]
    if live.size == 0:
        return []
    r_min_est = s * max(float(np.min(live)), floor)

    spacing = r_min_est / 2.0
    per_axis = int(math.ceil(2.0 * region.radius / spacing)) + 1
    if per_axis**n > 64 * max_cells + 4096:
        raise CoverBudgetError(
            f"candidate grid of {per_axis ** n} points exceeds the budget; raise floor or max_cells",
            count=per_axis**n,
        )
    c = np.asarray(region.center)
    axes = [np.linspace(ci - region.radius, ci + region.radius, per_axis) for ci in c]
    mesh = np.meshgrid(*axes, indexing="ij")
    cand = np.stack([m.ravel() for m in mesh], axis=1)
    cand = cand[np.linalg.norm(cand - c, axis=1) <= region.radius]

    rho = np.empty(len(cand))
    chunk = 200_000
    for i in range(0, len(cand), chunk):
        rho[i : i + chunk] = control_distance_values(f, cand[i : i + chunk], p)
    keep = rho >= floor
    cand, rho = cand[keep], rho[keep]
    order = np.lexsort(tuple(cand[:, i] for i in range(n)) + (-rho,))
    cand, rho = cand[order], rho[order]

    # spatial hash for "covered at half radius" queries
    cell_size = s * rho_max / 2.0
    buckets: dict = {}
    accepted_centers: list = []
    accepted_radius: list = []

    def bucket_key(pt):
        return tuple(int(math.floor(v / cell_size)) for v in pt)

    reach = 1  # accepted half-radii are <= cell_size, one bucket ring suffices

    cells: list = []
    for idx in range(len(cand)):
        x = cand[idx]
        key = bucket_key(x)
        covered = False
        for offs in np.ndindex(*((2 * reach + 1,) * n)):
            nb = tuple(k + o - reach for k, o in zip(key, offs))
            for j in buckets.get(nb, ()):
                if np.linalg.norm(x - accepted_centers[j]) <= accepted_radius[j] / 2.0:
                    covered = True
                    break
            if covered:
                break
        if covered:
            continue
        r = s * float(rho[idx])
        j = len(accepted_centers)
        accepted_centers.append(x)
        accepted_radius.append(r)
        buckets.setdefault(key, []).append(j)
        cells.append(CoverCell(nu=j, center=tuple(x), radius=r, bump_scale=r))
        if len(cells) > max_cells:
            raise CoverBudgetError(
                f"cover exceeded {max_cells} cells (floor {floor} too small for this region)",
                count=len(cells),
            )
    return cells


# ---------------------------------------------------------------------------
# Partition of unity
# ---------------------------------------------------------------------------


def _transition(v: np.ndarray) -> np.ndarray:
    """Smooth step q(v) = E(v) / (E(v) + E(1-v)), E(v) = exp(-1/v) for v > 0."""
    with np.errstate(all="ignore"):
        ev = np.where(v > 0, np.exp(-1.0 / np.where(v > 0, v, 1.0)), 0.0)
        e1 = np.where(1 - v > 0, np.exp(-1.0 / np.where(1 - v > 0, 1 - v, 1.0)), 0.0)
        den = ev + e1
        return np.where(den > 0, ev / np.where(den > 0, den, 1.0), 0.0)


def bump_profile(u: np.ndarray) -> np.ndarray:
    """Radial bump profile: 1 for u <= 1/2, 0 for u >= 1, smooth between."""
    u = np.asarray(u, dtype=float)
    return np.where(u <= 0.5, 1.0, np.where(u >= 1.0, 0.0, _transition(2.0 * (1.0 - u))))


class Partition:
    """Squared partition of unity subordinate to a cover.

    Phi_nu = chi_nu / sqrt(sum_mu chi_mu^2) with chi_nu the radial bump of the
    cell, so sum Phi_nu^2 = 1 identically on the covered region.
    """

    def __init__(self, cells: list, region: Ball | None = None):
        if not cells:
            raise DomainError("cannot build a partition over an empty cover")
        self.cells = list(cells)
        self.region = region
        self.centers = np.array([c.center for c in self.cells])
        self.radii = np.array([c.radius for c in self.cells])
        self.tree = cKDTree(self.centers)
        self.r_max = float(np.max(self.radii))
        self.overlap_observed: int | None = None

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def chi_pairs(self, X) -> list:
        """Per-cell (point-index array, chi-value array) for one point batch.

        Only cells whose ball meets the batch appear with nonempty indices;
        the map is the single geometric pass every evaluation reuses.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        pt_tree = cKDTree(X)
        hits = pt_tree.query_ball_point(self.centers, self.radii)
        pairs = []
        for j, idxs in enumerate(hits):
            if not idxs:
                pairs.append((np.empty(0, dtype=int), np.empty(0)))
                continue
            idxs = np.asarray(idxs, dtype=int)
            u = np.linalg.norm(X[idxs] - self.centers[j], axis=1) / self.radii[j]
            pairs.append((idxs, bump_profile(u)))
        return pairs

    def chi(self, nu: int, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        u = np.linalg.norm(X - self.centers[nu], axis=1) / self.radii[nu]
        return bump_profile(u)

    def sum_chi_sq(self, X, pairs: list | None = None) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        pairs = pairs if pairs is not None else self.chi_pairs(X)
        out = np.zeros(X.shape[0])
        for idxs, chi in pairs:
            if idxs.size:
                np.add.at(out, idxs, chi**2)
        return out

    def phi(self, nu: int, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        tot = self.sum_chi_sq(X)
        chi = self.chi(nu, X)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(chi > 0, chi / np.sqrt(np.where(tot > 0, tot, 1.0)), 0.0)

    def check_unity(self, X) -> float:
        """Max |sum Phi^2 - 1| on the points; raises on a coverage hole."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        pairs = self.chi_pairs(X)
        tot = self.sum_chi_sq(X, pairs)
        if np.any(tot == 0.0):
            i = int(np.argmin(tot))
            raise CoverageHoleError(f"no bump covers the point {X[i].tolist()}")
        acc = np.zeros(X.shape[0])
        for idxs, chi in pairs:
            if idxs.size:
                np.add.at(acc, idxs, chi**2 / tot[idxs])
        return float(np.max(np.abs(acc - 1.0)))

    def observe_overlap(self, X) -> int:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        counts = np.zeros(X.shape[0], dtype=int)
        for idxs, chi in self.chi_pairs(X):
            if idxs.size:
                counts[idxs] += 1
        self.overlap_observed = int(np.max(counts)) if counts.size else 0
        return self.overlap_observed


def build_partition(cells: list, region: Ball | None = None) -> Partition:
    """Partition of unity with bumps chi_nu (value 1 on the inner half ball,
    support inside the cell ball), normalized so the squares sum to one."""
    return Partition(cells, region=region)


def partition_derivative_report(partition: Partition, per_cell_samples: int = 64, max_cells: int = 40) -> dict:
    """Empirical sup of |D^alpha Phi_nu| * r_nu^|alpha| for |alpha| <= 2.

    Finite differences on a subsample of cells; the scaled sup should be
    bounded by a constant independent of the cell.
    """
    picked = partition.cells[:: max(1, len(partition.cells) // max_cells)][:max_cells]
    out = {1: 0.0, 2: 0.0}
    for cell in picked:
        r = cell.radius
        h = 1e-4 * r
        pts = ball_points(Ball(center=cell.center, radius=0.98 * r), per_cell_samples)
        n = partition.dim

        def phi(P):
            return partition.phi(cell.nu, P)

        for axis in range(n):
            e = np.zeros(n)
            e[axis] = h
            d1 = (phi(pts + e) - phi(pts - e)) / (2 * h)
            d2 = (phi(pts + e) - 2 * phi(pts) + phi(pts - e)) / h**2
            out[1] = max(out[1], float(np.max(np.abs(d1))) * r)
            out[2] = max(out[2], float(np.max(np.abs(d2))) * r**2)
    return {"scaled_sup_order1": out[1], "scaled_sup_order2": out[2], "cells_checked": len(picked)}


# ---------------------------------------------------------------------------
# Color classes with pairwise disjoint triples
# ---------------------------------------------------------------------------


def color_classes(cells: list) -> list:
    """Greedy coloring of the "tripled balls intersect" graph.

    Within each returned class the balls of triple radius are pairwise
    disjoint.  Returns the cells with their color fields set, ordered as
    given; the number of classes is len({c.color}).
    """
    if not cells:
        return cells
    centers = np.array([c.center for c in cells])
    radii = np.array([c.radius for c in cells])
    tree = cKDTree(centers)
    r_max = float(np.max(radii))
    neighbor_lists = tree.query_ball_tree(tree, 6.0 * r_max)
    for i, cell in enumerate(cells):
        used = set()
        for j in neighbor_lists[i]:
            if j == i or cells[j].color is None:
                continue
            if np.linalg.norm(centers[i] - centers[j]) < 3.0 * (radii[i] + radii[j]):
                used.add(cells[j].color)
        color = 0
        while color in used:
            color += 1
        cell.color = color
    return cells
