"""Sum-of-squares decomposition via per-cell square roots and fiber reduction.

Every cell of a control-distance cover contributes either the direct root
Phi_nu * sqrt(f) (cell value comparable to rho^(4+2d)) or, in the
second-derivative-dominated case, the exact split

    f(xi, y) = F(xi) + H(xi, y) * (y - X(xi))^2

along the top Hessian eigendirection, where X is the fiberwise minimizer,
H(xi, y) = int_0^1 (1-t) d^2_y f(xi, (1-t)X+ty) dt (no leading 1/2, so the
identity is exact), and the reduced profile F of one fewer variable is
decomposed recursively with a smaller Hölder exponent from the two-parameter
recursion.  Roots are grouped by cover color class into finitely many
functions g_l with f = sum g_l^2 on the truncated region.

Cells decompose independently; assembly and reporting are deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .calculus import FunctionHandle, HolderEstimate, multiindices
from .cover import (
    ControlDistanceParams,
    CoverCell,
    Partition,
    build_cover,
    build_partition,
    color_classes,
    control_distance_values,
)
from .errors import (
    BoundaryRootError,
    ClassificationError,
    DomainError,
    QuadratureError,
    SosregError,
)
from .geometry import Ball, ball_points, sphere_points

__all__ = [
    "delta_sequence",
    "check_differential_inequalities",
    "classify_cell",
    "implicit_minimizer",
    "reduced_profile",
    "decompose",
    "verify_decomposition",
    "root_holder_estimate",
    "DecomposeParams",
    "DecompositionReport",
    "CellDecomposition",
    "DiffIneqReport",
    "MinimizerProfile",
    "track_implicit_root",
    "implicit_gradient",
    "implicit_second_derivative",
]


# ---------------------------------------------------------------------------
# Exponent recursion
# ---------------------------------------------------------------------------


def delta_sequence(delta: float, eta: float, n: int) -> list:
    """[d_0, ..., d_(n-1)] with d_0 = delta and
    d_(k+1)/(2+d_(k+1)) = eta * d_k/(1+d_k); closed form d_(k+1) = 2u/(1-u).

    Strictly decreasing for eta < 1/2.  The endpoint 1/2 is accepted here
    (the recursion is well defined there); the decomposition parameters
    enforce the strict bound.
    """
    if not 0.0 < delta <= 0.5:
        raise DomainError(f"delta must lie in (0, 1/2], got {delta}")
    if not 0.0 < eta <= 0.5:
        raise DomainError(f"eta must lie in (0, 1/2], got {eta}")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    seq = [float(delta)]
    for _ in range(n - 1):
        u = eta * seq[-1] / (1.0 + seq[-1])
        seq.append(2.0 * u / (1.0 - u))
    return seq


# ---------------------------------------------------------------------------
# Differential inequalities
# ---------------------------------------------------------------------------


@dataclass
class DiffIneqReport:
    delta: float
    eta: float
    quartic_constant: float
    hessian_constant: float
    quartic_stable: bool
    hessian_stable: bool
    samples: int

    @property
    def passed(self) -> bool:
        return (
            self.quartic_stable
            and self.hessian_stable
            and math.isfinite(self.quartic_constant)
            and math.isfinite(self.hessian_constant)
        )

    def as_dict(self) -> dict:
        return {
            "op": "differential_inequalities",
            "delta": float(self.delta),
            "eta": float(self.eta),
            "quartic_constant": float(self.quartic_constant),
            "hessian_constant": float(self.hessian_constant),
            "quartic_stable": self.quartic_stable,
            "hessian_stable": self.hessian_stable,
            "samples": self.samples,
            "passed": self.passed,
        }


def _ratio_sup(log_num: np.ndarray, log_f: np.ndarray, exponent: float) -> float:
    """sup exp(log_num - exponent*log_f), treating 0/0 as 0 and x/0 as inf."""
    best = -math.inf
    for ln, lf in zip(log_num, log_f):
        if ln == -math.inf:
            continue
        if lf == -math.inf:
            return math.inf
        best = max(best, ln - exponent * lf)
    return math.exp(best) if best < 700 else math.inf


def check_differential_inequalities(
    f: FunctionHandle, delta: float, eta: float, region: Ball, samples: int = 600
) -> DiffIneqReport:
    """Empirical constants in |grad^4 f| <= C f^(d/(2+d)) and
    [directional Hessian]_+ <= C f^eta, with a refinement-stability flag."""
    from .cover import directional_hessian_plus_values as dhp

    def constants(pts):
        with np.errstate(divide="ignore"):
            log_f = np.log(np.maximum(f.values(pts), 0.0))
            log_q = np.log(f.max_entry_values(pts, 4))
            log_h = np.log(dhp(f, pts))
        return (
            _ratio_sup(log_q, log_f, delta / (2.0 + delta)),
            _ratio_sup(log_h, log_f, eta),
        )

    base = constants(ball_points(region, samples))
    fine = constants(ball_points(region, 2 * samples))

    def stable(a, b):
        if not (math.isfinite(a) and math.isfinite(b)):
            return False
        if b == 0.0:
            return True
        return b <= a * 1.05 + 1e-12

    return DiffIneqReport(
        delta=delta,
        eta=eta,
        quartic_constant=fine[0] if fine[0] > 0 else 0.0,
        hessian_constant=fine[1] if fine[1] > 0 else 0.0,
        quartic_stable=stable(base[0], fine[0]),
        hessian_stable=stable(base[1], fine[1]),
        samples=2 * samples,
    )


# ---------------------------------------------------------------------------
# Implicit function helpers (Newton tracking and closed-form derivatives)
# ---------------------------------------------------------------------------


def track_implicit_root(
    H: FunctionHandle, x_prime, lo: float, hi: float, tol: float = 1e-13
) -> float:
    """Root y of H(x', y) = 0 on [lo, hi] by safeguarded Newton with bisection.

    Requires a sign change of H(x', .) across the bracket.
    """
    x_prime = tuple(float(v) for v in np.atleast_1d(x_prime))
    k = len(x_prime)
    dn = tuple([0] * k + [1])

    def val(y):
        return H.value(x_prime + (y,))

    def dval(y):
        return H.derivative(x_prime + (y,), dn)

    flo, fhi = val(lo), val(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise BoundaryRootError(f"no sign change of H on [{lo}, {hi}] at x'={x_prime}")
    a, b = (lo, hi) if flo < 0 else (hi, lo)
    y = 0.5 * (lo + hi)
    for _ in range(100):
        fy = val(y)
        if abs(fy) <= tol:
            return float(y)
        if fy < 0:
            a = y
        else:
            b = y
        dy = dval(y)
        step_ok = dy != 0.0
        if step_ok:
            y_new = y - fy / dy
            if not (min(a, b) < y_new < max(a, b)):
                step_ok = False
        if not step_ok:
            y_new = 0.5 * (a + b)
        if y_new == y:
            return float(y)
        y = y_new
    return float(y)


def implicit_gradient(H: FunctionHandle, point) -> np.ndarray:
    """dh/dx_i = -H_i / H_n at a point (x', h(x')) on the zero set."""
    g = H.gradient(point)
    return -g[:-1] / g[-1]


def implicit_second_derivative(H: FunctionHandle, point) -> np.ndarray:
    """Closed-form Hessian of the implicit function h at (x', h(x')):

    d2h/dx_i dx_j = -H_ij/H_n + (H_j H_in + H_i H_jn)/H_n^2
                    - H_i H_j H_nn/H_n^3.
    """
    g = H.gradient(point)
    Hes = H.hessian(point)
    n = len(g)
    k = n - 1
    Hn = g[-1]
    out = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            out[i, j] = (
                -Hes[i, j] / Hn
                + (g[j] * Hes[i, -1] + g[i] * Hes[j, -1]) / Hn**2
                - g[i] * g[j] * Hes[-1, -1] / Hn**3
            )
    return out


# ---------------------------------------------------------------------------
# Rotated access to a handle
# ---------------------------------------------------------------------------


def rotation_with_last_axis(theta: np.ndarray) -> np.ndarray:
    """Orthonormal matrix whose last column is the unit vector theta
    (Householder reflection; identity when theta is already the last axis)."""
    theta = np.asarray(theta, dtype=float)
    n = theta.size
    e = np.zeros(n)
    e[-1] = 1.0
    v = e - theta
    nv = np.linalg.norm(v)
    if nv < 1e-14:
        return np.eye(n)
    v = v / nv
    return np.eye(n) - 2.0 * np.outer(v, v)


class _RotatedFrame:
    """Derivatives of f in coordinates v with x = base + R v."""

    def __init__(self, f: FunctionHandle, base: np.ndarray, R: np.ndarray):
        self.f = f
        self.base = np.asarray(base, dtype=float)
        self.R = np.asarray(R, dtype=float)
        self.n = f.arity

    def to_global(self, V) -> np.ndarray:
        V = np.atleast_2d(np.asarray(V, dtype=float))
        return self.base + V @ self.R.T

    def values(self, V) -> np.ndarray:
        return self.f.values(self.to_global(V))

    def gradient_loc(self, V) -> np.ndarray:
        return self.f.gradient_values(self.to_global(V)) @ self.R

    def hessian_loc(self, V) -> np.ndarray:
        H = self.f.hessian_values(self.to_global(V))
        return np.einsum("pab,ai,bj->pij", H, self.R, self.R)

    def tensor3_loc(self, V) -> np.ndarray:
        X = self.to_global(V)
        n = self.n
        T = np.empty((X.shape[0],) + (n,) * 3)
        cache = {}
        for idx in np.ndindex(*(n,) * 3):
            counts = [0] * n
            for i in idx:
                counts[i] += 1
            counts = tuple(counts)
            if counts not in cache:
                cache[counts] = self.f.derivative_values(X, counts)
            T[(slice(None),) + idx] = cache[counts]
        return np.einsum("pabc,ai,bj,ck->pijk", T, self.R, self.R, self.R)

    def fiber_d1(self, V) -> np.ndarray:
        return self.gradient_loc(V)[:, -1]

    def fiber_d2(self, V) -> np.ndarray:
        return self.hessian_loc(V)[:, -1, -1]


# ---------------------------------------------------------------------------
# Cell classification
# ---------------------------------------------------------------------------


@dataclass
class CellDecomposition:
    cell: CoverCell
    case: str
    rho: float
    rho_terms: tuple
    axis: tuple | None = None
    minimizer: "MinimizerProfile | None" = None
    H_eval: "object | None" = None
    F_handle: FunctionHandle | None = None
    F_const: float | None = None
    sub_report: "DecompositionReport | None" = None
    h_lower_ok: bool | None = None
    identity_error: float | None = None

    def as_dict(self) -> dict:
        out = {
            "nu": self.cell.nu,
            "case": self.case,
            "color": self.cell.color,
            "center": [float(v) for v in self.cell.center],
            "radius": float(self.cell.radius),
            "rho": float(self.rho),
            "axis": None if self.axis is None else [float(v) for v in self.axis],
            "h_lower_ok": self.h_lower_ok,
            "identity_error": self.identity_error,
            "recursive": self.sub_report is not None,
        }
        if self.case == "II":
            out["tables"] = self.sampled_tables()
        return out

    def sampled_tables(self, resolution: int = 9) -> dict | None:
        """Grid tables of the minimizer X, reduced profile F and fiber factor
        H over the cell, with shape metadata, for serialized reports."""
        if self.minimizer is None:
            return None
        k = self.minimizer.frame.n - 1
        r = 0.9 * self.cell.radius
        if k == 0:
            Xi = np.zeros((1, 0))
        elif k == 1:
            Xi = np.linspace(-r, r, resolution).reshape(-1, 1)
        else:
            Xi = ball_points(Ball(center=(0.0,) * k, radius=r), resolution)
        ys = np.linspace(-r, r, resolution)
        X = self.minimizer.solve_many(Xi)
        if self.F_handle is not None:
            F = self.F_handle.values(Xi)
        else:
            F = np.full(Xi.shape[0], self.F_const)
        H = np.stack([self.H_eval.values(Xi, np.full(Xi.shape[0], y)) for y in ys])
        return {
            "xi_shape": list(Xi.shape),
            "xi": [[float(v) for v in row] for row in Xi],
            "fiber_grid": [float(v) for v in ys],
            "X": [float(v) for v in X],
            "F": [float(v) for v in F],
            "H_shape": list(H.shape),
            "H": [[float(v) for v in row] for row in H],
        }


def classify_cell(f: FunctionHandle, cell: CoverCell, delta: float, c: float):
    """Case label at the cell center: "I" when f(center) >= c * rho^(4+2d),
    else "II" together with the top Hessian eigendirection.

    In the second case the Hessian term must be the active maximum in rho;
    otherwise the fourth-derivative term dominates, which the pipeline's
    normalization is supposed to prevent, and a ClassificationError signals
    the inconsistency.
    """
    x = np.asarray(cell.center)
    d = delta
    fval = max(f.value(x), 0.0)
    H = f.hessian(x)
    eigvals, eigvecs = np.linalg.eigh(H)
    lam = max(eigvals[-1], 0.0)
    term_f = fval ** (1.0 / (4.0 + 2.0 * d))
    term_h = lam ** (1.0 / (2.0 + 2.0 * d))
    term_q = f.max_entry(x, 4) ** (1.0 / (2.0 * d))
    rho = max(term_f, term_h, term_q)
    terms = (term_f, term_h, term_q)
    if fval >= c * rho ** (4.0 + 2.0 * d):
        return "I", None, rho, terms
    if term_h < rho * (1.0 - 1e-9):
        raise ClassificationError(
            f"cell {cell.nu}: case II with a non-dominant Hessian term "
            f"(terms f/hess/quartic = {terms}); the fourth-derivative term dominates, "
            "which signals a missing normalization upstream"
        )
    axis = eigvecs[:, -1]
    for v in axis:
        if abs(v) > 1e-12:
            if v < 0:
                axis = -axis
            break
    return "II", axis, rho, terms


# ---------------------------------------------------------------------------
# Fiber minimizer
# ---------------------------------------------------------------------------


class MinimizerProfile:
    """Newton-tracked fiberwise minimizer X(xi) over a cell cross-section.

    Solves d_y f(xi, y) = 0 on the fiber bracket by safeguarded Newton with
    bisection fallback; solutions are cached and reused as warm starts.  A
    missing sign change means the minimum sits on the bracket boundary,
    which indicates the case split constant c was chosen too large.
    """

    def __init__(self, frame: _RotatedFrame, halfwidth: float, g_tol: float, cell_nu: int):
        self.frame = frame
        self.halfwidth = float(halfwidth)
        self.g_tol = float(g_tol)
        self.cell_nu = cell_nu

    def solve(self, xi) -> float:
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        return float(self.solve_many(xi[None, :])[0])

    def solve_many(self, Xi) -> np.ndarray:
        """Vectorized safeguarded Newton across a batch of cross-sections."""
        Xi = np.atleast_2d(np.asarray(Xi, dtype=float))
        N = Xi.shape[0]
        if N == 0:
            return np.empty(0)

        def g_batch(Y):
            return self.frame.fiber_d1(np.concatenate([Xi, Y[:, None]], axis=1))

        def g2_batch(Y):
            return self.frame.fiber_d2(np.concatenate([Xi, Y[:, None]], axis=1))

        a = np.full(N, -self.halfwidth)
        b = np.full(N, self.halfwidth)
        ga = g_batch(a)
        gb = g_batch(b)
        if np.any(ga > self.g_tol) or np.any(gb < -self.g_tol):
            raise BoundaryRootError(
                f"cell {self.cell_nu}: fiber minimum on the bracket boundary "
                "(case split constant c too large)"
            )
        lo, hi = a.copy(), b.copy()
        y = np.zeros(N)
        for _ in range(80):
            gy = g_batch(y)
            done = np.abs(gy) <= self.g_tol
            if np.all(done):
                break
            neg = gy < 0
            lo = np.where(neg & ~done, y, lo)
            hi = np.where(~neg & ~done, y, hi)
            g2 = g2_batch(y)
            with np.errstate(divide="ignore", invalid="ignore"):
                newton = y - gy / g2
            mid = 0.5 * (lo + hi)
            bad = ~np.isfinite(newton) | (newton <= lo) | (newton >= hi) | (g2 <= 0)
            y_new = np.where(bad, mid, newton)
            y = np.where(done, y, y_new)
        return y


def implicit_minimizer(
    f: FunctionHandle,
    cell: CoverCell,
    axis,
    rho: float,
    delta: float,
    newton_tol: float = 1e-12,
) -> MinimizerProfile:
    """Minimizer profile for the cell fiber along the given unit direction."""
    axis = np.asarray(axis, dtype=float)
    R = rotation_with_last_axis(axis)
    frame = _RotatedFrame(f, np.asarray(cell.center), R)
    g_tol = newton_tol * rho ** (2.0 + 2.0 * delta)
    return MinimizerProfile(frame, halfwidth=cell.radius, g_tol=g_tol, cell_nu=cell.nu)


# ---------------------------------------------------------------------------
# Reduced profile and second-derivative factor
# ---------------------------------------------------------------------------


class _FiberFactor:
    """H(xi, y) = int_0^1 (1-t) d^2_y f(xi, (1-t) X(xi) + t y) dt by
    Gauss-Legendre quadrature (without a leading 1/2, so that
    f = F + H * (y - X)^2 holds exactly)."""

    def __init__(self, frame: _RotatedFrame, minimizer: MinimizerProfile, nodes: int = 32):
        self.frame = frame
        self.minimizer = minimizer
        self.nodes = nodes
        t, w = np.polynomial.legendre.leggauss(nodes)
        self.t = 0.5 * (t + 1.0)
        self.w = 0.5 * w

    def _values(self, Xi, Y, nodes=None) -> np.ndarray:
        Xi = np.atleast_2d(np.asarray(Xi, dtype=float))
        Y = np.atleast_1d(np.asarray(Y, dtype=float))
        X = self.minimizer.solve_many(Xi)
        if nodes is None:
            t, w = self.t, self.w
        else:
            tt, ww = np.polynomial.legendre.leggauss(nodes)
            t, w = 0.5 * (tt + 1.0), 0.5 * ww
        N = Xi.shape[0]
        ys = (1.0 - t)[None, :] * X[:, None] + t[None, :] * Y[:, None]
        V = np.concatenate(
            [np.repeat(Xi, len(t), axis=0), ys.reshape(-1, 1)], axis=1
        )
        d2 = self.frame.fiber_d2(V).reshape(N, len(t))
        return d2 @ ((1.0 - t) * w)

    def values(self, Xi, Y) -> np.ndarray:
        return self._values(Xi, Y)

    def check_quadrature(self, Xi, Y, rel_tol: float = 1e-9):
        a = self._values(Xi, Y)
        b = self._values(Xi, Y, nodes=self.nodes // 2)
        scale = np.max(np.abs(a)) + 1e-30
        err = float(np.max(np.abs(a - b))) / scale
        if err > rel_tol:
            raise QuadratureError(f"fiber factor quadrature mismatch {err:.3e}")
        return err


def _reduced_profile_handle(
    frame: _RotatedFrame,
    minimizer: MinimizerProfile,
    k: int,
    radius: float,
    label: str,
) -> FunctionHandle:
    """F(xi) = f(xi, X(xi)) as a handle over the (k-dim) cross-section.

    Derivatives of order <= 2 use the implicit-function formulas
    F_i = f_i and F_ij = f_ij - f_in f_jn / f_nn (rotated frame, on the
    minimizer graph); orders 3 and 4 fall back to Richardson-extrapolated
    central differences of the tracked profile.
    """

    def graph_points(Xi):
        Xi = np.atleast_2d(np.asarray(Xi, dtype=float))
        X = minimizer.solve_many(Xi)
        return np.concatenate([Xi, X[:, None]], axis=1)

    def eval_many(Xi):
        return frame.values(graph_points(Xi))

    h_base = radius / 16.0
    from .calculus import _STENCILS

    def fd_many(Xi, alpha, h):
        offsets = [np.zeros(k)]
        weights = [1.0]
        for axis, p in enumerate(alpha):
            if p == 0:
                continue
            offs, coefs = _STENCILS[p]
            new_o, new_w = [], []
            for base, wt in zip(offsets, weights):
                for o, cf in zip(offs, coefs):
                    sh = base.copy()
                    sh[axis] += o * h
                    new_o.append(sh)
                    new_w.append(wt * cf / h ** p)
            offsets, weights = new_o, new_w
        obs, wts = np.array(offsets), np.array(weights)
        Xi = np.atleast_2d(np.asarray(Xi, dtype=float))
        pts = (Xi[:, None, :] + obs[None, :, :]).reshape(-1, k)
        return eval_many(pts).reshape(Xi.shape[0], -1) @ wts

    def derivative_factory(alpha):
        alpha = tuple(alpha)
        order = sum(alpha)
        if order == 1:
            axis = alpha.index(1)

            def d1(Xi):
                return frame.gradient_loc(graph_points(Xi))[:, axis]

            return d1
        if order == 2 and max(alpha) <= 2:
            ij = [a for a, p in enumerate(alpha) for _ in range(p)]
            i, j = ij[0], ij[1]

            def d2(Xi):
                Hl = frame.hessian_loc(graph_points(Xi))
                return Hl[:, i, j] - Hl[:, i, -1] * Hl[:, j, -1] / Hl[:, -1, -1]

            return d2
        if order in (3, 4) and max(alpha) <= 4:

            def dfd(Xi):
                coarse = fd_many(Xi, alpha, h_base)
                finer = fd_many(Xi, alpha, h_base / 2.0)
                return (16.0 * finer - coarse) / 15.0

            return dfd
        raise DomainError(f"reduced profile supports derivative orders <= 4, got {alpha}")

    return FunctionHandle(
        arity=k,
        eval_many=eval_many,
        derivative_many_factory=derivative_factory,
        domain=Ball(center=(0.0,) * k, radius=radius),
        label=label,
        exact_derivatives=False,
    )


def reduced_profile(
    f: FunctionHandle,
    cell: CoverCell,
    minimizer: MinimizerProfile,
    rho: float,
    delta: float,
    quad_nodes: int = 32,
):
    """(F, H) for a case II cell: the reduced profile over the cross-section
    and the fiber factor with exact reconstruction f = F + H (y - X)^2.

    Checks H >= (1/4) rho^(2+2d) on cell samples (the lower bound matching
    the unhalved H normalization) and quadrature convergence.
    """
    frame = minimizer.frame
    n = f.arity
    k = n - 1
    H = _FiberFactor(frame, minimizer, nodes=quad_nodes)

    if k > 0:
        xi_pts = ball_points(Ball(center=(0.0,) * k, radius=0.9 * cell.radius), 16)
    else:
        xi_pts = np.zeros((8, 0))
    y_pts = np.linspace(-0.9 * cell.radius, 0.9 * cell.radius, len(xi_pts))
    H.check_quadrature(xi_pts, y_pts)
    h_vals = H.values(xi_pts, y_pts)
    h_floor = 0.25 * rho ** (2.0 + 2.0 * delta)
    h_ok = bool(np.all(h_vals >= h_floor * (1.0 - 1e-6)))

    F = None
    if k > 0:
        F = _reduced_profile_handle(frame, minimizer, k, cell.radius, label=f"{f.label}|cell{cell.nu}")
    return F, H, h_ok


# ---------------------------------------------------------------------------
# Root pieces and grouped roots
# ---------------------------------------------------------------------------


class _CaseIPiece:
    kind = "caseI"

    def __init__(self, f: FunctionHandle):
        self.f = f

    def weights(self, X) -> np.ndarray:
        return np.sqrt(np.maximum(self.f.values(X), 0.0))


class _CaseIIQuadPiece:
    kind = "caseII"

    def __init__(self, frame: _RotatedFrame, minimizer: MinimizerProfile, H: _FiberFactor):
        self.frame = frame
        self.minimizer = minimizer
        self.H = H

    def _split(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        V = (X - self.frame.base) @ self.frame.R
        return V[:, :-1], V[:, -1]

    def weights(self, X) -> np.ndarray:
        Xi, Y = self._split(X)
        Xstar = self.minimizer.solve_many(Xi)
        h = np.maximum(self.H.values(Xi, Y), 0.0)
        return (Y - Xstar) * np.sqrt(h)


class _ConstPiece:
    kind = "residue_const"

    def __init__(self, value: float):
        self.value = max(float(value), 0.0)

    def weights(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.full(X.shape[0], math.sqrt(self.value))


class _LiftedPiece:
    kind = "residue_lift"

    def __init__(self, frame: _RotatedFrame, sub_root: "RootGroup"):
        self.frame = frame
        self.sub_root = sub_root

    def weights(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        V = (X - self.frame.base) @ self.frame.R
        return self.sub_root.eval_many(V[:, :-1])


class RootGroup:
    """One square-root function g_l: a color class of cells sharing a bump
    partition, each contributing Phi_nu times its per-cell weight.

    Supports within the group are pairwise disjoint, so
    g_l(x) = sum_nu Phi_nu(x) w_nu(x) has a single active term per point.
    """

    def __init__(self, label: str, partition: Partition, members: list, scale: float = 1.0):
        self.label = label
        self.partition = partition
        self.members = members  # list of (cell index nu, piece)
        self.scale = float(scale)

    @property
    def arity(self) -> int:
        return self.partition.dim

    def eval_many(self, X, pairs=None, tot=None) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if pairs is None:
            pairs = self.partition.chi_pairs(X)
        if tot is None:
            tot = self.partition.sum_chi_sq(X, pairs)
        out = np.zeros(X.shape[0])
        for nu, piece in self.members:
            idxs, chi = pairs[nu]
            if not idxs.size:
                continue
            live = chi > 0
            if not np.any(live):
                continue
            ids = idxs[live]
            out[ids] += chi[live] * piece.weights(X[ids])
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(tot > 0, out / np.sqrt(np.where(tot > 0, tot, 1.0)), 0.0)
        return self.scale * out

    def __call__(self, X):
        return self.eval_many(X)


# ---------------------------------------------------------------------------
# Decomposition driver
# ---------------------------------------------------------------------------


@dataclass
class DecomposeParams:
    delta: float
    eta: float
    region: Ball
    s: float = 1.0 / 200.0
    c: float | None = None
    floor: float = 1e-3
    tol: float = 1e-6
    max_cells: int = 200_000
    verify_points: int = 2000
    normalize: bool = True
    strict_inequalities: bool = False
    holder_pairs: int = 150
    newton_tol: float = 1e-12
    quad_nodes: int = 32
    identity_samples: int = 1000
    estimate_holder: bool = True
    ineq_samples: int = 600

    def __post_init__(self):
        if not 0.0 < self.delta < 0.5:
            raise DomainError(f"delta must lie in (0, 1/2), got {self.delta}")
        if not 0.0 < self.eta < 0.5:
            raise DomainError(f"eta must lie in (0, 1/2), got {self.eta}")
        if self.c is None:
            self.c = self.s**2 / 8.0
        if self.c > self.s**2 / 8.0 + 1e-18:
            raise DomainError("case split constant c must be at most s^2/8")


@dataclass
class DecompositionReport:
    params: DecomposeParams
    deltas: list
    value_scale: float
    cells: list = field(default_factory=list)
    roots: list = field(default_factory=list)
    partition: Partition | None = None
    inequalities: DiffIneqReport | None = None
    residual_sup: float = math.nan
    residual_mean: float = math.nan
    residual_points: int = 0
    identity_error: float = 0.0
    boundary_excluded_fraction: float = 0.0
    boundary_sup_f: float = 0.0
    holder: dict = field(default_factory=dict)
    recursion_depth: int = 0
    warnings: list = field(default_factory=list)
    empty: bool = False

    @property
    def case_counts(self) -> dict:
        out = {"I": 0, "II": 0}
        for cd in self.cells:
            out[cd.case] += 1
        return out

    def sum_of_squares(self, X) -> np.ndarray:
        """Evaluate sum_l g_l(x)^2 on a batch of points."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.empty or self.partition is None:
            return np.zeros(X.shape[0])
        pairs = self.partition.chi_pairs(X)
        tot = self.partition.sum_chi_sq(X, pairs)
        acc = np.zeros(X.shape[0])
        for g in self.roots:
            acc += g.eval_many(X, pairs=pairs, tot=tot) ** 2
        return acc

    def as_dict(self) -> dict:
        return {
            "op": "decompose",
            "deltas": [float(d) for d in self.deltas],
            "value_scale": float(self.value_scale),
            "cell_count": len(self.cells),
            "case_counts": self.case_counts,
            "root_groups": [
                {"label": g.label, "members": len(g.members), "scale": g.scale} for g in self.roots
            ],
            "inequalities": None if self.inequalities is None else self.inequalities.as_dict(),
            "residual_sup": float(self.residual_sup),
            "residual_mean": float(self.residual_mean),
            "residual_points": self.residual_points,
            "identity_error": float(self.identity_error),
            "boundary_excluded_fraction": float(self.boundary_excluded_fraction),
            "boundary_sup_f": float(self.boundary_sup_f),
            "holder": {k: v.as_dict() for k, v in self.holder.items()},
            "recursion_depth": self.recursion_depth,
            "warnings": self.warnings,
            "empty": self.empty,
            "cells": [cd.as_dict() for cd in self.cells],
        }


def _case_ii_identity_error(
    g: FunctionHandle, cd: CellDecomposition, samples: int
) -> float:
    """Max of |g - F - H (y - X)^2| over cell samples (exactness check)."""
    cell = cd.cell
    n = g.arity
    pts = ball_points(Ball(center=cell.center, radius=0.98 * cell.radius), samples)
    frame = cd.minimizer.frame
    V = (pts - frame.base) @ frame.R
    Xi, Y = V[:, :-1], V[:, -1]
    Xstar = cd.minimizer.solve_many(Xi)
    h = cd.H_eval.values(Xi, Y)
    if cd.F_handle is not None:
        Fv = cd.F_handle.values(Xi)
    else:
        Fv = np.full(len(pts), cd.F_const)
    recon = Fv + h * (Y - Xstar) ** 2
    return float(np.max(np.abs(g.values(pts) - recon)))


def decompose(f: FunctionHandle, params: DecomposeParams, _level: int = 0) -> DecompositionReport:
    """Decompose a nonnegative function into a finite sum of squares.

    Builds the control-distance cover and squared partition, emits per-cell
    roots by the case dichotomy, recursively decomposes case II remainder
    profiles over one fewer variable with the next exponent of the recursion,
    and groups roots by color class.  Residuals, the exact-identity check and
    Hölder estimates of the grouped roots are evaluated before returning.
    """
    n = f.arity
    deltas = delta_sequence(params.delta, params.eta, max(n, 1))
    report = DecompositionReport(params=params, deltas=deltas, value_scale=1.0)

    ineq = check_differential_inequalities(
        f, params.delta, params.eta, params.region, samples=params.ineq_samples
    )
    report.inequalities = ineq
    if params.strict_inequalities and not ineq.passed:
        raise SosregError(
            "differential inequalities failed and strict mode is on: "
            f"C4={ineq.quartic_constant:g} (stable={ineq.quartic_stable}), "
            f"CH={ineq.hessian_constant:g} (stable={ineq.hessian_stable})"
        )

    a = 1.0
    if params.normalize and math.isfinite(ineq.quartic_constant) and ineq.quartic_constant > 1.0:
        a = ineq.quartic_constant ** (-(2.0 + params.delta) / 2.0)
    report.value_scale = a
    g = f.rescaled(a) if a != 1.0 else f
    root_scale = 1.0 / math.sqrt(a)

    cdp = ControlDistanceParams(delta=params.delta, variant="full")
    cells = build_cover(g, cdp, params.region, s=params.s, floor=params.floor, max_cells=params.max_cells)

    # boundary layer bookkeeping on a probe grid
    probe = ball_points(params.region, max(params.verify_points, 512))
    rho_probe = control_distance_values(g, probe, cdp)
    excluded = rho_probe < params.floor
    report.boundary_excluded_fraction = float(np.mean(excluded))
    report.boundary_sup_f = float(np.max(f.values(probe[excluded]))) if np.any(excluded) else 0.0

    if not cells:
        report.empty = True
        report.warnings.append("region entirely below the control-distance floor; empty cover")
        return report

    partition = build_partition(cells, region=params.region)
    color_classes(cells)
    report.partition = partition

    groups: dict = {}

    def add_member(key_parts, nu, piece):
        label = ":".join(str(k) for k in key_parts)
        if label not in groups:
            groups[label] = RootGroup(label, partition, [], scale=root_scale)
        groups[label].members.append((nu, piece))

    # vectorized classification prepass over all cell centers
    centers = np.array([c.center for c in cells])
    d = params.delta
    fvals_c = np.maximum(g.values(centers), 0.0)
    H_c = g.hessian_values(centers)
    eig_c = np.linalg.eigvalsh(H_c)[:, -1]
    term_f_c = fvals_c ** (1.0 / (4.0 + 2.0 * d))
    term_h_c = np.maximum(eig_c, 0.0) ** (1.0 / (2.0 + 2.0 * d))
    term_q_c = g.max_entry_values(centers, 4) ** (1.0 / (2.0 * d))
    rho_c = np.maximum(np.maximum(term_f_c, term_h_c), term_q_c)
    case_one = fvals_c >= params.c * rho_c ** (4.0 + 2.0 * d)

    max_depth = 0
    identity_worst = 0.0
    for ci, cell in enumerate(cells):
        terms = (float(term_f_c[ci]), float(term_h_c[ci]), float(term_q_c[ci]))
        rho = float(rho_c[ci])
        if case_one[ci]:
            case, axis = "I", None
        else:
            case = "II"
            if terms[1] < rho * (1.0 - 1e-9):
                raise ClassificationError(
                    f"cell {cell.nu}: case II with a non-dominant Hessian term "
                    f"(terms f/hess/quartic = {terms}); normalization missing upstream"
                )
            eigvals, eigvecs = np.linalg.eigh(H_c[ci])
            axis = eigvecs[:, -1]
            for v in axis:
                if abs(v) > 1e-12:
                    if v < 0:
                        axis = -axis
                    break
        cd = CellDecomposition(cell=cell, case=case, rho=rho, rho_terms=terms)
        if case == "I":
            add_member(("caseI", cell.color), cell.nu, _CaseIPiece(g))
        else:
            cd.axis = tuple(axis)
            minimizer = implicit_minimizer(g, cell, axis, rho, params.delta, params.newton_tol)
            cd.minimizer = minimizer
            F, H, h_ok = reduced_profile(g, cell, minimizer, rho, params.delta, params.quad_nodes)
            cd.H_eval = H
            cd.h_lower_ok = h_ok
            if not h_ok:
                report.warnings.append(f"cell {cell.nu}: fiber factor fell below its lower bound")
            add_member(("caseII", cell.color), cell.nu, _CaseIIQuadPiece(minimizer.frame, minimizer, H))

            k = n - 1
            if k == 0:
                y_star = minimizer.solve(np.zeros(0))
                c0 = float(g.value(minimizer.frame.to_global(np.array([[y_star]]))[0]))
                cd.F_const = max(c0, 0.0)
                add_member(("rem", cell.color, "const"), cell.nu, _ConstPiece(cd.F_const))
            else:
                cd.F_handle = F
                sub_params = replace(
                    params,
                    # one step of the exponent recursion per recursion level
                    delta=delta_sequence(params.delta, params.eta, 2)[1],
                    region=Ball(center=(0.0,) * k, radius=cell.radius),
                    verify_points=max(256, params.verify_points // 4),
                    holder_pairs=max(40, params.holder_pairs // 4),
                    identity_samples=max(100, params.identity_samples // 4),
                    estimate_holder=False,
                    ineq_samples=max(60, params.ineq_samples // 8),
                )
                sub_report = decompose(F, sub_params, _level=_level + 1)
                cd.sub_report = sub_report
                max_depth = max(max_depth, 1 + sub_report.recursion_depth)
                for sub_g in sub_report.roots:
                    add_member(("rem", cell.color, sub_g.label), cell.nu, _LiftedPiece(minimizer.frame, sub_g))
                if sub_report.empty:
                    report.warnings.append(
                        f"cell {cell.nu}: remainder profile entirely below the floor; dropped"
                    )
            cd.identity_error = _case_ii_identity_error(g, cd, params.identity_samples) / max(a, 1e-300)
            identity_worst = max(identity_worst, cd.identity_error)
        report.cells.append(cd)

    report.roots = [groups[k] for k in sorted(groups)]
    report.recursion_depth = max_depth
    report.identity_error = identity_worst

    # residual statistics on the truncated probe grid
    live = probe[~excluded]
    if live.size:
        recon = report.sum_of_squares(live)
        res = np.abs(f.values(live) - recon)
        report.residual_sup = float(np.max(res))
        report.residual_mean = float(np.mean(res))
        report.residual_points = int(len(live))
    else:
        report.warnings.append("verification grid entirely inside the floor region")
        report.residual_points = 0

    if params.estimate_holder and report.roots:
        exponent = deltas[-1]
        for grp in report.roots:
            report.holder[grp.label] = root_holder_estimate(
                grp, exponent, samples=params.holder_pairs
            )
    return report


def root_holder_estimate(
    group: RootGroup, exponent: float, samples: int = 150
) -> HolderEstimate:
    """Order-2 Hölder seminorm estimate of a grouped root, sampled on its support.

    Pair anchors cycle deterministically through the member cells with a
    dyadic separation ladder tied to each cell's radius, so quadrupling the
    pair count refines (never reshuffles) the family.  Derivatives of the
    composite root use the finite-difference backend.
    """
    from .geometry import ball_points as _bp

    partition = group.partition
    n = partition.dim
    # visit cells in decreasing order of their second-derivative scale
    # |w(center)| / radius^2 (bump curvature times the local root size), so a
    # coarse pair budget already probes the extremal cells
    def cell_scale(item):
        nu, piece = item
        cell = partition.cells[nu]
        w = abs(float(piece.weights(np.asarray(cell.center)[None, :])[0]))
        return -w / cell.radius**2

    ordered = sorted(group.members, key=cell_scale)
    cells = [partition.cells[nu] for nu, _ in ordered]
    gh = FunctionHandle.from_callable(
        group.eval_many, arity=n, vectorized=True, label=group.label,
        domain=partition.region or Ball(center=(0.0,) * n, radius=1.0),
    )
    offsets = _bp(Ball(center=(0.0,) * n, radius=1.0), 16)
    dirs = sphere_points(16, n) if n > 1 else np.array([[1.0], [-1.0]] * 8)

    # fixed per-cell probe: radially aligned pairs anchored on the bump
    # transition ring (where the quotients of these roots concentrate), at a
    # dyadic ladder of separations.  Refinement first finishes a cell's probe,
    # then moves to the next cell in the worst-first order, so a coarse budget
    # already sees the extremal quotients.
    ring_fracs = (0.45, 0.6, 0.75, 0.9)
    sep_fracs = (0.25, 0.125, 0.0625, 0.03125)
    ring_dirs = sphere_points(8, n) if n > 1 else np.array([[1.0], [-1.0]])
    probe = [
        (frac, d, sep)
        for d in ring_dirs
        for frac in ring_fracs
        for sep in sep_fracs
    ]
    ys, zs, seps = [], [], []
    m = len(cells)
    probe_len = len(probe)
    for k in range(samples):
        cell_idx = (k // probe_len) % m
        lap = k // (probe_len * m)
        cell = cells[cell_idx]
        frac, d, sep_frac = probe[k % probe_len]
        if lap > 0:
            # extra laps roam the cell with low-discrepancy anchors
            y = np.asarray(cell.center) + 0.9 * cell.radius * offsets[lap % len(offsets)]
        else:
            y = np.asarray(cell.center) + frac * cell.radius * d
        sep = sep_frac * cell.radius
        z = y + sep * d
        ys.append(y)
        zs.append(z)
        seps.append(sep)
    ys, zs, seps = np.array(ys), np.array(zs), np.array(seps)

    sup_pts = np.concatenate([ys, zs])
    sup_norms = []
    for ell in range(3):
        sup_norms.append(float(np.max(gh.max_entry_values(sup_pts, ell))))

    best, worst_pair = 0.0, None
    for alpha in multiindices(n, 2):
        dy = gh.derivative_values(ys, alpha)
        dz = gh.derivative_values(zs, alpha)
        quot = np.abs(dy - dz) / seps**exponent
        i = int(np.argmax(quot))
        if quot[i] > best:
            best = float(quot[i])
            worst_pair = (tuple(ys[i]), tuple(zs[i]))
    return HolderEstimate(
        order=2,
        exponent=exponent,
        sup_norms=sup_norms,
        seminorm=best,
        pair_count=samples,
        min_separation=float(np.min(seps)),
        worst_pair=worst_pair,
    )


def verify_decomposition(f: FunctionHandle, report: DecompositionReport, grid) -> dict:
    """Residual statistics of |f - sum g_l^2| over grid points with
    rho >= floor, plus Hölder estimates of each root at order 2 and the
    last recursion exponent."""
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    g = f.rescaled(report.value_scale) if report.value_scale != 1.0 else f
    cdp = ControlDistanceParams(delta=report.params.delta, variant="full")
    rho = control_distance_values(g, grid, cdp)
    live = grid[rho >= report.params.floor]
    out = {
        "op": "verify_decomposition",
        "grid_points": int(len(grid)),
        "evaluated_points": int(len(live)),
        "excluded_points": int(len(grid) - len(live)),
    }
    if not len(live):
        out["empty"] = True
        out["residual_sup"] = math.nan
        out["residual_mean"] = math.nan
        return out
    res = np.abs(f.values(live) - report.sum_of_squares(live))
    out["empty"] = False
    out["residual_sup"] = float(np.max(res))
    out["residual_mean"] = float(np.mean(res))
    out["holder"] = {k: v.as_dict() for k, v in report.holder.items()}
    return out
