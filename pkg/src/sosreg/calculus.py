"""Numerical differential calculus on function handles.

FunctionHandle wraps a scalar function of n variables with derivative access
by multi-index, backed either by exact symbolic derivatives of an expression
tree or by nested central differences with a fixed step schedule.  On top of
it sit moduli of continuity, Hölder seminorm estimation, flatness tests, the
positive directional-Hessian part, and checkers for the pointwise
odd-by-even derivative controls and the Taylor-difference interpolation
bound used by the decomposition machinery.

All operations are pure; reported maxima use deterministic reduction order
with ties resolved by the lexicographically smallest sample point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DerivativeError, DomainError, NonnegativityError
from .exprlang import Expr, FunctionDef, differentiate, evaluate, has_conditionals
from .geometry import Ball, ball_points, sphere_points

__all__ = [
    "FunctionHandle",
    "Modulus",
    "HolderEstimate",
    "modulus_eval",
    "holder_seminorm",
    "directional_hessian_plus",
    "verify_odd_even_control",
    "verify_interpolation_bound",
    "is_flat",
    "multiindices",
    "tensor_contract",
]

_EPS = float(np.finfo(float).eps)

# 4th-order-accurate central stencils for pure derivatives of order 1..4
_STENCILS = {
    1: ((-2, -1, 1, 2), (1.0 / 12, -8.0 / 12, 8.0 / 12, -1.0 / 12)),
    2: ((-2, -1, 0, 1, 2), (-1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12, -1.0 / 12)),
    3: ((-3, -2, -1, 1, 2, 3), (1.0 / 8, -1.0, 13.0 / 8, -13.0 / 8, 1.0, -1.0 / 8)),
    4: ((-3, -2, -1, 0, 1, 2, 3), (-1.0 / 6, 2.0, -13.0 / 2, 28.0 / 3, -13.0 / 2, 2.0, -1.0 / 6)),
}


def fd_step(order: int, scale: float = 1.0) -> float:
    """Step schedule for order-p central stencils: h = max(1e-3, eps^(1/3)*scale) * 2^(p-1)."""
    return max(1e-3, _EPS ** (1.0 / 3.0) * scale) * 2.0 ** (order - 1)


def multiindices(n: int, order: int) -> list:
    """All multi-indices alpha in Z_+^n with |alpha| = order, lexicographic."""
    if n == 1:
        return [(order,)]
    out = []
    for head in range(order, -1, -1):
        for tail in multiindices(n - 1, order - head):
            out.append((head,) + tail)
    return out


def tensor_contract(tensor: np.ndarray, v: np.ndarray, times: int) -> float:
    """Contract the last `times` axes of a symmetric derivative tensor with v."""
    out = tensor
    for _ in range(times):
        out = np.tensordot(out, v, axes=([-1], [0]))
    return float(out)


class FunctionHandle:
    """Evaluable scalar function on a ball with derivative access by multi-index.

    Construct via :meth:`from_def`, :meth:`from_expr` or :meth:`from_callable`.
    Handles are immutable and safe to share across threads.
    """

    def __init__(
        self,
        arity: int,
        eval_many,
        derivative_many_factory,
        domain: Ball,
        flat: bool | None = None,
        log_eval_many=None,
        label: str = "f",
        exact_derivatives: bool = True,
    ):
        self.arity = arity
        self._eval_many = eval_many
        self._derivative_factory = derivative_many_factory
        self._derivative_cache: dict = {}
        self.domain = domain
        self.flat = flat
        self._log_eval_many = log_eval_many
        self.label = label
        self.exact_derivatives = exact_derivatives

    # -- constructors -------------------------------------------------------

    @staticmethod
    def from_expr(
        body: Expr,
        variables: tuple,
        domain: Ball | None = None,
        flat: bool | None = None,
        label: str = "f",
    ) -> "FunctionHandle":
        variables = tuple(variables)
        n = len(variables)
        domain = domain or Ball(center=(0.0,) * n, radius=1.0)
        expr_cache: dict = {(0,) * n: body}

        def env_of(X):
            X = np.asarray(X, dtype=float)
            return {v: X[:, i] for i, v in enumerate(variables)}

        def eval_many(X):
            vals = np.asarray(evaluate(body, env_of(X)), dtype=float)
            return np.broadcast_to(vals, (np.asarray(X).shape[0],)).copy()

        def derivative_factory(alpha):
            alpha = tuple(alpha)
            if alpha not in expr_cache:
                # build by extending the longest cached prefix one axis at a time
                cur = (0,) * n
                expr = body
                for known in sorted(expr_cache, key=lambda a: -sum(a)):
                    if all(k <= a for k, a in zip(known, alpha)):
                        cur, expr = known, expr_cache[known]
                        break
                for axis in range(n):
                    need = alpha[axis] - cur[axis]
                    if need > 0:
                        expr = differentiate(expr, variables[axis], need)
                        cur = tuple(c + (need if i == axis else 0) for i, c in enumerate(cur))
                        expr_cache[cur] = expr
                expr_cache[alpha] = expr
            expr = expr_cache[alpha]

            def d_many(X):
                vals = evaluate(expr, env_of(X))
                return np.broadcast_to(np.asarray(vals, dtype=float), (np.asarray(X).shape[0],)).copy()

            return d_many

        return FunctionHandle(
            arity=n,
            eval_many=eval_many,
            derivative_many_factory=derivative_factory,
            domain=domain,
            flat=flat,
            label=label,
            exact_derivatives=not has_conditionals(body),
        )

    @staticmethod
    def from_def(fdef: FunctionDef, flat: bool | None = None) -> "FunctionHandle":
        return FunctionHandle.from_expr(
            fdef.body, fdef.variables, domain=fdef.domain, flat=flat, label=fdef.name
        )

    @staticmethod
    def from_callable(
        fn,
        arity: int,
        domain: Ball | None = None,
        scale: float = 1.0,
        vectorized: bool = False,
        flat: bool | None = None,
        log_fn=None,
        label: str = "f",
    ) -> "FunctionHandle":
        """Wrap a plain callable; derivatives use nested central differences.

        fn takes a 1-D point array (or an (N, n) array when vectorized=True).
        Per-axis derivative orders up to 4 are supported.
        """
        domain = domain or Ball(center=(0.0,) * arity, radius=1.0)

        def eval_many(X):
            X = np.asarray(X, dtype=float)
            if vectorized:
                return np.asarray(fn(X), dtype=float)
            return np.array([float(fn(x)) for x in X])

        def derivative_factory(alpha):
            alpha = tuple(alpha)
            if any(a > 4 for a in alpha):
                raise DerivativeError(
                    f"finite-difference backend supports per-axis order <= 4, got {alpha}"
                )
            offsets = [np.zeros(arity)]
            weights = [1.0]
            for axis, p in enumerate(alpha):
                if p == 0:
                    continue
                offs, coefs = _STENCILS[p]
                h = fd_step(p, scale)
                new_offsets, new_weights = [], []
                for base, wt in zip(offsets, weights):
                    for o, cf in zip(offs, coefs):
                        shifted = base.copy()
                        shifted[axis] += o * h
                        new_offsets.append(shifted)
                        new_weights.append(wt * cf / h**p)
                offsets, weights = new_offsets, new_weights

            obs = np.array(offsets)
            wts = np.array(weights)

            def d_many(X):
                X = np.asarray(X, dtype=float)
                pts = (X[:, None, :] + obs[None, :, :]).reshape(-1, arity)
                vals = eval_many(pts).reshape(X.shape[0], -1)
                return vals @ wts

            return d_many

        log_eval_many = None
        if log_fn is not None:

            def log_eval_many(X):
                X = np.asarray(X, dtype=float)
                if vectorized:
                    return np.asarray(log_fn(X), dtype=float)
                return np.array([float(log_fn(x)) for x in X])

        return FunctionHandle(
            arity=arity,
            eval_many=eval_many,
            derivative_many_factory=derivative_factory,
            domain=domain,
            flat=flat,
            log_eval_many=log_eval_many,
            label=label,
            exact_derivatives=False,
        )

    # -- evaluation ---------------------------------------------------------

    def values(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1) if self.arity > 1 else X.reshape(-1, 1)
        return self._eval_many(X)

    def value(self, x) -> float:
        return float(self.values(np.atleast_2d(np.asarray(x, dtype=float)))[0])

    @property
    def has_log_eval(self) -> bool:
        return self._log_eval_many is not None

    def log_values(self, X) -> np.ndarray:
        """log f on the given points; -inf where f vanishes."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self._log_eval_many is not None:
            return self._log_eval_many(X)
        with np.errstate(divide="ignore"):
            return np.log(self.values(X))

    def derivative_values(self, X, alpha) -> np.ndarray:
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != self.arity:
            raise DerivativeError(f"multi-index {alpha} does not match arity {self.arity}")
        if sum(alpha) == 0:
            return self.values(X)
        if alpha not in self._derivative_cache:
            self._derivative_cache[alpha] = self._derivative_factory(alpha)
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self._derivative_cache[alpha](X)

    def derivative(self, x, alpha) -> float:
        return float(self.derivative_values(np.atleast_2d(np.asarray(x, dtype=float)), alpha)[0])

    def gradient_values(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        cols = []
        for i in range(self.arity):
            alpha = tuple(1 if j == i else 0 for j in range(self.arity))
            cols.append(self.derivative_values(X, alpha))
        return np.stack(cols, axis=1)

    def gradient(self, x) -> np.ndarray:
        return self.gradient_values(np.atleast_2d(np.asarray(x, dtype=float)))[0]

    def hessian_values(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n = self.arity
        H = np.empty((X.shape[0], n, n))
        for i in range(n):
            for j in range(i, n):
                alpha = [0] * n
                alpha[i] += 1
                alpha[j] += 1
                vals = self.derivative_values(X, tuple(alpha))
                H[:, i, j] = vals
                H[:, j, i] = vals
        return H

    def hessian(self, x) -> np.ndarray:
        return self.hessian_values(np.atleast_2d(np.asarray(x, dtype=float)))[0]

    def tensor(self, x, order: int) -> np.ndarray:
        """Full symmetric derivative tensor of the given order at one point."""
        n = self.arity
        T = np.empty((n,) * order)
        x2 = np.atleast_2d(np.asarray(x, dtype=float))
        cache = {}
        for idx in np.ndindex(*T.shape):
            counts = [0] * n
            for i in idx:
                counts[i] += 1
            counts = tuple(counts)
            if counts not in cache:
                cache[counts] = float(self.derivative_values(x2, counts)[0])
            T[idx] = cache[counts]
        return T

    def max_entry_values(self, X, order: int) -> np.ndarray:
        """Max absolute derivative-tensor entry of the given order, pointwise."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.zeros(X.shape[0])
        for alpha in multiindices(self.arity, order):
            out = np.maximum(out, np.abs(self.derivative_values(X, alpha)))
        return out

    def max_entry(self, x, order: int) -> float:
        return float(self.max_entry_values(np.atleast_2d(np.asarray(x, dtype=float)), order)[0])

    def rescaled(self, value_scale: float, label: str | None = None) -> "FunctionHandle":
        """Handle for value_scale * f (derivatives scale linearly)."""
        a = float(value_scale)
        if a <= 0:
            raise ValueError("value_scale must be positive")

        def eval_many(X):
            return a * self._eval_many(np.atleast_2d(np.asarray(X, dtype=float)))

        def derivative_factory(alpha):
            def d_many(X):
                return a * self.derivative_values(X, alpha)

            return d_many

        log_many = None
        if self._log_eval_many is not None:

            def log_many(X):
                return math.log(a) + self._log_eval_many(X)

        return FunctionHandle(
            arity=self.arity,
            eval_many=eval_many,
            derivative_many_factory=derivative_factory,
            domain=self.domain,
            flat=self.flat,
            log_eval_many=log_many,
            label=label or f"{a:g}*{self.label}",
            exact_derivatives=self.exact_derivatives,
        )


# ---------------------------------------------------------------------------
# Moduli of continuity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Modulus:
    """Modulus of continuity on [0,1] from the one-parameter scale, or a table.

    kind s = 1 gives t*(1 + ln(1/t)); 0 < s < 1 gives t^s; s = 0 gives
    1/(1 + ln(1/t)).  The s = 1 and s = 0 members are dual: their product is
    exactly t.  A custom table is piecewise log-linear between its nodes.
    """

    s: float | None = None
    table: tuple | None = None

    def __post_init__(self):
        if (self.s is None) == (self.table is None):
            raise ValueError("specify exactly one of s or table")
        if self.s is not None and not 0.0 <= self.s <= 1.0:
            raise ValueError(f"modulus kind s must lie in [0,1], got {self.s}")
        if self.table is not None:
            ts = [p[0] for p in self.table]
            ws = [p[1] for p in self.table]
            if ts != sorted(ts) or ws != sorted(ws):
                raise ValueError("table must be nondecreasing in t and omega")
            if not math.isclose(ts[-1], 1.0) or not math.isclose(ws[-1], 1.0):
                raise ValueError("table must reach omega(1) = 1")

    @staticmethod
    def omega(s: float) -> "Modulus":
        return Modulus(s=float(s))

    @staticmethod
    def from_table(points) -> "Modulus":
        return Modulus(table=tuple((float(t), float(w)) for t, w in points))

    @property
    def name(self) -> str:
        return f"omega_{self.s:g}" if self.s is not None else "omega_table"

    def eval(self, t: float) -> float:
        if not 0.0 <= t <= 1.0:
            raise DomainError(f"modulus argument must lie in [0,1], got {t}")
        if t == 0.0:
            return 0.0
        if self.s is None:
            return self._table_eval(t)
        if self.s == 1.0:
            return t * (1.0 + math.log(1.0 / t))
        if self.s == 0.0:
            return 1.0 / (1.0 + math.log(1.0 / t))
        return t**self.s

    def log_eval(self, log_t: float) -> float:
        """log omega(t) from log t; exact in log space for the one-parameter scale and
        log-linear for tables (including their continuation below the first
        node, so arguments far beyond double-precision range still work)."""
        if log_t > 0.0:
            raise DomainError(f"modulus argument must lie in [0,1], got exp({log_t})")
        if log_t == -math.inf:
            return -math.inf
        if self.s is None:
            log_ts = np.log([p[0] for p in self.table])
            log_ws = np.log([p[1] for p in self.table])
            if log_t <= log_ts[0]:
                if len(log_ts) >= 2:
                    slope = (log_ws[1] - log_ws[0]) / (log_ts[1] - log_ts[0])
                    return float(log_ws[0] + slope * (log_t - log_ts[0]))
                return float(log_ws[0])
            return float(np.interp(log_t, log_ts, log_ws))
        if self.s == 1.0:
            return log_t + math.log1p(-log_t)
        if self.s == 0.0:
            return -math.log1p(-log_t)
        return self.s * log_t

    def _table_eval(self, t: float) -> float:
        ts = np.array([p[0] for p in self.table])
        ws = np.array([p[1] for p in self.table])
        if t <= ts[0]:
            # log-linear continuation below the first node
            if len(ts) >= 2 and ts[0] > 0:
                slope = (math.log(ws[1]) - math.log(ws[0])) / (math.log(ts[1]) - math.log(ts[0]))
                return float(ws[0] * (t / ts[0]) ** slope)
            return float(ws[0])
        return float(np.exp(np.interp(math.log(t), np.log(ts), np.log(ws))))


def modulus_eval(m: Modulus, t: float) -> float:
    """Evaluate a modulus of continuity at t in [0,1]."""
    return m.eval(float(t))


# ---------------------------------------------------------------------------
# Hölder seminorm estimation
# ---------------------------------------------------------------------------


@dataclass
class HolderEstimate:
    order: int
    exponent: float
    sup_norms: list
    seminorm: float
    pair_count: int
    min_separation: float
    worst_pair: tuple | None = None

    def as_dict(self) -> dict:
        return {
            "order": self.order,
            "exponent": self.exponent,
            "sup_norms": [float(v) for v in self.sup_norms],
            "seminorm": float(self.seminorm),
            "pair_count": self.pair_count,
            "min_separation": float(self.min_separation),
            "worst_pair": None
            if self.worst_pair is None
            else [list(map(float, p)) for p in self.worst_pair],
        }


def _pair_set(region: Ball, samples: int, h_min: float) -> tuple:
    """Deterministic nested pair family (y_i, z_i) with |y - z| >= h_min.

    Pairs combine a fixed set of low-discrepancy anchors with direction and
    dyadic-radius ladders; the ladder deepens as `samples` grows, so doubling
    the count extends rather than reshuffles the family.
    """
    n = region.dim
    anchors = ball_points(region, 48)
    dirs = sphere_points(32, n) if n > 1 else np.array([[1.0], [-1.0]] * 16)
    radii_levels = 12
    ys, zs = [], []
    k = 0
    level = 0
    while len(ys) < samples:
        i = k % len(anchors)
        y = anchors[i]
        d = dirs[(k * 7 + level) % len(dirs)]
        frac = 2.0 ** (-(level % radii_levels))
        r = max(h_min, frac * region.radius)
        z = y + r * d
        # reflect back inside the region if the offset exits it
        if not region.contains(z):
            z = y - r * d
        if region.contains(z) and np.linalg.norm(z - y) >= h_min * (1 - 1e-12):
            ys.append(y)
            zs.append(z)
        k += 1
        if k % len(anchors) == 0:
            level += 1
        if k > 100 * samples + 1000:
            break
    return np.array(ys), np.array(zs)


def holder_seminorm(
    f: FunctionHandle,
    order: int,
    exponent: float,
    region: Ball,
    samples: int = 400,
    h_min: float | None = None,
) -> HolderEstimate:
    """Sampled Hölder seminorm of the order-`order` derivatives on the region.

    Returns the max over pair samples (y, z), |y-z| >= h_min, of
    max_{|alpha|=order} |D^a f(y) - D^a f(z)| / |y-z|^exponent, together with
    sup norms of all lower-order derivatives.  The true seminorm is a limsup;
    callers should check stability under sample refinement.
    """
    if not 0.0 < exponent <= 1.0:
        raise DomainError(f"Hölder exponent must lie in (0,1], got {exponent}")
    if samples < 2:
        raise DomainError("need at least 2 pair samples")
    if region.dim != f.arity:
        raise DomainError("region dimension does not match function arity")
    if h_min is None:
        h_min = 10.0 * fd_step(order) if not f.exact_derivatives else 1e-7

    sup_pts = ball_points(region, max(64, samples))
    sup_norms = []
    for ell in range(order + 1):
        vals = f.max_entry_values(sup_pts, ell)
        if not np.all(np.isfinite(vals)):
            raise DerivativeError(f"derivative of order {ell} evaluated non-finite on region")
        sup_norms.append(float(np.max(vals)))

    ys, zs = _pair_set(region, samples, h_min)
    sep = np.linalg.norm(ys - zs, axis=1)
    best = 0.0
    worst = None
    for alpha in multiindices(f.arity, order):
        dy = f.derivative_values(ys, alpha)
        dz = f.derivative_values(zs, alpha)
        quot = np.abs(dy - dz) / sep**exponent
        i = int(np.argmax(quot))
        if quot[i] > best:
            best = float(quot[i])
            worst = (tuple(ys[i]), tuple(zs[i]))
    return HolderEstimate(
        order=order,
        exponent=exponent,
        sup_norms=sup_norms,
        seminorm=best,
        pair_count=len(ys),
        min_separation=float(np.min(sep)),
        worst_pair=worst,
    )


# ---------------------------------------------------------------------------
# Directional Hessian positive part
# ---------------------------------------------------------------------------


def directional_hessian_plus(f: FunctionHandle, x) -> float:
    """Positive part of the largest Hessian eigenvalue at x.

    Equals the supremum over unit directions of the positive part of the
    second directional derivative.
    """
    H = f.hessian(x)
    if not np.all(np.isfinite(H)):
        raise DerivativeError(f"Hessian evaluated non-finite at {x}")
    return max(0.0, float(np.linalg.eigvalsh(H)[-1]))


def directional_hessian_plus_values(f: FunctionHandle, X) -> np.ndarray:
    H = f.hessian_values(X)
    if not np.all(np.isfinite(H)):
        raise DerivativeError("Hessian evaluated non-finite on batch")
    eig = np.linalg.eigvalsh(H)[:, -1]
    return np.maximum(eig, 0.0)


# ---------------------------------------------------------------------------
# Odd-by-even derivative control
# ---------------------------------------------------------------------------


@dataclass
class LineInequalityReport:
    """Worst ratios for the coordinate-line derivative controls.

    Lines 1..3 are |f'| <= (8/3) f^(3/4) + (8/3) f^(1/2) |f''|^(1/2),
    |f'''| <= 8 f^(1/4) + 8 |f''|^(1/2), and -f'' <= (5/3) f^(1/2); the two
    `plus` variants use the positive part of f'' with constants 8 and 24.
    The n-dimensional gradient forms are reported with empirical constants.
    """

    rescale: float
    worst_ratios: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)
    gradient_constants: dict = field(default_factory=dict)
    samples: int = 0

    @property
    def passed(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {
            "op": "odd_even_control",
            "rescale": float(self.rescale),
            "worst_ratios": {k: float(v) for k, v in self.worst_ratios.items()},
            "violations": self.violations,
            "gradient_constants": {k: float(v) for k, v in self.gradient_constants.items()},
            "samples": self.samples,
            "passed": self.passed,
        }


def verify_odd_even_control(
    f: FunctionHandle, region: Ball, samples: int = 2000
) -> LineInequalityReport:
    """Check the odd-by-even derivative controls for a nonnegative function.

    The function is divided by M = 1.05 * max(1, sup f, sup |d^4 f| along
    coordinate lines) so the checked function g = f / M satisfies g <= 1 and
    |g''''| <= 1 on the sampled region, as the controls require; M is
    estimated on an enlarged sample set and reported.
    """
    n = f.arity
    pts = ball_points(region, samples)
    wide = ball_points(Ball(center=region.center, radius=min(1.5 * region.radius, f.domain.radius)), 2 * samples)

    fvals_raw = f.values(pts)
    neg = fvals_raw < -1e-12 * (1.0 + np.abs(fvals_raw))
    if np.any(neg):
        i = int(np.argmin(fvals_raw))
        raise NonnegativityError(f"f({pts[i]}) = {fvals_raw[i]} < 0 on the sampled region")

    line_d = {}
    for p in (1, 2, 3, 4):
        cols = []
        for axis in range(n):
            alpha = tuple(p if j == axis else 0 for j in range(n))
            cols.append(f.derivative_values(pts, alpha))
        line_d[p] = np.stack(cols, axis=1)

    sup_f4 = 0.0
    sup_f = float(np.max(np.abs(f.values(wide))))
    for axis in range(n):
        alpha = tuple(4 if j == axis else 0 for j in range(n))
        sup_f4 = max(sup_f4, float(np.max(np.abs(f.derivative_values(wide, alpha)))))
    M = 1.05 * max(1.0, sup_f, sup_f4)

    g = np.maximum(fvals_raw / M, 0.0)
    report = LineInequalityReport(rescale=M, samples=len(pts))

    def record(name, lhs, rhs):
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(lhs <= 0, 0.0, lhs / np.where(rhs > 0, rhs, np.inf))
        i = int(np.argmax(ratio))
        report.worst_ratios[name] = float(ratio[i])
        if ratio[i] > 1.0 + 1e-9:
            report.violations.append({"line": name, "point": [float(v) for v in pts[i]], "ratio": float(ratio[i])})

    for axis in range(n):
        g1 = line_d[1][:, axis] / M
        g2 = line_d[2][:, axis] / M
        g3 = line_d[3][:, axis] / M
        g2p = np.maximum(g2, 0.0)
        tag = f"axis{axis}"
        record(f"{tag}.first_odd", np.abs(g1), (8.0 / 3.0) * g ** 0.75 + (8.0 / 3.0) * np.sqrt(g) * np.sqrt(np.abs(g2)))
        record(f"{tag}.third_odd", np.abs(g3), 8.0 * g ** 0.25 + 8.0 * np.sqrt(np.abs(g2)))
        record(f"{tag}.second_lower", -g2, (5.0 / 3.0) * np.sqrt(g))
        record(f"{tag}.first_odd_plus", np.abs(g1), 8.0 * g ** 0.75 + (8.0 / 3.0) * np.sqrt(g) * np.sqrt(g2p))
        record(f"{tag}.third_odd_plus", np.abs(g3), 24.0 * g ** 0.25 + 8.0 * np.sqrt(g2p))

    # n-dimensional forms: report empirical constants, no pass/fail
    grad = np.linalg.norm(f.gradient_values(pts), axis=1) / M
    hess_max = f.max_entry_values(pts, 2) / M
    third_max = f.max_entry_values(pts, 3) / M
    hplus = directional_hessian_plus_values(f, pts) / M
    with np.errstate(invalid="ignore", divide="ignore"):
        c1 = grad / (g ** 0.75 + np.sqrt(g) * np.sqrt(hess_max))
        c3 = third_max / (g ** 0.25 + np.sqrt(hess_max))
        c2 = hess_max / (hplus + np.sqrt(g))
    for name, arr in (("gradient", c1), ("third", c3), ("hessian_by_plus_part", c2)):
        arr = arr[np.isfinite(arr)]
        report.gradient_constants[name] = float(np.max(arr)) if arr.size else 0.0
    return report


# ---------------------------------------------------------------------------
# Interpolation bound for intermediate derivatives
# ---------------------------------------------------------------------------


@dataclass
class InterpolationReport:
    m: int
    k: int
    diameter: float
    max_grad_m: float
    taylor_difference_max: float
    max_grad_k: float
    constant: float
    samples: int
    pairs: int

    def as_dict(self) -> dict:
        return {
            "op": "interpolation_bound",
            "m": self.m,
            "k": self.k,
            "diameter": float(self.diameter),
            "max_grad_m": float(self.max_grad_m),
            "taylor_difference_max": float(self.taylor_difference_max),
            "max_grad_k": float(self.max_grad_k),
            "constant": float(self.constant),
            "samples": self.samples,
            "pairs": self.pairs,
        }


def verify_interpolation_bound(
    f: FunctionHandle, B: Ball, m: int, k: int, samples: int = 200, pairs: int = 1000
) -> InterpolationReport:
    """Empirical constant in the two-term control of |grad^m f| on a ball.

    Computes max_z |grad^m f(z)|, the maximum over sampled pairs (t1, t2) of
    the order-(m-1) Taylor difference
    |f(t1) - sum_{j<m} [(t1-t2).grad]^j f(t2) / j!|,
    and max |grad^k f|; reports the smallest constant C with
    max |grad^m f| <= C * (T / ell^m + T^(1-m/k) * Mk^(m/k)), ell = diameter.
    """
    if m < 1 or k < m:
        raise DomainError(f"need k >= m >= 1, got m={m}, k={k}")
    if B.radius <= 0:
        raise DomainError("degenerate ball")
    pts = ball_points(B, max(samples, 16))
    max_m = float(np.max(f.max_entry_values(pts, m)))
    max_k = float(np.max(f.max_entry_values(pts, k)))

    t1s, t2s = _pair_set(B, pairs, h_min=0.0)
    taylor_max = 0.0
    tensors: dict = {}
    for t1, t2 in zip(t1s, t2s):
        v = t1 - t2
        key = tuple(np.round(t2, 12))
        if key not in tensors:
            tensors[key] = [f.tensor(t2, j) for j in range(m)]
        acc = float(f.value(t1))
        for j in range(m):
            acc -= tensor_contract(tensors[key][j], v, j) / math.factorial(j)
        taylor_max = max(taylor_max, abs(acc))

    ell = 2.0 * B.radius
    denom = taylor_max / ell**m
    if max_k > 0 and taylor_max > 0:
        denom += taylor_max ** (1.0 - m / k) * max_k ** (m / k)
    constant = 0.0 if max_m == 0 else (math.inf if denom == 0 else max_m / denom)
    return InterpolationReport(
        m=m,
        k=k,
        diameter=ell,
        max_grad_m=max_m,
        taylor_difference_max=taylor_max,
        max_grad_k=max_k,
        constant=constant,
        samples=len(pts),
        pairs=len(t1s),
    )


# ---------------------------------------------------------------------------
# Flatness
# ---------------------------------------------------------------------------


@dataclass
class FlatnessReport:
    flat: bool
    n_max: int
    failures: list
    derivative_flat: bool | None = None

    def as_dict(self) -> dict:
        return {
            "op": "is_flat",
            "flat": self.flat,
            "n_max": self.n_max,
            "failures": self.failures,
            "derivative_flat": self.derivative_flat,
        }


_FLAT_FLOOR = 1e-14


def is_flat(
    f: FunctionHandle,
    n_max: int = 8,
    t_grid=None,
    check_derivatives: bool = False,
    directions: int = 4,
) -> FlatnessReport:
    """Monotone-decay test for vanishing to infinite order at the origin.

    For each N <= n_max checks that t -> t^(-N) * max_dirs |f(t*dir)| is
    nonincreasing along the descending grid within the 1e-14 noise floor.
    Optionally repeats for all first partial derivatives.
    """
    if t_grid is None:
        t_grid = [2.0 ** (-j) for j in range(1, 11)]
    t_grid = [float(t) for t in t_grid]
    if any(t2 >= t1 for t1, t2 in zip(t_grid, t_grid[1:])):
        raise DomainError("t_grid must be strictly descending")
    if not f.domain.contains(np.zeros(f.arity), slack=1e-12):
        raise DomainError("origin must be interior to the domain")

    if f.arity == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        dirs = sphere_points(directions, f.arity)

    def profile(value_fn):
        return np.array([np.max(np.abs(value_fn(t * dirs))) for t in t_grid])

    def check(vals):
        fails = []
        for N in range(1, n_max + 1):
            seq = vals / np.array(t_grid) ** N
            for i in range(1, len(seq)):
                if seq[i] > seq[i - 1] * (1 + 1e-9) + _FLAT_FLOOR:
                    fails.append({"N": N, "t": t_grid[i], "value": float(seq[i])})
                    break
        return fails

    failures = check(profile(f.values))
    deriv_flat = None
    if check_derivatives:
        deriv_flat = True
        for axis in range(f.arity):
            alpha = tuple(1 if j == axis else 0 for j in range(f.arity))
            fails = check(profile(lambda P, a=alpha: f.derivative_values(P, a)))
            if fails:
                deriv_flat = False
                failures.extend({"derivative_axis": axis, **fl} for fl in fails)
    return FlatnessReport(
        flat=not any("derivative_axis" not in fl for fl in failures),
        n_max=n_max,
        failures=failures,
        derivative_flat=deriv_flat,
    )
