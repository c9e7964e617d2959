"""Independent oracles used by the tests.

Deliberately separate from the library's own numerics: extended-precision
composed central differences for derivative checks, brute-force pair and
grid searches for suprema, and plain quadrature.  Nothing here imports the
routines it is used to check.
"""

from __future__ import annotations

import numpy as np

from sosreg.exprlang import evaluate

_OFFS = np.array([-2, -1, 1, 2], dtype=np.longdouble)
_COEF = np.array([1, -8, 8, -1], dtype=np.longdouble) / np.longdouble(12)


def fd_partial_ld(fdef, X, alpha, h=2e-3):
    """Composed 5-point first-derivative stencils in extended precision."""
    X = np.atleast_2d(np.asarray(X))
    h = np.longdouble(h)
    stencil = [(np.zeros(X.shape[1], dtype=np.longdouble), np.longdouble(1))]
    for axis, p in enumerate(alpha):
        for _ in range(p):
            new = []
            for base, w in stencil:
                for o, cf in zip(_OFFS, _COEF):
                    b = base.copy()
                    b[axis] += o * h
                    new.append((b, w * cf / h))
            stencil = new
    P = np.array([b for b, _ in stencil])
    W = np.array([w for _, w in stencil])
    pts = (X[:, None, :].astype(np.longdouble) + P[None, :, :]).reshape(-1, X.shape[1])
    env = {v: pts[:, i] for i, v in enumerate(fdef.variables)}
    vals = np.asarray(evaluate(fdef.body, env), dtype=np.longdouble)
    vals = np.broadcast_to(vals, (pts.shape[0],))
    return vals.reshape(X.shape[0], -1) @ W


def fd_partial_richardson(fdef, X, alpha, h=2e-3):
    """Richardson-extrapolated version of fd_partial_ld (leading h^4 removed)."""
    coarse = fd_partial_ld(fdef, X, alpha, h)
    fine = fd_partial_ld(fdef, X, alpha, h / 2)
    return ((16 * fine - coarse) / np.longdouble(15)).astype(float)


def fd_callable_partial(fn, X, alpha, h=1e-3):
    """Same composed stencils for a plain vectorized callable, in float64."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    stencil = [(np.zeros(X.shape[1]), 1.0)]
    for axis, p in enumerate(alpha):
        for _ in range(p):
            new = []
            for base, w in stencil:
                for o, cf in zip(_OFFS.astype(float), _COEF.astype(float)):
                    b = base.copy()
                    b[axis] += o * h
                    new.append((b, w * cf / h))
            stencil = new
    P = np.array([b for b, _ in stencil])
    W = np.array([w for _, w in stencil])
    pts = (X[:, None, :] + P[None, :, :]).reshape(-1, X.shape[1])
    return np.asarray(fn(pts), dtype=float).reshape(X.shape[0], -1) @ W


def brute_pair_seminorm(values_fn, lo, hi, n_grid, exponent):
    """Brute-force Hölder quotient max of a scalar derivative field on a
    1-D product grid of pairs."""
    xs = np.linspace(lo, hi, n_grid)
    vals = np.asarray(values_fn(xs.reshape(-1, 1)), dtype=float)
    best = 0.0
    for i in range(n_grid):
        d = np.abs(vals - vals[i])
        sep = np.abs(xs - xs[i])
        mask = sep > 0
        best = max(best, float(np.max(d[mask] / sep[mask] ** exponent)))
    return best


def brute_direction_hessian_plus(hessian, n_dirs=1000, seed=5, polish_iters=200):
    """Max over unit directions of the positive quadratic form part.

    Random directions alone undershoot by percents in dimension four, so the
    best sampled direction is polished by shifted power iteration (still an
    eigensolver-free path)."""
    H = np.asarray(hessian, dtype=float)
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(n_dirs, H.shape[0]))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    vals = np.einsum("pi,ij,pj->p", dirs, H, dirs)
    v = dirs[int(np.argmax(vals))]
    shift = np.linalg.norm(H, ord="fro") + 1.0
    M = H + shift * np.eye(H.shape[0])
    for _ in range(polish_iters):
        v = M @ v
        v /= np.linalg.norm(v)
    return max(0.0, float(v @ H @ v))
