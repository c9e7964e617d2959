import math
from fractions import Fraction

import numpy as np
import pytest

from sosreg.calculus import FunctionHandle
from sosreg.cover import ControlDistanceParams, CoverCell, build_cover
from sosreg.errors import BoundaryRootError, ClassificationError, DomainError
from sosreg.exprlang import parse_expression
from sosreg.geometry import Ball, ball_points
from sosreg.sos import (
    DecomposeParams,
    check_differential_inequalities,
    classify_cell,
    decompose,
    delta_sequence,
    implicit_minimizer,
    implicit_second_derivative,
    reduced_profile,
    track_implicit_root,
    verify_decomposition,
)

from oracles import fd_callable_partial


def handle(src, variables=("x",), radius=4.0):
    return FunctionHandle.from_expr(
        parse_expression(src), variables, domain=Ball((0.0,) * len(variables), radius)
    )


class TestDeltaSequence:
    def test_single_level(self):
        assert delta_sequence(0.3, 0.2, 1) == [0.3]

    def test_hand_solved_step(self):
        # u = 0.25 * (0.5 / 1.5) = 1/12 and 2u/(1-u) = 2/11
        seq = delta_sequence(0.5, 0.25, 2)
        assert seq[1] == pytest.approx(2.0 / 11.0, abs=1e-15)

    def test_strictly_decreasing(self):
        seq = delta_sequence(0.45, 0.4, 6)
        assert all(a > b for a, b in zip(seq, seq[1:]))

    def test_exact_rational_recursion(self):
        # float recursion against exact fractions
        d, eta = Fraction(2, 5), Fraction(3, 10)
        exact = [d]
        for _ in range(4):
            u = eta * exact[-1] / (1 + exact[-1])
            exact.append(2 * u / (1 - u))
        seq = delta_sequence(0.4, 0.3, 5)
        for a, b in zip(seq, exact):
            assert a == pytest.approx(float(b), abs=1e-14)

    def test_crude_sandwich(self):
        # (4/5)(5 eta/3)^(n-1) delta <= delta_(n-1) <= (5/4)(2 eta)^(n-1) delta
        for delta, eta, n in [(0.4, 0.3, 5), (0.25, 0.2, 4), (0.45, 0.45, 6)]:
            seq = delta_sequence(delta, eta, n)
            lo = 0.8 * (5.0 * eta / 3.0) ** (n - 1) * delta
            hi = 1.25 * (2.0 * eta) ** (n - 1) * delta
            assert lo <= seq[-1] <= hi

    def test_ratio_sandwich_in_s_variables(self):
        delta, eta, n = 0.4, 0.3, 5
        seq = delta_sequence(delta, eta, n)
        s = [d / (2.0 + d) for d in seq]
        assert (5.0 * eta / 3.0) ** (n - 1) <= s[-1] / s[0] <= (2.0 * eta) ** (n - 1)

    def test_validation(self):
        with pytest.raises(DomainError):
            delta_sequence(0.6, 0.3, 2)
        with pytest.raises(DomainError):
            delta_sequence(0.3, 0.3, 0)


class TestDifferentialInequalities:
    def test_positive_constant_passes_with_zero(self):
        rep = check_differential_inequalities(handle("3"), 0.25, 0.3, Ball((0.0,), 1.0))
        assert rep.passed
        assert rep.quartic_constant == 0.0
        assert rep.hessian_constant == 0.0

    def test_flat_profile_passes(self, flat_exp_sq):
        rep = check_differential_inequalities(
            flat_exp_sq, 0.1, 0.25, Ball((0.525,), 0.465), samples=400
        )
        assert rep.passed

    def test_parabola_fails_hessian_bound(self):
        # f'' = 2 while f^eta -> 0 near the origin
        rep = check_differential_inequalities(handle("x^2"), 0.25, 0.5, Ball((0.0,), 1.0))
        assert not rep.passed


class TestImplicitFunctionHelpers:
    def test_tracked_root_residual(self):
        H = handle("x^3 + s*x - s^2", ("s", "x"))
        root = track_implicit_root(H, [0.5], 0.0, 1.0)
        assert abs(H.value((0.5, root))) < 1e-12

    def test_no_sign_change(self):
        H = handle("x^2 + 1 + 0*s", ("s", "x"))
        with pytest.raises(BoundaryRootError):
            track_implicit_root(H, [0.0], -1.0, 1.0)

    @pytest.mark.parametrize(
        "src,xi0,bracket",
        [
            ("x^3 + s*x - s^2", 0.5, (0.0, 1.0)),
            ("sin(x) + s^2*x - 0.5*s", 0.7, (0.0, 1.0)),
        ],
    )
    def test_second_derivative_formula_matches_fd(self, src, xi0, bracket):
        H = handle(src, ("s", "x"))
        root = track_implicit_root(H, [xi0], *bracket)
        d2 = implicit_second_derivative(H, (xi0, root))[0, 0]
        h = 1e-3
        roots = [track_implicit_root(H, [xi0 + k * h], *bracket) for k in (-2, -1, 0, 1, 2)]
        fd = (-roots[0] + 16 * roots[1] - 30 * roots[2] + 16 * roots[3] - roots[4]) / (12 * h * h)
        assert d2 == pytest.approx(fd, abs=1e-6)

    def test_explicit_quadratic_zero_set(self):
        # H = y - s^2 has implicit Hessian 2
        H = handle("x - s^2", ("s", "x"))
        root = track_implicit_root(H, [0.3], -1.0, 1.0)
        assert root == pytest.approx(0.09)
        assert implicit_second_derivative(H, (0.3, 0.09))[0, 0] == pytest.approx(2.0)


class TestClassifyCell:
    def test_constant_cell_case_one(self):
        cell = CoverCell(nu=0, center=(0.2,), radius=0.005, bump_scale=0.005)
        case, axis, rho, terms = classify_cell(handle("1"), cell, 0.25, (1 / 200.0) ** 2 / 8)
        assert case == "I"

    def test_parabola_origin_case_two_with_axis(self):
        cell = CoverCell(nu=0, center=(0.0, 0.0), radius=0.006, bump_scale=0.006)
        f = handle("x^2 + 0.25*y^2", ("x", "y"))
        case, axis, rho, terms = classify_cell(f, cell, 0.25, (1 / 200.0) ** 2 / 8)
        assert case == "II"
        # top eigendirection is the x axis
        assert abs(axis[0]) == pytest.approx(1.0)
        assert rho == pytest.approx(2.0 ** (1.0 / 2.5))

    def test_quartic_dominant_signals_classification_error(self):
        # un-normalized x^4 + tiny constant: the fourth-derivative term
        # dominates rho and the Hessian vanishes at the center
        cell = CoverCell(nu=0, center=(0.0,), radius=0.005, bump_scale=0.005)
        f = handle("x^4/12 + 0*x")
        with pytest.raises(ClassificationError):
            classify_cell(f, cell, 0.25, (1 / 200.0) ** 2 / 8)

    def test_shifted_quartic_case_one_after_normalization(self):
        # f = x^4 + 1 at a cell centered at 0 is case I once the fourth
        # derivative is normalized below the value term
        f = handle("x^4 + 1")
        delta = 0.25
        pts = np.linspace(-1, 1, 101).reshape(-1, 1)
        c4 = float(np.max(f.max_entry_values(pts, 4) / f.values(pts) ** (delta / (2 + delta))))
        g = f.rescaled(c4 ** (-(2 + delta) / 2.0))
        cell = CoverCell(nu=0, center=(0.0,), radius=0.005, bump_scale=0.005)
        case, *_ = classify_cell(g, cell, delta, (1 / 200.0) ** 2 / 8)
        assert case == "I"


class TestMinimizerAndProfile:
    def test_parabola_minimizer_at_zero(self):
        f = handle("x^2")
        cell = CoverCell(nu=0, center=(0.0,), radius=0.006, bump_scale=0.006)
        prof = implicit_minimizer(f, cell, np.array([1.0]), rho=2 ** (1 / 2.5), delta=0.25)
        assert prof.solve(np.zeros(0)) == pytest.approx(0.0, abs=1e-14)

    def test_affine_minimizer_of_shifted_quadratic(self):
        # f(xi, x) = xi^2 + (x - xi)^2 has X(xi) = xi
        f = handle("s^2 + (x - s)^2", ("s", "x"))
        cell = CoverCell(nu=0, center=(0.0, 0.0), radius=0.01, bump_scale=0.01)
        prof = implicit_minimizer(f, cell, np.array([0.0, 1.0]), rho=2 ** (1 / 2.5), delta=0.25)
        for xi in (-0.005, 0.0, 0.004):
            assert prof.solve([xi]) == pytest.approx(xi, abs=1e-12)

    def test_boundary_root_error(self):
        # strictly increasing fiber: the minimum sits on the bracket edge
        f = handle("x + 10 + 0*s", ("s", "x"))
        cell = CoverCell(nu=0, center=(0.0, 0.0), radius=0.01, bump_scale=0.01)
        prof = implicit_minimizer(f, cell, np.array([0.0, 1.0]), rho=1.0, delta=0.25)
        with pytest.raises(BoundaryRootError):
            prof.solve([0.0])

    def test_reduced_profile_parabola(self):
        # f = x^2: F = 0, H == 1, identity exact
        f = handle("x^2")
        cell = CoverCell(nu=0, center=(0.0,), radius=0.006, bump_scale=0.006)
        rho = 2 ** (1 / 2.5)
        prof = implicit_minimizer(f, cell, np.array([1.0]), rho=rho, delta=0.25)
        F, H, h_ok = reduced_profile(f, cell, prof, rho=rho, delta=0.25)
        assert F is None
        assert h_ok
        ys = np.linspace(-0.005, 0.005, 11)
        vals = H.values(np.zeros((11, 0)), ys)
        assert np.allclose(vals, 1.0, atol=1e-12)

    def test_reduced_profile_shifted_quadratic(self):
        # f(xi, x) = xi^2 + (x - xi)^2: F(xi) = xi^2, H == 1
        f = handle("s^2 + (x - s)^2", ("s", "x"))
        cell = CoverCell(nu=0, center=(0.0, 0.0), radius=0.01, bump_scale=0.01)
        rho = 2 ** (1 / 2.5)
        prof = implicit_minimizer(f, cell, np.array([0.0, 1.0]), rho=rho, delta=0.25)
        F, H, h_ok = reduced_profile(f, cell, prof, rho=rho, delta=0.25)
        xis = np.linspace(-0.007, 0.007, 9).reshape(-1, 1)
        assert np.allclose(F.values(xis), xis.ravel() ** 2, atol=1e-12)
        assert np.allclose(H.values(xis, np.linspace(-0.007, 0.007, 9)), 1.0, atol=1e-10)
        # implicit-function derivatives of F
        assert np.allclose(F.derivative_values(xis, (2,)), 2.0, atol=1e-9)


class TestDecompose:
    def test_constant_single_level(self):
        f = handle("4")
        rep = decompose(f, DecomposeParams(delta=0.25, eta=0.3, region=Ball((0.0,), 1.0),
                                           verify_points=800, estimate_holder=False))
        assert rep.case_counts["II"] == 0
        assert rep.residual_sup <= 1e-12
        assert rep.inequalities.passed

    def test_parabola_1d(self):
        f = handle("x^2")
        rep = decompose(f, DecomposeParams(delta=0.25, eta=0.3, region=Ball((0.0,), 1.0),
                                           verify_points=1200, estimate_holder=False))
        assert rep.residual_sup <= 1e-8
        assert rep.identity_error <= 1e-10
        assert rep.case_counts["II"] >= 1

    def test_isotropic_2d_with_recursion(self):
        f = handle("x^2 + y^2", ("x", "y"))
        rep = decompose(f, DecomposeParams(delta=0.25, eta=0.3, region=Ball((0.0, 0.0), 0.1),
                                           verify_points=1200, estimate_holder=False))
        assert rep.residual_sup <= 1e-6 * (1 + 0.02)
        assert rep.identity_error <= 1e-10
        assert rep.recursion_depth == 1
        assert rep.case_counts["II"] >= 1

    def test_empty_cover_below_floor(self):
        f = handle("0")
        rep = decompose(f, DecomposeParams(delta=0.25, eta=0.3, region=Ball((0.0,), 1.0),
                                           estimate_holder=False))
        assert rep.empty
        assert rep.roots == []

    def test_sum_of_squares_equals_f_pointwise(self):
        f = handle("x^2")
        rep = decompose(f, DecomposeParams(delta=0.25, eta=0.3, region=Ball((0.0,), 1.0),
                                           verify_points=600, estimate_holder=False))
        pts = np.linspace(-0.9, 0.9, 101).reshape(-1, 1)
        recon = rep.sum_of_squares(pts)
        assert np.max(np.abs(recon - pts.ravel() ** 2)) < 1e-10

    def test_group_supports_disjoint_within_group(self):
        f = handle("x^2")
        rep = decompose(f, DecomposeParams(delta=0.25, eta=0.3, region=Ball((0.0,), 1.0),
                                           verify_points=400, estimate_holder=False))
        pts = np.linspace(-0.99, 0.99, 500).reshape(-1, 1)
        pairs = rep.partition.chi_pairs(pts)
        for grp in rep.roots:
            active = np.zeros(len(pts), dtype=int)
            for nu, piece in grp.members:
                idxs, chi = pairs[nu]
                active[idxs[chi > 0]] += 1
            assert np.max(active) <= 1, grp.label

    def test_root_derivative_size_bound(self):
        # |D^a g(x)| <= C rho(x)^(2 + d - |a|) for |a| <= 2 empirically
        f = handle("x^2")
        params = DecomposeParams(delta=0.25, eta=0.3, region=Ball((0.0,), 1.0),
                                 verify_points=400, estimate_holder=False)
        rep = decompose(f, params)
        from sosreg.cover import control_distance_values

        pts = np.linspace(-0.9, 0.9, 200).reshape(-1, 1)
        rho = control_distance_values(f, pts, ControlDistanceParams(0.25))
        for grp in rep.roots[:6]:
            gh = FunctionHandle.from_callable(grp.eval_many, arity=1, vectorized=True,
                                              domain=params.region)
            for order in (0, 1, 2):
                vals = np.abs(gh.derivative_values(pts, (order,)))
                # bump derivatives contribute 1/r = 1/(s rho) per order, so the
                # cell-independent constant carries a factor s^(-order)
                bound = rho ** (2.0 + 0.25 - order) * params.s ** (-order)
                ratio = vals / bound
                assert np.max(ratio) < 10.0, (grp.label, order, float(np.max(ratio)))

    def test_strict_mode_raises(self):
        f = handle("x^2")
        with pytest.raises(Exception):
            decompose(f, DecomposeParams(delta=0.25, eta=0.45, region=Ball((0.0,), 1.0),
                                         strict_inequalities=True, estimate_holder=False))

    def test_case_two_crucial_inequality_inheritance(self):
        # [Hess F]_+ at the reduced profile is controlled by the parent's
        # positive Hessian part at matched points
        f = handle("x^2 + y^2", ("x", "y"))
        rep = decompose(f, DecomposeParams(delta=0.25, eta=0.3, region=Ball((0.0, 0.0), 0.06),
                                           verify_points=600, estimate_holder=False))
        checked = 0
        for cd in rep.cells:
            if cd.case != "II" or cd.F_handle is None:
                continue
            xis = np.linspace(-0.7, 0.7, 9).reshape(-1, 1) * cd.cell.radius
            f2 = cd.F_handle.derivative_values(xis, (2,))
            parent_plus = 2.0  # sup of the positive Hessian part of x^2+y^2
            assert np.max(np.maximum(f2, 0.0)) <= 3.0 * parent_plus
            checked += 1
        assert checked >= 1


class TestVerifyDecomposition:
    def test_grid_statistics(self):
        f = handle("x^2")
        rep = decompose(f, DecomposeParams(delta=0.25, eta=0.3, region=Ball((0.0,), 1.0),
                                           verify_points=400, estimate_holder=False))
        grid = np.linspace(-0.95, 0.95, 400).reshape(-1, 1)
        out = verify_decomposition(f, rep, grid)
        assert not out["empty"]
        assert out["residual_sup"] <= 1e-8

    def test_grid_entirely_excluded(self):
        f = handle("x^2")
        params = DecomposeParams(delta=0.25, eta=0.3, region=Ball((0.0,), 1.0),
                                 verify_points=400, estimate_holder=False)
        rep = decompose(f, params)
        # force exclusion with an impossible floor
        rep.params.floor = 1e9
        out = verify_decomposition(f, rep, np.linspace(-0.5, 0.5, 50).reshape(-1, 1))
        assert out["empty"]
