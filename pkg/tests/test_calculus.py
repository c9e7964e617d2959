import math

import numpy as np
import pytest

from sosreg.calculus import (
    FunctionHandle,
    Modulus,
    directional_hessian_plus,
    holder_seminorm,
    is_flat,
    modulus_eval,
    verify_interpolation_bound,
    verify_odd_even_control,
)
from sosreg.errors import DomainError, NonnegativityError
from sosreg.exprlang import catalog_function, parse_expression
from sosreg.geometry import Ball

from oracles import brute_direction_hessian_plus, brute_pair_seminorm


def handle(src, variables=("x",), radius=3.0):
    return FunctionHandle.from_expr(
        parse_expression(src), variables, domain=Ball((0.0,) * len(variables), radius)
    )


class TestModulus:
    def test_power_case(self):
        assert modulus_eval(Modulus.omega(0.5), 0.25) == pytest.approx(0.5)

    def test_duality_of_endpoints(self):
        m1, m0 = Modulus.omega(1.0), Modulus.omega(0.0)
        for t in (0.1, 0.37, 0.9, 1e-6):
            assert m1.eval(t) * m0.eval(t) == pytest.approx(t, abs=1e-12)

    def test_normalization(self):
        for s in (0.0, 0.3, 0.7, 1.0):
            m = Modulus.omega(s)
            assert m.eval(1.0) == 1.0
            assert m.eval(0.0) == 0.0

    def test_out_of_range(self):
        with pytest.raises(DomainError):
            Modulus.omega(0.5).eval(1.5)

    def test_log_eval_consistency(self):
        for s in (0.0, 0.5, 1.0):
            m = Modulus.omega(s)
            for t in (0.3, 0.01):
                assert m.log_eval(math.log(t)) == pytest.approx(math.log(m.eval(t)), abs=1e-12)

    def test_log_eval_reaches_tiny_arguments(self):
        # representable only in log space
        m = Modulus.omega(0.5)
        assert m.log_eval(-1e6) == pytest.approx(-5e5)

    def test_scale_ordering(self):
        # t << omega_1 << omega_s' << omega_s << omega_0 << 1 is asymptotic:
        # at t = 0.1 no pair (s, s') satisfies the full chain, so the chain is
        # checked from 1e-2 down while the ratio decrease uses the full grid
        s, s_prime = 0.45, 0.6
        for t in [10.0**-k for k in range(2, 7)]:
            vals = [t, Modulus.omega(1.0).eval(t), Modulus.omega(s_prime).eval(t),
                    Modulus.omega(s).eval(t), Modulus.omega(0.0).eval(t), 1.0]
            assert all(a < b for a, b in zip(vals, vals[1:])), t
        prev_ratio = None
        for t in [10.0**-k for k in range(1, 7)]:
            ratio = Modulus.omega(s_prime).eval(t) / Modulus.omega(s).eval(t)
            if prev_ratio is not None:
                assert ratio < prev_ratio
            prev_ratio = ratio

    def test_custom_table(self):
        m = Modulus.from_table([(0.01, 0.1), (0.1, 0.4), (1.0, 1.0)])
        assert m.eval(0.1) == pytest.approx(0.4)
        assert m.eval(0.0) == 0.0
        assert 0.1 < m.eval(0.03) < 0.4


class TestHolderSeminorm:
    def test_quadratic_has_zero_order2_seminorm(self):
        est = holder_seminorm(handle("x^2"), 2, 0.5, Ball((0.0,), 1.0), samples=100)
        assert est.seminorm <= 1e-10

    def test_cubic_exact_value(self):
        est = holder_seminorm(handle("x^3"), 2, 1.0, Ball((0.0,), 1.0), samples=300)
        assert est.seminorm == pytest.approx(6.0, abs=1e-9)
        assert est.sup_norms[2] == pytest.approx(6.0, rel=1e-6)

    def test_smoothed_power_profile_stable_under_doubling(self):
        # x^2 * (x^2 + eps)^0.25 ~ |x|^2.5 smoothly regularized
        f = handle("x^2*(x^2 + 0.0001)^0.25")
        base = holder_seminorm(f, 2, 0.5, Ball((0.0,), 1.0), samples=300)
        fine = holder_seminorm(f, 2, 0.5, Ball((0.0,), 1.0), samples=600)
        assert fine.seminorm <= base.seminorm * 1.2 + 1e-12
        assert fine.seminorm >= base.seminorm * 0.8 - 1e-12

    def test_monotone_nonincreasing_in_exponent(self):
        # profile ~ x^2 |x|^(1/2): its order-2 seminorm is finite up to
        # exponent 1/2, and on that range the sampled estimate is attained at
        # macroscopic separations, hence nonincreasing in the exponent
        f = handle("x^2*(x^2 + 0.0001)^0.25")
        region = Ball((0.0,), 1.0)
        values = [
            holder_seminorm(f, 2, d, region, samples=400).seminorm
            for d in (0.15, 0.3, 0.45)
        ]
        assert all(a >= b - 1e-9 for a, b in zip(values, values[1:]))

    def test_brute_force_oracle_agreement(self):
        # order-1 seminorm of x^3 with delta=1 equals sup |3y^2-3z^2|/|y-z| = 6
        f = handle("x^3")
        est = holder_seminorm(f, 1, 1.0, Ball((0.0,), 1.0), samples=400)
        oracle = brute_pair_seminorm(
            lambda X: 3.0 * np.asarray(X)[:, 0] ** 2, -1.0, 1.0, 201, 1.0
        )
        assert est.seminorm == pytest.approx(oracle, rel=0.05)

    def test_bad_exponent(self):
        with pytest.raises(DomainError):
            holder_seminorm(handle("x^2"), 2, 1.5, Ball((0.0,), 1.0))


class TestDirectionalHessian:
    def test_isotropic(self):
        f = handle("x^2 + y^2", ("x", "y"))
        assert directional_hessian_plus(f, [0.3, -0.4]) == pytest.approx(2.0)

    def test_saddle(self):
        f = handle("x^2 - y^2", ("x", "y"))
        assert directional_hessian_plus(f, [0.0, 0.0]) == pytest.approx(2.0)

    def test_negative_definite(self):
        f = handle("-(x^2) - y^2", ("x", "y"))
        assert directional_hessian_plus(f, [0.0, 0.0]) == 0.0

    @pytest.mark.parametrize("src,vars", [
        ("x^2 + 3*x*y - y^2", ("x", "y")),
        ("x^2*y + y^2*z + z^2*x", ("x", "y", "z")),
        ("w^4 + x^2*y^2 - 2*w*x*y*z + z^2", ("w", "x", "y", "z")),
    ])
    def test_matches_brute_force_directions(self, src, vars):
        f = handle(src, vars)
        x = np.full(len(vars), 0.3)
        direct = directional_hessian_plus(f, x)
        oracle = brute_direction_hessian_plus(f.hessian(x), n_dirs=1000)
        assert direct == pytest.approx(oracle, abs=1e-8)


class TestOddEvenControl:
    def test_quartic_second_line_trivial(self):
        rep = verify_odd_even_control(handle("x^4"), Ball((0.0,), 1.0), samples=500)
        assert rep.passed
        assert rep.worst_ratios["axis0.second_lower"] == 0.0

    def test_parabola(self):
        rep = verify_odd_even_control(handle("x^2"), Ball((0.0,), 1.0), samples=500)
        assert rep.passed
        assert rep.worst_ratios["axis0.first_odd"] <= 1.0

    def test_constant(self):
        rep = verify_odd_even_control(handle("1"), Ball((0.0,), 1.0), samples=200)
        assert rep.passed
        for key, val in rep.worst_ratios.items():
            assert val == 0.0, key

    def test_negativity_detected(self):
        with pytest.raises(NonnegativityError):
            verify_odd_even_control(handle("x"), Ball((0.0,), 1.0), samples=200)


class TestInterpolationBound:
    def test_parabola_constant_below_three(self):
        rep = verify_interpolation_bound(handle("x^2"), Ball((0.0,), 1.0), 1, 2, pairs=1000)
        assert rep.max_grad_m == pytest.approx(2.0, rel=1e-6)
        assert rep.constant <= 3.0

    def test_linear_remainder_free(self):
        rep = verify_interpolation_bound(handle("2*x + 1"), Ball((0.0,), 1.0), 1, 2)
        assert rep.max_grad_k <= 1e-12
        assert math.isfinite(rep.constant)

    def test_constant_function(self):
        rep = verify_interpolation_bound(handle("3"), Ball((0.0,), 1.0), 1, 2)
        assert rep.max_grad_m == 0.0
        assert rep.constant == 0.0

    def test_order_validation(self):
        with pytest.raises(DomainError):
            verify_interpolation_bound(handle("x^2"), Ball((0.0,), 1.0), 3, 2)


class TestFlatness:
    def test_flat_profile(self, flat_exp_sq):
        rep = is_flat(flat_exp_sq, n_max=8, t_grid=[2.0 ** (-j) for j in range(1, 11)])
        assert rep.flat

    def test_polynomial_fails_at_next_order(self):
        rep = is_flat(handle("t^4", ("t",)), n_max=8)
        assert not rep.flat
        assert rep.failures[0]["N"] == 5

    def test_zero_function(self):
        rep = is_flat(handle("0", ("t",)), n_max=8)
        assert rep.flat

    def test_derivatives_of_flat_are_flat(self, flat_exp_sq):
        rep = is_flat(flat_exp_sq, n_max=6, check_derivatives=True)
        assert rep.flat and rep.derivative_flat


class TestFiniteDifferenceBackend:
    def test_matches_exact_on_polynomial(self):
        fd = FunctionHandle.from_callable(
            lambda x: float(x[0] ** 4 + x[0] * x[1]), arity=2, domain=Ball((0.0, 0.0), 2.0)
        )
        assert fd.derivative([0.5, 0.2], (2, 0)) == pytest.approx(3.0, abs=1e-6)
        assert fd.derivative([0.5, 0.2], (1, 1)) == pytest.approx(1.0, abs=1e-6)
        assert fd.derivative([0.5, 0.2], (0, 0)) == pytest.approx(0.5**4 + 0.1)

    def test_rescaled_handle(self):
        f = handle("x^2")
        g = f.rescaled(3.0)
        assert g.value([0.5]) == pytest.approx(0.75)
        assert g.derivative([0.5], (2,)) == pytest.approx(6.0)
