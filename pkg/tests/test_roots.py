import math

import numpy as np
import pytest

from sosreg.calculus import FunctionHandle, multiindices
from sosreg.errors import DerivativeError, DomainError
from sosreg.exprlang import Pow, Var, catalog_function, differentiate, evaluate, parse_expression
from sosreg.geometry import Ball
from sosreg.roots import (
    PowerHandle,
    falling_factorial,
    power_derivative,
    verify_power_smoothness_chain,
    verify_root_regularity,
)

from oracles import fd_callable_partial


def handle(src, variables=("x",), radius=4.0):
    return FunctionHandle.from_expr(
        parse_expression(src), variables, domain=Ball((0.0,) * len(variables), radius)
    )


class TestPowerDerivative:
    def test_hand_computed_example(self):
        # d2 sqrt(x^4+1) at x=1: 12/(2 sqrt 2) - 16/(4 * 2^(3/2)) = 2 sqrt 2
        p = PowerHandle(handle("x^4 + 1"), 0.5)
        assert power_derivative(p, [1.0], (2,)) == pytest.approx(2.0 * math.sqrt(2.0), abs=1e-12)

    def test_identity_power(self):
        f = handle("x^4 + 1")
        p = PowerHandle(f, 1.0)
        for order in (1, 2, 3):
            assert power_derivative(p, [0.7], (order,)) == pytest.approx(
                f.derivative([0.7], (order,)), abs=1e-10
            )

    def test_constant_base(self):
        p = PowerHandle(handle("5"), 0.3)
        assert power_derivative(p, [0.2], (2,)) == 0.0

    def test_positive_base_required(self):
        p = PowerHandle(handle("x"), 0.5)
        with pytest.raises(DomainError):
            power_derivative(p, [-0.5], (1,))

    def test_order_cap(self):
        p = PowerHandle(handle("x^2 + 1"), 0.5, order_cap=2)
        with pytest.raises(DerivativeError):
            power_derivative(p, [0.3], (3,))

    def test_falling_factorial_matches_symbolic(self):
        # d^k/dt^k t^gamma = gamma (gamma-1) ... (gamma-k+1) t^(gamma-k)
        for gamma in (0.5, 1.0 / 3.0):
            for k in range(0, 7):
                e = Pow(Var("t"), gamma)
                for _ in range(k):
                    e = differentiate(e, "t")
                for t in (0.5, 2.0):
                    expected = falling_factorial(gamma, k) * t ** (gamma - k)
                    assert evaluate(e, {"t": t}) == pytest.approx(expected, rel=1e-12)

    def test_mixed_partials_match_symbolic_composition(self, quartic_L):
        body = catalog_function("quartic_L").body
        half = Pow(body, 0.5)
        p = PowerHandle(quartic_L, 0.5)
        pt = {"w": 1.1, "x": 0.6, "y": 0.8, "z": 0.9}
        x = [1.1, 0.6, 0.8, 0.9]
        for alpha in [(1, 1, 0, 0), (2, 0, 0, 0), (1, 1, 1, 1), (2, 2, 0, 0)]:
            d = half
            for var, k in zip("wxyz", alpha):
                for _ in range(k):
                    d = differentiate(d, var)
            sym = evaluate(d, pt)
            num = power_derivative(p, x, alpha)
            assert num == pytest.approx(sym, abs=1e-9 * (1 + abs(sym)))

    def test_flat_base_log_space(self, flat_exp):
        # tiny base values: terms combine in log space without overflow
        quarter_sym = Pow(catalog_function("flat_exp").body, 0.25)
        d2 = differentiate(differentiate(quarter_sym, "t"), "t")
        p = PowerHandle(flat_exp, 0.25)
        for t in (0.05, 0.1, 0.3):
            sym = evaluate(d2, {"t": t})
            assert power_derivative(p, [t], (2,)) == pytest.approx(sym, rel=1e-7)

    def test_matches_nested_fd(self, flat_exp_sq):
        p = PowerHandle(flat_exp_sq, 0.5)
        pts = np.linspace(0.7, 0.95, 20).reshape(-1, 1)
        fn = lambda X: np.maximum(flat_exp_sq.values(X), 0.0) ** 0.5
        for alpha in [(1,), (2,), (3,), (4,)]:
            direct = p.derivative_values(pts, alpha)
            oracle = fd_callable_partial(fn, pts, alpha, h=2e-3)
            assert np.max(np.abs(direct - oracle) / (1 + np.abs(direct))) < 1e-5


class TestRootRegularity:
    def test_flat_profile_has_stable_exponent(self, flat_exp):
        rep = verify_root_regularity(flat_exp, s=0.9, M=2, delta_search=[0.05, 0.1],
                                     region=Ball((0.5,), 0.45), samples=150)
        assert rep.best_exponent is not None

    def test_kink_fails_across_zero(self):
        # sqrt(x^2) = |x| is Lipschitz but not C^1 across the origin
        f = handle("x^2")
        rep = verify_root_regularity(f, s=0.8, M=1, delta_search=[0.5],
                                     region=Ball((0.0,), 1.0), samples=200)
        assert rep.truncated or not any(rep.stable.values())
        assert not rep.stable.get(0.5, False)

    def test_constant_function(self):
        rep = verify_root_regularity(handle("1"), s=0.9, M=2, delta_search=[0.3],
                                     region=Ball((0.0,), 1.0), samples=100)
        assert rep.best_exponent == 0.3
        assert rep.estimates[0.3].seminorm <= 1e-10

    def test_exponent_range_validation(self):
        with pytest.raises(DomainError):
            verify_root_regularity(handle("1"), s=0.5, M=2, delta_search=[0.3],
                                   region=Ball((0.0,), 1.0))


class TestPowerSmoothnessChain:
    def test_flat_profile_chain(self, flat_exp):
        rep = verify_power_smoothness_chain(flat_exp, [0.5, 0.25, 0.1], 4,
                                            Ball((0.5,), 0.45), samples=200)
        assert rep.consistent
        assert all(math.isfinite(c) for c in rep.derivative_constants.values())

    def test_constant_function_chain(self):
        rep = verify_power_smoothness_chain(handle("1"), [0.5], 3, Ball((0.0,), 1.0), samples=100)
        assert rep.consistent
        assert all(v == 0.0 for v in rep.derivative_constants.values())

    def test_power_handle_order4_seminorm_finite(self, flat_exp):
        # f^gamma stays fourth-order Hölder-estimable on a truncated interval
        from sosreg.calculus import holder_seminorm

        for gamma in (0.5, 0.25):
            ph = PowerHandle(flat_exp, gamma, order_cap=5).as_function_handle(
                domain=Ball((0.55,), 0.4)
            )
            est = holder_seminorm(ph, 4, 0.1, Ball((0.55,), 0.4), samples=120)
            assert math.isfinite(est.seminorm)
            assert all(math.isfinite(v) for v in est.sup_norms)

    def test_malgrange_style_gradient_bound(self, flat_exp_sq):
        # |grad(f^beta)| <= C sqrt(f^beta) for smooth nonnegative powers
        beta = 0.5
        p = PowerHandle(flat_exp_sq, beta)
        pts = np.linspace(0.3, 0.95, 60).reshape(-1, 1)
        grads = np.abs(p.derivative_values(pts, (1,)))
        roots = np.sqrt(p.values(pts))
        assert np.max(grads / roots) < 50.0
