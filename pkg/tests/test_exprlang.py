import math

import numpy as np
import pytest

from sosreg.exprlang import (
    Const,
    ExprError,
    FunctionDef,
    Neg,
    ParseError,
    Pow,
    Prod,
    Quot,
    Sum,
    Var,
    catalog_function,
    catalog_names,
    differentiate,
    evaluate,
    free_variables,
    glaeser_stub_with,
    parse_expression,
    parse_function_file,
    to_source,
)
from sosreg.geometry import Ball

from oracles import fd_partial_richardson


class TestParse:
    def test_sum_of_squares_shape(self):
        e = parse_expression("x^2 + y^2")
        assert e == Sum((Pow(Var("x"), 2.0), Pow(Var("y"), 2.0)))

    def test_flat_profile_parses(self):
        e = parse_expression("exp(-1/t^2)")
        assert evaluate(e, {"t": 0.5}) == pytest.approx(math.exp(-4.0))

    def test_double_plus_is_a_syntax_error(self):
        with pytest.raises(ParseError) as err:
            parse_expression("x ++ y")
        assert err.value.column == 4

    def test_unknown_function_identifier(self):
        with pytest.raises(ParseError):
            parse_expression("frob(x)")

    def test_arity_mismatch(self):
        with pytest.raises(ParseError):
            parse_expression("exp(x, y)")

    def test_unbalanced_parens(self):
        with pytest.raises(ParseError):
            parse_expression("(x + y")

    @pytest.mark.parametrize(
        "src",
        [
            "x^2 + y^2",
            "exp(-1/t^2)",
            "3*x - 4/y^2 + sin(x)*cos(y)",
            "-(x^2) - y^2",
            "(-x)^2",
            "1.5e-3*x + 2",
            "flatexp(t^2)",
            "piecewise(t^2, 0.25, 1, 0)",
            "ln(x)/x^0.5",
        ],
    )
    def test_print_parse_round_trip(self, src):
        e = parse_expression(src)
        assert parse_expression(to_source(e)) == e

    def test_unary_minus_binds_tighter_than_power(self):
        # per the grammar, '-' is part of base, so -x^2 means (-x)^2
        e = parse_expression("-x^2")
        assert evaluate(e, {"x": 3.0}) == 9.0

    def test_function_file(self):
        defs = parse_function_file(
            """
            # a comment
            def f(x, y) = x^2 + y^2
            def g(t) = exp(-1/t^2)   # trailing comment
            """
        )
        assert set(defs) == {"f", "g"}
        assert defs["f"].variables == ("x", "y")
        assert defs["f"](1.0, 2.0) == 5.0

    def test_function_file_unknown_identifier(self):
        with pytest.raises(ParseError):
            parse_function_file("def f(x) = x + z")


class TestDifferentiate:
    def test_polynomial_rule(self):
        d = differentiate(parse_expression("x^4"), "x")
        assert evaluate(d, {"x": 2.0}) == 32.0

    def test_second_derivative_of_flat_profile_matches_fd(self):
        fdef = FunctionDef(
            name="f", variables=("t",), body=parse_expression("exp(-1/t^2)"),
            domain=Ball((0.5,), 0.5),
        )
        d2 = differentiate(fdef.body, "t", 2)
        val = evaluate(d2, {"t": 0.5})
        oracle = float(fd_partial_richardson(fdef, [[0.5]], (2,))[0])
        assert val == pytest.approx(oracle, abs=1e-6 * (1 + abs(val)))

    def test_quartic_partial_example(self):
        L = catalog_function("quartic_L")
        dw = differentiate(L.body, "w")
        # 4w^3 - 2xyz at (1,1,1,1)
        assert evaluate(dw, dict(w=1.0, x=1.0, y=1.0, z=1.0)) == 2.0

    def test_order_cap(self):
        with pytest.raises(ExprError):
            differentiate(parse_expression("x^2"), "x", 9)

    def test_schwarz_symmetry(self):
        body = catalog_function("family_f").body
        dxy = differentiate(differentiate(body, "x"), "t")
        dyx = differentiate(differentiate(body, "t"), "x")
        rng = np.random.default_rng(0)
        pts = {v: rng.uniform(0.25, 0.35, 50) for v in "wxyz"}
        pts["t"] = rng.uniform(0.82, 0.93, 50)
        a = evaluate(dxy, pts)
        b = evaluate(dyx, pts)
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


class TestCatalog:
    def test_names(self):
        assert set(catalog_names()) == {
            "motzkin_M", "quartic_L", "flat_exp_sq", "flat_exp", "bump_h",
            "family_f", "glaeser_stub",
        }

    def test_motzkin_value(self):
        M = catalog_function("motzkin_M", {"lam": 1.0})
        # 1 + 1*(1 + 1 - 3) = 0
        assert M(1.0, 1.0, 1.0) == 0.0

    def test_motzkin_lambda_range(self):
        with pytest.raises(ExprError):
            catalog_function("motzkin_M", {"lam": 1.5})

    def test_unknown_name(self):
        with pytest.raises(ExprError):
            catalog_function("nonsense")

    def test_quartic_values(self):
        L = catalog_function("quartic_L")
        assert L(1.0, 1.0, 1.0, 1.0) == 2.0
        assert L(0.0, 0.0, 0.0, 0.0) == 0.0

    def test_quartic_nonnegative_on_sphere(self):
        L = catalog_function("quartic_L")
        rng = np.random.default_rng(1)
        W = rng.normal(size=(10_000, 4))
        W /= np.linalg.norm(W, axis=1)[:, None]
        vals = evaluate(L.body, {v: W[:, i] for i, v in enumerate("wxyz")})
        assert np.min(vals) >= -1e-12

    @pytest.mark.parametrize("lam", [0.0, 0.5, 1.0])
    def test_motzkin_nonnegative_on_sphere(self, lam):
        M = catalog_function("motzkin_M", {"lam": lam})
        rng = np.random.default_rng(2)
        W = rng.normal(size=(10_000, 3))
        W /= np.linalg.norm(W, axis=1)[:, None]
        vals = evaluate(M.body, {v: W[:, i] for i, v in enumerate("xyz")})
        assert np.min(vals) >= -1e-12

    def test_bump_plateau(self):
        h = catalog_function("bump_h", {"rho": 0.5})
        assert h(0.0) == 1.0
        assert h(0.4) == 1.0
        assert h(-0.4) == 1.0
        assert 0.0 < h(0.7) < 1.0
        assert h(1.0) == 0.0
        assert h(1.3) == 0.0
        # even and monotone on [0, inf)
        ts = np.linspace(0.0, 1.2, 200)
        vals = evaluate(h.body, {"t": ts})
        assert np.allclose(vals, evaluate(h.body, {"t": -ts}))
        assert np.all(np.diff(vals) <= 1e-12)

    def test_family_guard_at_zero_radius(self):
        fam = catalog_function("family_f")
        t = np.array([0.0, 0.2, 0.5])
        vals = fam(np.zeros(3), np.zeros(3), np.zeros(3), np.zeros(3), t)
        psi = np.exp(-16.0 / np.where(t > 0, t, 1) ** 2) * t**8
        assert vals[0] == 0.0
        assert np.allclose(vals[1:], psi[1:], rtol=1e-12)

    def test_family_on_t_axis_equals_phi_r_at_t0(self):
        fam = catalog_function("family_f")
        assert fam(0.4, 0.0, 0.0, 0.0, 0.0) == pytest.approx(math.exp(-1 / 0.16), rel=1e-12)

    def test_glaeser_stub_hook(self):
        stub = glaeser_stub_with(parse_expression("t^4"), ("t",))
        assert stub(0.0) == 0.0
        assert stub(0.5) == pytest.approx(math.exp(-16.0))

    def test_free_variable_validation(self):
        with pytest.raises(ExprError):
            FunctionDef(
                name="bad", variables=("x",), body=parse_expression("x + y"),
                domain=Ball((0.0,), 1.0),
            )


class TestDerivativeOracleInvariant:
    @pytest.mark.parametrize("name", ["motzkin_M", "flat_exp_sq", "bump_h"])
    def test_symbolic_matches_fd_to_order_4(self, name):
        from sosreg.calculus import FunctionHandle, multiindices

        fdef = catalog_function(name)
        fh = FunctionHandle.from_def(fdef)
        rng = np.random.default_rng(11)
        pts = np.column_stack([rng.uniform(lo, hi, 40) for lo, hi in fdef.sample_box])
        for order in (1, 2, 3, 4):
            for alpha in multiindices(fdef.arity, order):
                sym = fh.derivative_values(pts, alpha)
                fd = fd_partial_richardson(fdef, pts, alpha)
                assert np.max(np.abs(sym - fd) / (1.0 + np.abs(sym))) <= 1e-5
