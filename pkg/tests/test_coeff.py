import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from refsde.coeff import (
    Binary,
    CoefficientSet,
    Const,
    ExprSyntaxError,
    Param,
    Unary,
    Var,
    collect_vars,
    eval_diffusion,
    eval_drift,
    eval_expr,
    hypothesis_audit,
    parse_expr,
    print_expr,
)
from refsde.young import HistoryView

from conftest import linear_coeffs, nonlinear_coeffs


class TestParser:
    def test_precedence_golden(self):
        assert eval_expr(parse_expr("1 + 2 * 3"), {}, {}) == 7.0
        assert eval_expr(parse_expr("(1 + 2) * 3"), {}, {}) == 9.0

    def test_power_right_associative(self):
        assert eval_expr(parse_expr("2 ^ 3 ^ 2"), {}, {}) == 512.0
        assert eval_expr(parse_expr("2 ** 3 ** 2"), {}, {}) == 512.0

    def test_linear_diffusion_example(self):
        ast = parse_expr("a * xd1 + b", params={"a": 1.5, "b": 0.2})
        assert eval_expr(ast, {"xd1": 2.0}, {"a": 1.5, "b": 0.2}) == pytest.approx(3.2)

    def test_nonlinear_diffusion_example(self):
        ast = parse_expr("sin(t + xd1)")
        assert eval_expr(ast, {"t": 0.0, "xd1": np.pi / 2}, {}) == pytest.approx(1.0)

    def test_syntax_error_offset(self):
        with pytest.raises(ExprSyntaxError) as exc:
            parse_expr("sin(")
        assert exc.value.offset == 4

    def test_unknown_identifier(self):
        with pytest.raises(ExprSyntaxError):
            parse_expr("q1 + 1")

    def test_empty(self):
        with pytest.raises(ExprSyntaxError):
            parse_expr("   ")

    def test_unary_functions(self):
        env = {"x1": -2.0}
        assert eval_expr(parse_expr("abs(x1)"), env, {}) == 2.0
        assert eval_expr(parse_expr("exp(0)"), env, {}) == 1.0
        assert eval_expr(parse_expr("-x1"), env, {}) == 2.0


def random_ast(rng, depth, d=2):
    if depth == 0 or rng.random() < 0.3:
        pick = rng.integers(0, 4)
        if pick == 0:
            # canonical ASTs carry non-negative literals; negation is a neg node
            return Const(float(np.round(rng.uniform(0, 5), 3)))
        if pick == 1:
            return Param("p")
        if pick == 2:
            return Var("t")
        return Var(f"x{rng.integers(1, d + 1)}")
    if rng.random() < 0.3:
        op = ["sin", "cos", "exp", "abs", "neg"][rng.integers(0, 5)]
        return Unary(op, random_ast(rng, depth - 1, d))
    op = "+-*/^"[rng.integers(0, 5)]
    return Binary(op, random_ast(rng, depth - 1, d), random_ast(rng, depth - 1, d))


class TestRoundTrip:
    @given(st.integers(0, 2000))
    @settings(max_examples=300, deadline=None)
    def test_parse_print_roundtrip(self, seed):
        rng = np.random.default_rng(seed)
        ast = random_ast(rng, 4)
        text = print_expr(ast)
        again = parse_expr(text, params={"p": 1.0}, d=2)
        assert print_expr(again) == text
        assert again == ast


class TestCoefficientSet:
    def test_diffusion_variable_restriction(self):
        # rejected at parse time (restricted variable set) or at validation
        with pytest.raises(ValueError, match="x1"):
            CoefficientSet.from_strings(["xd1"], [["x1"]])

    def test_running_sup_in_drift_allowed(self):
        c = CoefficientSet.from_strings(["s1 + xd1"], [["t"]])
        assert collect_vars(c.drift[0]) == {"s1", "xd1"}

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            CoefficientSet.from_strings(["x1", "x2"], [["t"]])


def history_of(values, t0=-1.0, t1=0.0):
    values = np.asarray(values, float)
    times = np.linspace(t0, t1, len(values))
    return HistoryView(values, times, len(values) - 1)


class TestEvaluation:
    def test_drift_cos_at_zero(self):
        c = nonlinear_coeffs()
        hist = history_of(np.zeros((11, 1)))
        assert eval_drift(c, 0.0, hist, 1.0)[0] == pytest.approx(1.0)

    def test_drift_delayed_initial_segment(self):
        # drift xd1 with eta(t) = t + r evaluates to eta(-r) = 0 at t = 0
        c = linear_coeffs()
        times = np.linspace(-1.0, 0.0, 11)
        hist = HistoryView((times + 1.0)[:, None], times, 10)
        assert eval_drift(c, 0.0, hist, 1.0)[0] == pytest.approx(0.0)

    def test_zero_drift(self):
        c = CoefficientSet.from_strings(["0", "0"], [["1"], ["1"]])
        hist = history_of(np.zeros((5, 2)))
        assert np.all(eval_drift(c, 0.0, hist, 1.0) == 0.0)

    def test_diffusion_constant_matrix(self):
        c = CoefficientSet.from_strings(["0"], [["2.5", "-1"]])
        out = eval_diffusion(c, 0.3, np.array([9.9]))
        assert np.array_equal(out, np.array([[2.5, -1.0]]))

    def test_diffusion_linear(self):
        c = CoefficientSet.from_strings(["0"], [["a * xd1 + b"]], params={"a": 2.0, "b": 1.0})
        assert eval_diffusion(c, 0.0, np.array([3.0]))[0, 0] == pytest.approx(7.0)

    def test_diffusion_purity(self):
        c = nonlinear_coeffs()
        a = eval_diffusion(c, 0.7, np.array([1.3]))
        b = eval_diffusion(c, 0.7, np.array([1.3]))
        assert np.array_equal(a, b)

    def test_diffusion_batch_matches_scalar(self):
        c = nonlinear_coeffs()
        ts = np.array([0.1, 0.5, 0.9])
        xs = np.array([[0.2], [1.0], [2.0]])
        batch = eval_diffusion(c, ts, xs)
        for k in range(3):
            assert np.allclose(batch[k], eval_diffusion(c, float(ts[k]), xs[k]))

    def test_non_finite_drift_named(self):
        c = CoefficientSet.from_strings(["1 / t"], [["1"]])
        hist = history_of(np.zeros((5, 1)))
        with pytest.raises(ValueError, match="component 1"):
            eval_drift(c, 0.0, hist, 1.0)

    def test_causality_enforced(self):
        # a drift functional that tries to read the future blows up via HistoryView
        times = np.linspace(-1.0, 1.0, 21)
        hist = HistoryView(np.zeros((21, 1)), times, 10)
        with pytest.raises(ValueError, match="past"):
            hist.at(0.7)


class TestAudit:
    def test_sine_diffusion(self):
        c = nonlinear_coeffs()
        rep = hypothesis_audit(c, ([0.0], [2.0]), n_samples=400, seed=0)
        assert rep.m0_spatial <= 1.05
        # bounded sigma: growth exponent ~ 0 and, under the 1 + |x|^gamma
        # normalisation, the fitted prefactor sits near max|sigma| / 2
        assert 0.4 <= rep.k0 <= 1.05
        assert rep.gamma == pytest.approx(0.0, abs=0.1)

    def test_linear_diffusion(self):
        c = CoefficientSet.from_strings(["0"], [["2 * xd1"]])
        rep = hypothesis_audit(c, ([0.0], [2.0]), n_samples=400, seed=1)
        assert rep.m0_spatial == pytest.approx(2.0, abs=0.05)
        assert rep.gamma == pytest.approx(1.0, abs=0.05)

    def test_constant_diffusion(self):
        c = CoefficientSet.from_strings(["0"], [["3"]])
        rep = hypothesis_audit(c, ([0.0], [1.0]), n_samples=100, seed=2)
        assert rep.m0_spatial == pytest.approx(0.0, abs=1e-9)

    def test_deterministic(self):
        c = linear_coeffs()
        a = hypothesis_audit(c, ([0.0], [2.0]), n_samples=100, seed=3)
        b = hypothesis_audit(c, ([0.0], [2.0]), n_samples=100, seed=3)
        assert a == b
