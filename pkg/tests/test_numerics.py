import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from multistop import GridFunction, MarketModel, PriceGrid, bisect, build_grid, evaluate, iterate, lognormal_expectation
from multistop.numerics import BracketError, ExpectationOperator


class TestGrid:
    def test_baseline_x_max(self, model, spec):
        g = build_grid(model, spec, 0.85)
        assert g.x_max == pytest.approx(4.30, abs=5e-3)
        assert g.count == 500 and g.points[0] == 0.0 and g.points[-1] == g.x_max

    def test_x_max_is_upper_quantile(self, model, spec):
        # 99.9% two-sided interval, upper end of ln X_T
        q = stats.norm.ppf(0.9995, loc=math.log(0.85) + 0.03 * 5, scale=0.2 * math.sqrt(5))
        assert math.log(build_grid(model, spec, 0.85).x_max) == pytest.approx(q, abs=1e-3)

    @pytest.mark.parametrize("x_max,count", [(0.0, 10), (-1.0, 10), (math.inf, 10), (1.0, 2)])
    def test_rejects_bad_grid(self, x_max, count):
        with pytest.raises(ValueError):
            PriceGrid(x_max, count)


class TestEvaluate:
    @given(st.floats(-3, 3), st.floats(-3, 3), st.lists(st.floats(0, 20), min_size=1, max_size=20))
    def test_exact_for_affine(self, k, m, xs):
        g = PriceGrid(4.0, 41)
        f = GridFunction.from_values(g, k * g.points + m)
        np.testing.assert_allclose(evaluate(f, np.array(xs)), k * np.array(xs) + m, atol=1e-9)

    def test_scalar_and_negative(self):
        f = GridFunction.from_values(PriceGrid(1.0, 3), [0.0, 1.0, 4.0])
        assert f(0.25) == pytest.approx(0.5)
        assert f(2.0) == pytest.approx(10.0)
        with pytest.raises(ValueError):
            f(-0.1)


class TestExpectation:
    grid = PriceGrid(4.3, 500)

    def test_constant(self, model):
        f = GridFunction.from_values(self.grid, np.ones(500))
        x = np.array([0.1, 0.5, 2.0, 4.0])
        np.testing.assert_allclose(lognormal_expectation(f, model, x, 5.0), 1.0, atol=1e-5)

    def test_identity_gives_forward(self, model):
        f = GridFunction.from_values(self.grid, self.grid.points)
        x = np.array([0.1, 0.5, 2.0, 4.0])
        got = lognormal_expectation(f, model, x, 5.0)
        np.testing.assert_allclose(got, x * math.exp(0.25), rtol=1e-4)

    def test_node_zero_absorbing(self, model):
        f = GridFunction.from_values(self.grid, 3.0 + self.grid.points)
        assert ExpectationOperator(model, self.grid, 1.0).at_nodes(f)[0] == 3.0

    def test_at_nodes_matches_at(self, model):
        f = GridFunction.from_values(self.grid, np.sqrt(self.grid.points))
        op = ExpectationOperator(model, self.grid, 2.0)
        np.testing.assert_allclose(op.at_nodes(f)[1:], op.at(f, self.grid.points[1:]), rtol=1e-13)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 2**31))
    def test_linear(self, a, b, seed):
        rng = np.random.default_rng(seed)
        g = PriceGrid(3.0, 60)
        f1 = GridFunction.from_values(g, rng.normal(size=60))
        f2 = GridFunction.from_values(g, rng.normal(size=60))
        comb = GridFunction.from_values(g, a * f1.values + b * f2.values)
        op = ExpectationOperator(MarketModel(0.05, 0.2, 0.1), g, 1.0)
        np.testing.assert_allclose(op.at_nodes(comb), a * op.at_nodes(f1) + b * op.at_nodes(f2), atol=1e-9)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31))
    def test_nonnegative(self, seed):
        rng = np.random.default_rng(seed)
        g = PriceGrid(3.0, 60)
        vals = np.cumsum(rng.random(60))  # nonnegative, nondecreasing tail
        op = ExpectationOperator(MarketModel(0.05, 0.2, 0.1), g, 1.0)
        assert np.all(op.at_nodes(GridFunction.from_values(g, vals)) >= 0)

    def test_second_order_convergence(self, model):
        # E[max(X_t - 1, 0)] has a kink: refine and compare against the closed form
        from multistop import call_expectation

        errs = []
        for n in (101, 201, 401):
            g = PriceGrid(4.0, n)
            f = GridFunction.from_values(g, np.maximum(g.points - 1.0, 0.0))
            errs.append(abs(lognormal_expectation(f, model, 0.8, 1.0) - call_expectation(model, 0.8, 1.0, 1.0)))
        assert errs[1] < errs[0] / 3 and errs[2] < errs[1] / 3

    def test_monte_carlo_first_iterate(self, model, rf):
        x1 = 0.8517898
        grid = build_grid(model, rf.spec, x1)
        u1 = iterate(rf, grid).u
        rng = np.random.default_rng(3)
        xt = 0.5 * np.exp(model.log_drift * 5 + model.sigma * math.sqrt(5) * rng.standard_normal(400_000))
        samples = np.where(xt >= x1, rf.lambda_psi(xt), 0.0)
        se = samples.std() / math.sqrt(samples.size)
        got = lognormal_expectation(u1, model, 0.5, 5.0)
        assert abs(got - samples.mean()) < 4 * se + 1e-3 * samples.mean()


class TestBisect:
    def test_examples(self):
        assert bisect(lambda x: x * x - 2, 0, 2, 1e-12) == pytest.approx(math.sqrt(2), abs=1e-12)
        assert bisect(lambda x: x - 1, 1, 3, 1e-9) == 1
        with pytest.raises(BracketError):
            bisect(lambda x: x * x + 1, -1, 1, 1e-9)
        with pytest.raises(ValueError):
            bisect(lambda x: x, 1, 0, 1e-9)

    @given(st.floats(0.001, 1000), st.floats(-10, 10))
    def test_linear_root(self, slope, root):
        got = bisect(lambda x: slope * (x - root), root - 7.3, root + 3.1, 1e-10)
        assert abs(got - root) <= 1e-9
