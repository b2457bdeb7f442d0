import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from liquidsim.analytic import (
    MarketParams,
    Trajectory,
    default_params,
    derive_params,
    evaluate_trajectory,
    kappa_tilde,
    optimal_expected_shortfall,
    optimal_trajectory,
    trajectory_bias,
    verify_theorems,
)
from liquidsim.errors import (
    ConvexityError,
    InvalidParameterError,
    InvalidScenarioError,
    InvalidTrajectoryError,
)

X = 1e6


@pytest.fixture(scope="module")
def params():
    return default_params()


def summation_oracle(holdings, p, lam):
    """Term-by-term loop over the shortfall / variance sums."""
    E = 0.0
    V = 0.0
    for k in range(1, len(holdings)):
        n = holdings[k - 1] - holdings[k]
        x = holdings[k]
        E += p.tau * x * p.gamma_perm * (n / p.tau)
        E += n * (p.epsilon * (1.0 if n > 0 else 0.0) + p.eta / p.tau * n)
        V += p.sigma**2 * p.tau * x * x
    return E, V, E + lam * V


class TestDeriveParams:
    def test_desk_example_spread_and_period(self, params):
        assert params.epsilon == 0.0625
        assert params.tau == 1.0

    def test_desk_example_impact_slopes(self, params):
        assert params.eta == pytest.approx((1 / 8) / (0.01 * 5e6), rel=1e-15)
        assert params.eta == pytest.approx(2.5e-6, rel=1e-12)
        assert params.gamma_perm == pytest.approx(2.5e-7, rel=1e-12)

    def test_desk_example_vol_and_adjusted_eta(self, params):
        assert params.sigma == pytest.approx(50 * 0.12 / math.sqrt(250), rel=1e-15)
        assert params.sigma == pytest.approx(0.37947, abs=5e-6)
        assert params.eta_tilde == pytest.approx(2.375e-6, rel=1e-12)

    @pytest.mark.parametrize("index", range(8))
    def test_non_positive_input_rejected(self, index):
        args = [0.12, 1 / 8, 5e6, 250, 50, 1e6, 60, 60]
        args[index] = 0
        with pytest.raises(InvalidParameterError):
            derive_params(*args)

    def test_convexity_violation(self):
        with pytest.raises(ConvexityError):
            MarketParams(1e6, 50, 0.3, 0.06, eta=1e-6, gamma_perm=2e-6, horizon_days=60, num_trades=60)

    def test_with_trades_keeps_tau(self, params):
        short = params.with_trades(7)
        assert short.tau == params.tau
        assert short.horizon_days == 7
        assert short.eta_tilde == params.eta_tilde


class TestKappa:
    def test_risk_neutral(self, params):
        assert kappa_tilde(0.0, params) == 0.0

    def test_desk_lambda(self, params):
        # sqrt(1e-6 * 0.37947^2 / 2.375e-6)
        assert kappa_tilde(1e-6, params) == pytest.approx(0.2462348, rel=1e-6)

    def test_near_linear_lambda(self, params):
        assert kappa_tilde(1e-9, params) == pytest.approx(0.0077866, rel=1e-4)

    def test_negative_lambda(self, params):
        with pytest.raises(InvalidParameterError):
            kappa_tilde(-1e-6, params)

    def test_monotone_in_lambda(self, params):
        lams = np.logspace(-12, -3, 40)
        ks = [kappa_tilde(l, params) for l in lams]
        assert all(a < b for a, b in zip(ks, ks[1:]))


class TestOptimalTrajectory:
    def test_linear_at_zero_lambda(self, params):
        h = optimal_trajectory(X, 0.0, params).holdings
        np.testing.assert_allclose(h, X * (1 - np.arange(61) / 60), rtol=0, atol=1e-8)

    def test_zero_inventory(self, params):
        assert np.all(optimal_trajectory(0.0, 1e-6, params).holdings == 0)

    def test_first_step_fraction(self, params):
        k = kappa_tilde(1e-6, params)
        h = optimal_trajectory(X, 1e-6, params).holdings
        assert h[1] / X == pytest.approx(math.sinh(59 * k) / math.sinh(60 * k), rel=1e-12)
        assert h[1] / X == pytest.approx(0.782, abs=5e-4)

    def test_endpoints(self, params):
        h = optimal_trajectory(X, 1e-4, params).holdings
        assert h[0] == X and h[-1] == 0.0

    def test_no_overflow_for_extreme_urgency(self, params):
        h = optimal_trajectory(X, 1.0, params).holdings
        assert np.all(np.isfinite(h))
        assert h[1] < 1e-6 * X

    @pytest.mark.parametrize("lam", [1e-9, 1e-7, 1e-6, 1e-5, 1e-4])
    def test_non_increasing_and_convex(self, params, lam):
        h = optimal_trajectory(X, lam, params).holdings
        assert np.all(np.diff(h) <= 0)
        assert np.all(np.diff(h, 2) >= -1e-9)

    def test_front_loading_monotone_in_lambda(self, params):
        lams = np.logspace(-10, -4, 30)
        first = [optimal_trajectory(X, l, params).holdings[1] for l in lams]
        assert all(a > b for a, b in zip(first, first[1:]))


class TestEvaluateTrajectory:
    def test_sell_at_once(self, params):
        h = np.zeros(61)
        h[0] = X
        u = evaluate_trajectory(Trajectory(h), 1e-6, params)
        assert u.expected_shortfall == pytest.approx(2_562_500.0, abs=1e-6)
        assert u.variance == 0.0

    def test_linear(self, params):
        h = X * (1 - np.arange(61) / 60)
        u = evaluate_trajectory(Trajectory(h), 0.0, params)
        closed_form = params.gamma_perm * X**2 * 59 / 120 + params.epsilon * X + params.eta * X**2 / 60
        assert closed_form == pytest.approx(227_083.333333, abs=1e-5)
        assert u.expected_shortfall == pytest.approx(closed_form, rel=1e-12)
        assert u.expected_shortfall == pytest.approx(summation_oracle(h, params, 0)[0], rel=1e-12)

    def test_zero(self, params):
        u = evaluate_trajectory(Trajectory(np.zeros(61)), 1e-6, params)
        assert (u.expected_shortfall, u.variance, u.utility) == (0.0, 0.0, 0.0)

    def test_rejects_buys(self, params):
        with pytest.raises(InvalidTrajectoryError):
            evaluate_trajectory(Trajectory([10.0, 5.0, 7.0, 0.0]), 0.0, params)

    def test_partial_schedule_allowed(self, params):
        u = evaluate_trajectory(Trajectory([100.0, 60.0]), 1e-6, params)
        assert u.variance == pytest.approx(params.sigma**2 * 60.0**2)

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(st.floats(0, 1), min_size=1, max_size=30),
        st.floats(0, 1e-4),
    )
    def test_matches_loop_oracle(self, fractions, lam):
        p = default_params()
        trades = np.array(fractions) * 1e5
        traj = Trajectory.from_trades(float(trades.sum()), trades)
        u = evaluate_trajectory(traj, lam, p)
        E, V, U = summation_oracle(traj.holdings, p, lam)
        assert u.expected_shortfall == pytest.approx(E, rel=1e-10, abs=1e-6)
        assert u.variance == pytest.approx(V, rel=1e-10, abs=1e-6)
        assert u.utility == u.expected_shortfall + lam * u.variance
        assert u.variance >= 0 and u.expected_shortfall >= 0

    def test_homogeneity_by_component(self, params):
        base = optimal_trajectory(X, 1e-6, params)
        u1 = evaluate_trajectory(base, 1e-6, params)
        for a in (0.1, 0.37, 2.5):
            ua = evaluate_trajectory(Trajectory(a * base.holdings), 1e-6, params)
            assert ua.variance == pytest.approx(a**2 * u1.variance, rel=1e-12)
            linear = params.epsilon * X
            assert ua.expected_shortfall == pytest.approx(a**2 * (u1.expected_shortfall - linear) + a * linear, rel=1e-12)

    def test_optimal_beats_random_perturbations(self, params):
        lam = 1e-6
        opt = optimal_trajectory(X, lam, params)
        u_opt = evaluate_trajectory(opt, lam, params).utility
        rng = np.random.default_rng(7)
        checked = 0
        while checked < 100:
            h = opt.holdings.copy()
            h[1:-1] *= 1 + 0.01 * rng.standard_normal(h.size - 2)
            if np.any(np.diff(h) > 0):
                continue
            checked += 1
            assert evaluate_trajectory(Trajectory(h), lam, params).utility > u_opt


class TestOptimalShortfall:
    def test_zero(self, params):
        assert optimal_expected_shortfall(0.0, 1e-6, params) == 0.0

    def test_risk_neutral_limit_is_linear(self, params):
        assert optimal_expected_shortfall(X, 0.0, params) == pytest.approx(227_083.333333, abs=1e-5)
        assert optimal_expected_shortfall(X, 1e-14, params) == pytest.approx(227_083.333333, rel=1e-6)

    def test_split_is_cheaper(self, params):
        lam = 1e-6
        whole = optimal_expected_shortfall(X, lam, params)
        parts = optimal_expected_shortfall(0.3 * X, lam, params) + optimal_expected_shortfall(0.7 * X, lam, params)
        assert parts < whole

    def test_quadratic_plus_linear_in_scale(self, params):
        lam = 1e-6
        E = [optimal_expected_shortfall(a * X, lam, params) for a in (0.5, 1.0, 2.0)]
        # fit c2 a^2 + c1 a through the three points; the linear part is epsilon * X
        A = np.array([[0.25, 0.5], [1.0, 1.0], [4.0, 2.0]])
        coef, *_ = np.linalg.lstsq(A, np.array(E), rcond=None)
        np.testing.assert_allclose(A @ coef, E, rtol=1e-12)
        assert coef[1] == pytest.approx(params.epsilon * X, rel=1e-9)


@pytest.mark.parametrize("lam", [0.0, 1e-9, 1e-6, 1e-4])
@pytest.mark.parametrize("a", [round(0.1 * i, 1) for i in range(1, 10)])
def test_superadditivity_grid(lam, a):
    p = default_params()
    lhs = optimal_expected_shortfall(a * X, lam, p) + optimal_expected_shortfall((1 - a) * X, lam, p)
    assert lhs < optimal_expected_shortfall(X, lam, p)


class TestVerifyTheorems:
    def test_single_agent_equality(self, params):
        report = verify_theorems(params, [[X]], [])
        (case,) = report.cases
        assert case.passed and not case.strict
        assert case.lhs == case.rhs

    def test_split_strict(self, params):
        report = verify_theorems(params, [[0.3 * X, 0.7 * X]], [])
        (case,) = report.cases
        assert case.passed and case.strict
        assert case.margin == pytest.approx(case.rhs - case.lhs)

    def test_equal_lambdas_unbiased(self, params):
        joint, mixture = trajectory_bias(X, 1e-6, 1e-6, params)
        assert np.max(np.abs(joint - mixture)) <= 1e-12 * X
        assert verify_theorems(params, [], [(1e-6, 1e-6)]).passed

    def test_mixed_lambdas_biased(self, params):
        report = verify_theorems(params, [], [(1e-4, 1e-9)])
        (case,) = report.cases
        assert case.passed and case.lhs > 0

    def test_bad_partition(self, params):
        with pytest.raises(InvalidScenarioError):
            verify_theorems(params, [[0.3 * X, 0.6 * X]], [])

    def test_report_rows_recheckable(self, params):
        report = verify_theorems(params, [[0.5 * X, 0.5 * X]], [(1e-4, 1e-9)])
        for row in report.rows():
            assert set(row) == {"theorem", "case", "lhs", "rhs", "margin", "strict", "passed"}
        assert report.passed
