import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from feedback_commons import (
    DomainError,
    EmptyStrategySetError,
    InvalidPolicyError,
    Policy,
    Regime,
    StrategyProfile,
    best_response,
    capacity,
    e_roots,
    equilibrium_table,
    limits,
    resource_level,
    strategy_cap,
    symmetric_equilibrium,
    threshold_C,
    utility,
)
from feedback_commons.equilibrium import (
    equilibrium_quadratic,
    f_response,
    f_response_literal,
    is_depleting_equilibrium,
)
from feedback_commons.oracles import (
    br_iteration,
    grid_best_response,
    numeric_quadratic_roots,
    quadratic_residual,
    random_instance,
)

from conftest import game


class TestGameInstance:
    def test_rejects_irresponsible(self):
        with pytest.raises(InvalidPolicyError, match="not responsible"):
            game(Policy(2.0, 2.5, 2.1, 2.0))

    @pytest.mark.parametrize("M", [0, -1, 1.5, True])
    def test_rejects_bad_M(self, sustained_policy, M):
        with pytest.raises(DomainError):
            game(sustained_policy, M=M)

    def test_profile_rejects_negative(self):
        with pytest.raises(DomainError):
            StrategyProfile((0.1, -0.2))


class TestResourceMap:
    def test_no_extraction(self, sustained_policy):
        assert resource_level(0.0, game(sustained_policy)) == pytest.approx(0.42276422764, abs=1e-10)

    def test_at_theta(self, sustained_policy):
        assert resource_level(1.0, game(sustained_policy)) == pytest.approx(0.2 / 2.3, abs=1e-12)

    def test_left_limit_at_theta(self, sustained_policy):
        g = game(sustained_policy)
        assert abs(resource_level(1.0 - 1e-9, g) - resource_level(1.0, g)) < 1e-9

    def test_beyond_theta(self, sustained_policy):
        assert resource_level(1.2, game(sustained_policy)) == 0.0

    def test_vectorised(self, sustained_policy):
        g = game(sustained_policy)
        xs = np.array([0.0, 0.5, 1.0, 1.2])
        np.testing.assert_array_equal(resource_level(xs, g), [resource_level(v, g) for v in xs])

    def test_negative_extraction(self, sustained_policy):
        with pytest.raises(DomainError):
            resource_level(-0.1, game(sustained_policy))

    def test_depleting_family_hits_zero_at_capacity(self, depleting_policy):
        g = game(depleting_policy)
        assert capacity(g) == pytest.approx(1.6 / 3)
        assert resource_level(capacity(g), g) == pytest.approx(0.0, abs=1e-12)
        assert resource_level(capacity(g) + 1e-6, g) == 0.0

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_decreasing_and_bounded(self, seed):
        g = random_instance(np.random.default_rng(seed))
        values = resource_level(np.linspace(0.0, capacity(g), 200), g)
        assert np.all(values >= 0) and np.all(values < 1)
        assert np.all(np.diff(values) <= 1e-15)


class TestUtilityAndCap:
    def test_zero_rate(self, sustained_policy):
        assert utility(0, StrategyProfile((0.0, 0.4)), game(sustained_policy, M=2)) == 0.0

    def test_depleted(self, sustained_policy):
        g = game(sustained_policy, M=2)
        profile = StrategyProfile((0.7, 0.6))
        assert utility(0, profile, g) == 0.0 and utility(1, profile, g) == 0.0

    def test_reference_value(self, sustained_policy):
        assert utility(0, StrategyProfile((0.651,)), game(sustained_policy)) == pytest.approx(0.155046, abs=1e-6)

    def test_index(self, sustained_policy):
        with pytest.raises(IndexError):
            utility(1, StrategyProfile((0.3,)), game(sustained_policy))

    def test_caps(self, sustained_policy, depleting_policy):
        assert strategy_cap(0.3, game(sustained_policy)) == pytest.approx(0.7)
        assert strategy_cap(0.0, game(depleting_policy)) == pytest.approx(1.6 / 3)

    def test_branches_meet_at_zero(self):
        g = game(Policy(2.0, 0.0, 2.1, 2.0))
        assert strategy_cap(0.25, g) == pytest.approx(0.75, abs=1e-15)

    def test_empty(self, sustained_policy, depleting_policy):
        with pytest.raises(EmptyStrategySetError):
            strategy_cap(1.1, game(sustained_policy))
        with pytest.raises(EmptyStrategySetError):
            strategy_cap(0.6, game(depleting_policy))


class TestThreshold:
    @pytest.mark.parametrize("abar_minus, expected", [(0.0, 0.70810262), (5 / 6, 0.19721456), (0.8, 0.22943262)])
    def test_reference(self, sustained_policy, abar_minus, expected):
        assert threshold_C(abar_minus, game(sustained_policy)) == pytest.approx(expected, abs=1e-8)

    def test_zero_at_theta(self, sustained_policy):
        assert threshold_C(1.0, game(sustained_policy)) == 0.0

    def test_decreasing(self, sustained_policy):
        g = game(sustained_policy)
        values = [threshold_C(v, g) for v in np.linspace(0, 1, 50)]
        assert np.all(np.diff(values) < 0)

    def test_below_upper_bound(self, sustained_policy):
        assert threshold_C(0.0, game(sustained_policy)) < sustained_policy.upper_bound

    def test_domain(self, sustained_policy):
        with pytest.raises(DomainError):
            threshold_C(1.5, game(sustained_policy))


class TestBestResponse:
    def test_cap_branch(self, saturated_policy):
        assert best_response(0.0, game(saturated_policy)) == 1.0

    def test_interior(self, sustained_policy):
        assert best_response(0.0, game(sustained_policy)) == pytest.approx(0.6509941040, abs=1e-9)

    def test_interior_matches_grid(self, sustained_policy):
        g = game(sustained_policy)
        assert abs(grid_best_response(0.0, g) - best_response(0.0, g)) <= 1e-5

    def test_cap_branch_grid(self, saturated_policy):
        assert grid_best_response(0.0, game(saturated_policy)) == pytest.approx(1.0, abs=1e-12)

    def test_linear_gap(self):
        g = game(Policy(2.0, -0.1, 4.1, 2.0))
        assert g.coeffs.a == pytest.approx(0.0, abs=1e-15)
        expected = 0.5 * (1.0 * 2.0 + 0.4 * -0.1) / 2.1
        assert best_response(0.0, g) == pytest.approx(expected, abs=1e-12)
        assert abs(grid_best_response(0.0, g) - expected) <= 1e-5

    def test_stable_form_matches_textbook(self):
        rng = np.random.default_rng(7)
        checked = 0
        while checked < 200:
            g = random_instance(rng)
            if abs(g.coeffs.a) < 1e-2 or not g.coeffs.b < 0:
                continue
            checked += 1
            abar_minus = rng.uniform(0, capacity(g))
            stable, literal = f_response(abar_minus, g), f_response_literal(abar_minus, g)
            assert stable == pytest.approx(literal, rel=1e-9, abs=1e-12)

    def test_stable_form_near_linear(self):
        # textbook root loses digits as a -> 0; the stable form tends to the linear response
        base = 0.5 * (2.0 - 0.04) / 2.1
        for eps in (1e-6, 1e-9, 1e-12):
            g = game(Policy(2.0, -0.1, 4.1 - eps, 2.0))
            assert f_response(0.0, g) == pytest.approx(base, abs=1e-5)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0, 0.999))
    def test_within_restricted_set(self, seed, frac):
        g = random_instance(np.random.default_rng(seed))
        abar_minus = frac * capacity(g)
        rate = best_response(abar_minus, g)
        assert 0.0 <= rate <= strategy_cap(abar_minus, g)


class TestDepletion:
    def test_examples(self, saturated_policy):
        assert is_depleting_equilibrium(StrategyProfile((1.1, 1.1, 1.1)), game(saturated_policy, M=3))
        assert not is_depleting_equilibrium(StrategyProfile((1.1, 0.2)), game(saturated_policy, M=2))
        assert not is_depleting_equilibrium(StrategyProfile((5.0,)), game(saturated_policy))


FAMILY = {
    # dRT0: [(M, regime, alpha_star, R_star)]
    0.8: [(1, Regime.CAP_SATURATED, 1.0, 0.8 / 2.9), (6, Regime.CAP_SATURATED, 1 / 6, 0.8 / 2.9)],
    0.2: [(1, Regime.INTERIOR_EMINUS, 0.6509941040, 0.2381685747), (5, Regime.INTERIOR_EMINUS, 0.1956126636, 0.0980833117),
          (6, Regime.CAP_SATURATED, 1 / 6, 0.2 / 2.3)],
    -1.0: [(2, Regime.INTERIOR_EMINUS, 0.1863900277, 0.1433964713)],
}


class TestSymmetricEquilibrium:
    @pytest.mark.parametrize("dRT0, M, regime, alpha_star, R_star",
                             [(d, *row) for d, rows in FAMILY.items() for row in rows])
    def test_reference_family(self, dRT0, M, regime, alpha_star, R_star):
        eq = symmetric_equilibrium(game(Policy(2.0, dRT0, 2.1, 2.0), M=M))
        assert eq.regime is regime
        assert eq.alpha_star == pytest.approx(alpha_star, abs=1e-9)
        assert eq.R_star == pytest.approx(R_star, abs=1e-9)
        assert eq.abar_star == pytest.approx(M * eq.alpha_star, abs=1e-15)
        assert eq.utility_star == pytest.approx(eq.alpha_star * eq.R_star, abs=1e-15)

    def test_negative_a_uses_larger_root(self):
        g = game(Policy(0.5, 0.1, 3.0, 0.5), M=2)
        eq = symmetric_equilibrium(g)
        assert eq.regime is Regime.INTERIOR_EPLUS
        assert eq.alpha_star == pytest.approx(max(e_roots(g)), rel=1e-12)
        run = br_iteration(g, StrategyProfile.symmetric(0.25, 2))
        assert run.converged
        assert max(abs(r - eq.alpha_star) for r in run.profile.rates) < 1e-6

    def test_linear_regime(self):
        g = game(Policy(2.0, -0.1, 4.1, 2.0), M=3)
        eq = symmetric_equilibrium(g)
        assert eq.regime is Regime.INTERIOR_LINEAR
        assert eq.alpha_star == pytest.approx(capacity(g) / 4, abs=1e-12)
        run = br_iteration(g, StrategyProfile.symmetric(0.1, 3))
        assert max(abs(r - eq.alpha_star) for r in run.profile.rates) < 1e-6

    def test_is_fixed_point_of_best_response(self, sustained_policy):
        g = game(sustained_policy, M=3)
        eq = symmetric_equilibrium(g)
        assert best_response(2 * eq.alpha_star, g) == pytest.approx(eq.alpha_star, abs=1e-12)
        run = br_iteration(g, StrategyProfile.symmetric(eq.alpha_star, 3))
        assert run.converged and run.iterations == 0

    def test_e_roots_match_bracketing(self, sustained_policy):
        g = game(sustained_policy, M=4)
        for closed, numeric in zip(e_roots(g), numeric_quadratic_roots(g)):
            assert closed == pytest.approx(numeric, abs=1e-10)
        assert equilibrium_quadratic(g)[0] == 16.0

    def test_quadratic_residual(self, depleting_policy):
        eq = symmetric_equilibrium(game(depleting_policy, M=7))
        assert quadratic_residual(eq.alpha_star, game(depleting_policy, M=7)) < 1e-12

    def test_quadratic_degenerate(self):
        with pytest.raises(InvalidPolicyError):
            equilibrium_quadratic(game(Policy(2.0, -0.1, 4.1, 2.0)))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 40))
    def test_output_invariants(self, seed, M):
        g = random_instance(np.random.default_rng(seed), M=M)
        eq = symmetric_equilibrium(g)
        assert 0.0 <= eq.R_star < 1.0
        assert eq.alpha_star * M <= g.theta + 1e-12
        assert eq.alpha_star >= 0.0
        assert abs(best_response((M - 1) * eq.alpha_star, g) - eq.alpha_star) <= 1e-10
        if eq.regime is Regime.CAP_SATURATED:
            p = g.policy
            assert eq.R_star == p.dRT0 / (p.dRT0 + p.dTR1)

    def test_record(self, saturated_policy):
        g = game(saturated_policy, M=6)
        record = symmetric_equilibrium(g).as_record(g)
        assert record["regime"] == "CapSaturated"
        assert list(record)[:7] == ["M", "dSP0", "dRT0", "dTR1", "dPS1", "alpha", "theta"]


class TestLimits:
    def test_sustainable(self, sustained_policy):
        assert limits(sustained_policy, 0.4, 1.0) == pytest.approx((1.0, 0.2 / 2.3))

    def test_depleting(self, depleting_policy):
        assert limits(game(depleting_policy)) == pytest.approx((1.6 / 3, 0.0))

    def test_continuous_at_zero(self):
        above = limits(Policy(2.0, 1e-12, 2.1, 2.0), 0.4, 1.0)
        at = limits(Policy(2.0, 0.0, 2.1, 2.0), 0.4, 1.0)
        below = limits(Policy(2.0, -1e-12, 2.1, 2.0), 0.4, 1.0)
        assert above == pytest.approx(at, abs=1e-11) and below == pytest.approx(at, abs=1e-11)

    def test_table_approaches_limit(self, depleting_policy):
        table = equilibrium_table(game(depleting_policy), [1, 10, 100, 1000, 10_000])
        abar = [eq.abar_star for _, eq in table]
        assert np.all(np.diff(abar) > 0)
        assert abs(abar[-1] - 1.6 / 3) < 1e-4
