import json

import numpy as np
import pytest

from feedback_commons import (
    GameInstance,
    Policy,
    StrategyProfile,
    capacity,
    resource_level,
    strategy_cap,
    symmetric_equilibrium,
)
from feedback_commons.oracles import (
    OracleReport,
    br_iteration,
    check_best_response,
    depletion_grid_check,
    fd_concavity_check,
    grid_best_response,
    numeric_quadratic_roots,
    numeric_threshold_C,
    ode_equilibrium_consistency,
    ode_resource_check,
    random_instance,
    run_all,
    utility_second_derivative,
)

from conftest import game

# Values computed by the oracles themselves and frozen here; the closed forms
# are tested against them elsewhere.
GRID_BR_SUSTAINED = 0.65099
NUMERIC_C = {0.0: 0.7081026212377839, 5 / 6: 0.1972145576962542}
QUADRATIC_ROOTS_M3 = (1.244471743683809, 0.2985928895769023)


class TestFrozenOracleValues:
    def test_grid_best_response(self, sustained_policy):
        assert grid_best_response(0.0, game(sustained_policy)) == pytest.approx(GRID_BR_SUSTAINED, abs=1e-12)

    @pytest.mark.parametrize("abar_minus", list(NUMERIC_C))
    def test_numeric_threshold(self, sustained_policy, abar_minus):
        assert numeric_threshold_C(abar_minus, game(sustained_policy)) == pytest.approx(NUMERIC_C[abar_minus], abs=1e-12)

    def test_numeric_roots(self, sustained_policy):
        assert numeric_quadratic_roots(game(sustained_policy, M=3)) == pytest.approx(QUADRATIC_ROOTS_M3, abs=1e-12)

    def test_grid_resolution_validated(self, sustained_policy):
        with pytest.raises(ValueError):
            grid_best_response(0.0, game(sustained_policy), resolution=0.0)


class TestBestResponseIteration:
    def test_symmetric_start(self, sustained_policy):
        g = game(sustained_policy, M=3)
        run = br_iteration(g, StrategyProfile.symmetric(1 / 6, 3), tol=1e-8)
        assert run.converged
        eq = symmetric_equilibrium(g)
        assert max(abs(r - eq.alpha_star) for r in run.profile.rates) < 1e-8

    def test_fixed_point_start(self, sustained_policy):
        g = game(sustained_policy, M=3)
        start = StrategyProfile.symmetric(symmetric_equilibrium(g).alpha_star, 3)
        run = br_iteration(g, start)
        assert run.iterations == 0 and run.profile == start

    def test_asymmetric_start_is_reported(self, sustained_policy):
        # no ground truth: only the reporting contract is checked
        g = game(sustained_policy, M=3)
        run = br_iteration(g, StrategyProfile((0.3, 1 / 30, 0.5 / 3)))
        assert isinstance(run.converged, bool) and isinstance(run.symmetric, bool)
        assert run.iterations <= 10_000

    def test_iteration_budget(self, sustained_policy):
        run = br_iteration(game(sustained_policy, M=3), StrategyProfile.symmetric(0.01, 3), max_iter=1)
        assert not run.converged and run.residual > 0

    def test_profile_size(self, sustained_policy):
        with pytest.raises(ValueError):
            br_iteration(game(sustained_policy, M=2), StrategyProfile((0.1,)))


class TestConcavity:
    def test_reference_family(self, sustained_policy):
        report = fd_concavity_check(game(sustained_policy), 1000)
        assert report.passed and report.instances_checked == 1000

    def test_sign_decomposition(self):
        # the curvature has the sign of -1 + (alpha_i/(alpha+theta)) * a / dg/dn at the total
        rng = np.random.default_rng(11)
        for _ in range(100):
            g = random_instance(rng)
            co = g.coeffs
            abar_minus = rng.uniform(0, 0.9 * capacity(g))
            alpha_i = rng.uniform(0.01, 0.99) * strategy_cap(abar_minus, g)
            s = g.alpha + g.theta
            x = (g.alpha + abar_minus + alpha_i) / s
            factor = -1.0 + alpha_i / s * co.a / (co.a * x + co.c)
            curvature = utility_second_derivative(alpha_i, abar_minus, g)
            assert np.sign(curvature) == np.sign(factor)
            # finite differences agree with the closed form
            u = lambda v: v * resource_level(abar_minus + v, g)
            h = 1e-4
            fd = (u(alpha_i + h) - 2 * u(alpha_i) + u(alpha_i - h)) / h**2
            assert fd == pytest.approx(curvature, rel=1e-3, abs=1e-6)


class TestDynamicsOracles:
    def test_interior_equilibrium(self, sustained_policy):
        report = ode_equilibrium_consistency(game(sustained_policy))
        assert report.passed
        assert report.worst_instance["final_n"] == pytest.approx(0.23817, abs=1e-3)

    def test_collapse(self, sustained_policy):
        assert ode_resource_check(game(sustained_policy, M=2), 1.5, 0.0).passed

    def test_no_extraction(self, sustained_policy):
        g = game(sustained_policy)
        assert ode_resource_check(g, 0.0, resource_level(0.0, g)).passed

    def test_near_saturation_resolvable_offset(self, saturated_policy):
        # just below theta the attractor is unique; at a resolvable offset the
        # integration lands on the resource map value there
        g = game(saturated_policy, M=2)
        abar = 0.9
        assert ode_resource_check(g, abar, resource_level(abar, g)).passed


class TestDepletionGrid:
    def test_small_grid(self):
        g = GameInstance(3, Policy(2.0, 0.2, 2.1, 2.0), 0.4, 1.03)
        report = depletion_grid_check(g, resolution=0.1)
        assert report.passed and report.instances_checked == 16**3


class TestReports:
    def test_json(self):
        report = OracleReport("x", 3, 0.5, 1.0, {"M": 1})
        data = json.loads(report.to_json())
        assert data["pass"] is True and data["name"] == "x"
        assert not OracleReport("x", 3, 2.0, 1.0, {}).passed

    def test_seeded_suites_are_reproducible(self):
        a = check_best_response(np.random.default_rng(5), 10)
        b = check_best_response(np.random.default_rng(5), 10)
        assert a == b

    def test_quick_suite(self):
        reports = run_all(seed=1, quick=True)
        assert all(r.passed for r in reports), [r.name for r in reports if not r.passed]
        assert [r.to_json() for r in reports] == [r.to_json() for r in run_all(seed=1, quick=True)]
