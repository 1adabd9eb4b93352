"""Brute-force and numerical cross-checks for every closed form in the package.

Each oracle reaches its answer by a route that does not reuse the formula
it checks: grid search instead of the best-response root, bracketing root
finders instead of the quadratic formula, finite differences instead of
the second-derivative identity, and ODE integration instead of the
steady-state map.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from .dynamics import GreedyPopulation, RateParams, classify_multi, integrate, multi_population_field, Sustained
from .equilibrium import (
    GameInstance,
    Regime,
    StrategyProfile,
    best_response,
    capacity,
    e_roots,
    equilibrium_quadratic,
    is_depleting_equilibrium,
    resource_level,
    strategy_cap,
    symmetric_equilibrium,
    threshold_C,
)
from .exceptions import EmptyStrategySetError
from .game import Policy, g_coefficients

__all__ = [
    "OracleReport",
    "BRIterationResult",
    "random_policy",
    "random_instance",
    "grid_best_response",
    "br_iteration",
    "utility_second_derivative",
    "fd_concavity_check",
    "marginal_utility",
    "numeric_threshold_C",
    "numeric_quadratic_roots",
    "quadratic_residual",
    "ode_resource_check",
    "ode_equilibrium_consistency",
    "check_ode_equilibrium",
    "depletion_grid_check",
    "check_y_identity",
    "check_best_response",
    "check_threshold_C",
    "check_e_roots",
    "check_br_iteration",
    "check_concavity",
    "check_resource_continuity",
    "check_regime_continuity",
    "check_dynamics",
    "random_sustained_rates",
    "slowest_decay_rate",
    "run_all",
    "DEFAULT_SEED",
]

DEFAULT_SEED = 42


@dataclass
class OracleReport:
    name: str
    instances_checked: int
    max_abs_error: float
    tolerance: float
    worst_instance: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.max_abs_error <= self.tolerance)

    def to_json(self) -> str:
        record = asdict(self)
        record["pass"] = self.passed
        return json.dumps(record, sort_keys=True)


class _Worst:
    """Running maximum of an error together with the instance that produced it."""

    def __init__(self):
        self.error = 0.0
        self.instance = {}
        self.count = 0

    def update(self, error, instance):
        self.count += 1
        if not error <= self.error:  # also catches NaN
            self.error = float(error)
            self.instance = instance

    def report(self, name, tolerance):
        return OracleReport(name, self.count, self.error, tolerance, self.instance)


def _describe(game: GameInstance, **extra) -> dict:
    return {"M": game.M, **game.policy.as_dict(), "alpha": game.alpha, "theta": game.theta, **extra}


def random_policy(rng: np.random.Generator, alpha: float, theta: float) -> Policy:
    """Draw a responsible policy for the given rates."""
    while True:
        dSP0 = rng.uniform(0.5, 3.0)
        dTR1 = rng.uniform(0.5, 3.0)
        dPS1 = rng.uniform(0.5, 3.0)
        lower = max(-theta / alpha * dSP0, -dTR1)
        dRT0 = rng.uniform(lower, dTR1 / dPS1 * dSP0)
        if dRT0 > -dTR1:
            return Policy(dSP0, dRT0, dTR1, dPS1)


def random_instance(rng: np.random.Generator, M: int = 1) -> GameInstance:
    alpha = rng.uniform(0.1, 1.0)
    theta = rng.uniform(0.5, 2.0)
    return GameInstance(M, random_policy(rng, alpha, theta), alpha, theta)


# -- best responses ---------------------------------------------------------


def grid_best_response(abar_minus: float, game: GameInstance, resolution: float = 1e-5) -> float:
    """Maximise agent ``i``'s utility over a uniform grid of its restricted set."""
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    cap = strategy_cap(abar_minus, game)
    grid = np.linspace(0.0, cap, int(math.ceil(cap / resolution)) + 1)
    # keep round-off in abar_minus + cap from stepping past capacity
    totals = np.minimum(abar_minus + grid, capacity(game))
    values = grid * resource_level(totals, game)
    return float(grid[np.argmax(values)])


@dataclass
class BRIterationResult:
    profile: StrategyProfile
    converged: bool
    iterations: int
    residual: float

    @property
    def symmetric(self) -> bool:
        rates = self.profile.rates
        return max(rates) - min(rates) <= 1e-6 * max(1.0, max(rates))


def _response_or_zero(abar_minus, game):
    try:
        return best_response(abar_minus, game)
    except EmptyStrategySetError:
        return 0.0


def br_iteration(
    game: GameInstance, init: StrategyProfile, max_iter: int = 10_000, tol: float = 1e-8
) -> BRIterationResult:
    """Synchronous best-response dynamics with adaptive damping.

    Every agent responds to the others' previous rates.  The step weight
    starts at 1 and is halved whenever the residual flips direction without
    at least halving, which tames the overshoot of steep response maps.
    Agents whose restricted set is empty respond with 0.
    """
    rates = np.array(init.rates, dtype=float)
    if len(rates) != game.M:
        raise ValueError(f"profile has {len(rates)} agents, game has M={game.M}")
    weight = 1.0
    prev = None
    residual = math.inf
    for it in range(max_iter + 1):
        total = math.fsum(rates)
        br = np.array([_response_or_zero(max(total - r, 0.0), game) for r in rates])
        step = br - rates
        residual = float(np.max(np.abs(step)))
        if residual < tol:
            return BRIterationResult(StrategyProfile(rates), True, it, residual)
        if it == max_iter:
            break
        if prev is not None and step @ prev < 0 and np.linalg.norm(step) > 0.5 * np.linalg.norm(prev):
            weight *= 0.5
        prev = step
        rates = rates + weight * step
    return BRIterationResult(StrategyProfile(rates), False, max_iter, residual)


# -- concavity --------------------------------------------------------------


def _utility_of(alpha_i, abar_minus, game):
    return alpha_i * resource_level(abar_minus + alpha_i, game)


def utility_second_derivative(alpha_i: float, abar_minus: float, game: GameInstance) -> float:
    """Closed-form curvature of agent ``i``'s utility on the sustainable branch."""
    co = game.coeffs
    s = game.alpha + game.theta
    x = (game.alpha + abar_minus + alpha_i) / s
    h = co.a * x + co.c
    return 2.0 * co.Y / (s * h * h) * (-1.0 + alpha_i / s * co.a / h)


def fd_concavity_check(
    game: GameInstance,
    samples: int,
    rng: np.random.Generator | None = None,
    step: float = 1e-5,
    margin: float = 1e-4,
    tolerance: float = 1e-6,
) -> OracleReport:
    """Central-difference curvature of the utility at random interior points.

    Points keep ``margin`` away from both ends of the restricted set so the
    stencil never straddles the kink at the capacity.
    """
    rng = np.random.default_rng(DEFAULT_SEED) if rng is None else rng
    cap_total = capacity(game)
    worst = _Worst()
    drawn = 0
    while drawn < samples:
        abar_minus = rng.uniform(0.0, cap_total)
        cap = cap_total - abar_minus
        if cap <= 2 * margin:
            continue
        drawn += 1
        a_i = rng.uniform(margin, cap - margin)
        u0 = _utility_of(a_i, abar_minus, game)
        up = _utility_of(a_i + step, abar_minus, game)
        um = _utility_of(a_i - step, abar_minus, game)
        curvature = (up - 2.0 * u0 + um) / (step * step)
        worst.update(max(curvature, 0.0), _describe(game, alpha_i=a_i, abar_minus=abar_minus))
    return worst.report("fd_concavity", tolerance)


# -- threshold and quadratic roots --------------------------------------------


def marginal_utility(alpha_i: float, abar_minus: float, policy: Policy, alpha: float, theta: float) -> float:
    """Derivative of ``alpha_i * R`` in ``alpha_i`` via the quotient rule on the raw gap."""
    co = g_coefficients(policy)
    s = alpha + theta
    x = (alpha + abar_minus + alpha_i) / s
    G, h = co.b * x + co.d, co.a * x + co.c
    R = -G / h
    dR = -(co.b * h - G * co.a) / (h * h) / s
    return R + alpha_i * dR


def numeric_threshold_C(abar_minus: float, game: GameInstance) -> float:
    """Root in ``dRT0`` of the marginal utility at the top of the restricted set."""
    p, alpha, theta = game.policy, game.alpha, game.theta

    def at_cap(dRT0):
        trial = Policy(p.dSP0, dRT0, p.dTR1, p.dPS1)
        return marginal_utility(theta - abar_minus, abar_minus, trial, alpha, theta)

    hi = p.upper_bound
    if at_cap(0.0) >= 0:
        return 0.0
    return brentq(at_cap, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def quadratic_residual(gamma: float, game: GameInstance) -> float:
    """``|Q(gamma)|`` relative to the sum of the magnitudes of its three terms."""
    A, K1, K0 = equilibrium_quadratic(game)
    terms = (A * gamma * gamma, K1 * gamma, K0)
    return abs(math.fsum(terms)) / sum(abs(t) for t in terms)


def numeric_quadratic_roots(game: GameInstance) -> tuple[float, float]:
    """``(E_plus, E_minus)`` by bracketing the roots of ``Q`` either side of its vertex."""
    A, K1, K0 = equilibrium_quadratic(game)

    def Q(g):
        return (A * g + K1) * g + K0

    vertex = -K1 / (2 * A)
    span = abs(vertex) + math.sqrt(abs(K0) / A) + abs(K1) / A + 1.0
    hi = brentq(Q, vertex, vertex + span, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    lo = brentq(Q, vertex - span, vertex, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return hi, lo


# -- dynamics ---------------------------------------------------------------


def _random_starts(rng, count, dim):
    return rng.uniform(0.05, 0.95, size=(count, dim))


def ode_resource_check(
    game: GameInstance,
    abar: float,
    target: float,
    *,
    starts: int = 5,
    rng: np.random.Generator | None = None,
    dt: float = 0.01,
    t_end: float = 2000.0,
    eps: float = 1.0,
    tolerance: float = 1e-3,
    name: str = "ode_resource",
) -> OracleReport:
    """Integrate with ``M`` greedy populations sharing ``abar`` equally; compare final ``n`` with ``target``."""
    rng = np.random.default_rng(DEFAULT_SEED) if rng is None else rng
    rates = RateParams(
        game.alpha, game.theta, eps, tuple(GreedyPopulation(abar / game.M) for _ in range(game.M))
    )
    traj = integrate(multi_population_field(rates, game.policy), _random_starts(rng, starts, game.M + 2), t_end, dt)
    final_n = traj.final[:, -1]
    errors = np.abs(final_n - target)
    k = int(np.argmax(errors))
    worst = _Worst()
    worst.count = starts - 1
    worst.update(errors[k], _describe(game, abar=abar, final_n=float(final_n[k]), target=target))
    return worst.report(name, tolerance)


def ode_equilibrium_consistency(game: GameInstance, eq=None, **kwargs) -> OracleReport:
    """Integrate the population dynamics at the equilibrium rates and compare ``n`` with ``R_star``.

    A saturated equilibrium is run at total extraction ``theta - 1e-6``,
    where the attractor is unique.  Its responsible share then sits within
    about 1e-6 of 1 and the approach is extremely slow, so saturated
    instances need horizons far beyond the default.
    """
    eq = symmetric_equilibrium(game) if eq is None else eq
    abar = eq.abar_star
    if eq.regime is Regime.CAP_SATURATED and abar >= game.theta:
        abar = game.theta - 1e-6
    return ode_resource_check(game, abar, eq.R_star, name="ode_equilibrium_consistency", **kwargs)


def depletion_grid_check(game: GameInstance, resolution: float = 0.05, upper: float | None = None) -> OracleReport:
    """Compare the depletion-equilibrium predicate with exhaustive deviation checks for 3 agents.

    A profile is a depleted equilibrium when the resource is gone and no
    agent can earn a positive payoff by changing its own rate, searched on a
    deviation grid 50 times finer than the profile grid.  The predicate
    treats ``theta`` as the capacity, so instances need ``dRT0 > 0`` and a
    ``theta`` off the profile lattice.
    """
    upper = 1.5 * game.theta if upper is None else upper
    levels = np.arange(0.0, upper + 0.5 * resolution, resolution)
    deviations = np.arange(0.0, upper + 0.5 * resolution / 50, resolution / 50)
    # deviation payoffs depend only on the others' total
    gainful = {}
    worst = _Worst()
    for a1 in levels:
        for a2 in levels:
            for a3 in levels:
                rates = (a1, a2, a3)
                total = a1 + a2 + a3
                brute = resource_level(total, game) == 0.0
                if brute:
                    for r in rates:
                        others = round(total - r, 12)
                        if others not in gainful:
                            payoff = deviations * resource_level(others + deviations, game)
                            gainful[others] = bool(np.any(payoff > 0.0))
                        if gainful[others]:
                            brute = False
                            break
                predicate = is_depleting_equilibrium(StrategyProfile(rates), game)
                worst.update(float(brute != predicate), _describe(game, rates=list(rates)))
    return worst.report("depletion_grid", 0.0)


# -- suites -----------------------------------------------------------------


def check_y_identity(rng: np.random.Generator, count: int = 10_000) -> OracleReport:
    """Both expressions of ``Y`` agree in relative terms on random valid policies."""
    worst = _Worst()
    for _ in range(count):
        dTR1, dPS1 = rng.uniform(0.1, 5.0, size=2)
        dSP0 = rng.uniform(-dPS1, 5.0)
        dRT0 = rng.uniform(-dTR1, 5.0)
        if dSP0 <= -dPS1 or dRT0 <= -dTR1:
            continue
        co = g_coefficients(Policy(dSP0, dRT0, dTR1, dPS1))
        alt = co.b * co.c - co.a * co.d
        scale = max(abs(co.Y), abs(dTR1 * dSP0), abs(dRT0 * dPS1))
        worst.update(abs(co.Y - alt) / scale, {"dSP0": dSP0, "dRT0": dRT0, "dTR1": dTR1, "dPS1": dPS1})
    return worst.report("y_identity", 1e-12)


def check_best_response(rng: np.random.Generator, count: int = 200, resolution: float = 1e-5) -> OracleReport:
    worst = _Worst()
    for _ in range(count):
        game = random_instance(rng)
        abar_minus = rng.uniform(0.0, capacity(game))
        closed = best_response(abar_minus, game)
        grid = grid_best_response(abar_minus, game, resolution)
        worst.update(abs(closed - grid), _describe(game, abar_minus=abar_minus, closed=closed, grid=grid))
    return worst.report("best_response_vs_grid", 2 * resolution)


def check_threshold_C(rng: np.random.Generator, count: int = 200) -> OracleReport:
    worst = _Worst()
    for _ in range(count):
        game = random_instance(rng)
        abar_minus = rng.uniform(0.0, game.theta)
        closed = threshold_C(abar_minus, game)
        numeric = numeric_threshold_C(abar_minus, game)
        worst.update(abs(closed - numeric), _describe(game, abar_minus=abar_minus))
    return worst.report("threshold_C_vs_root", 1e-9)


def check_e_roots(rng: np.random.Generator, count: int = 200) -> OracleReport:
    worst = _Worst()
    checked = 0
    while checked < count:
        game = random_instance(rng, M=int(rng.integers(1, 13)))
        if abs(game.coeffs.a) < 1e-3 or not game.coeffs.b < 0:
            continue
        checked += 1
        closed = e_roots(game)
        numeric = numeric_quadratic_roots(game)
        err = max(abs(c - n) / max(1.0, abs(n)) for c, n in zip(closed, numeric))
        worst.update(err, _describe(game))
    return worst.report("e_roots_vs_bracketing", 1e-10)


def check_br_iteration(rng: np.random.Generator, count: int = 100, tol: float = 1e-8) -> tuple[OracleReport, OracleReport]:
    """Best-response iteration limit vs closed form, plus the quadratic residual.

    Returns the ``alpha*`` agreement report and the interior-regime
    residual report.
    """
    worst = _Worst()
    resid = _Worst()
    for _ in range(count):
        game = random_instance(rng, M=int(rng.integers(1, 9)))
        eq = symmetric_equilibrium(game)
        run = br_iteration(game, StrategyProfile.symmetric(game.theta / (2 * game.M), game.M), tol=tol)
        err = max(abs(r - eq.alpha_star) for r in run.profile.rates) if run.converged else math.inf
        worst.update(err, _describe(game, regime=eq.regime.value, iterations=run.iterations))
        if eq.regime in (Regime.INTERIOR_EPLUS, Regime.INTERIOR_EMINUS):
            resid.update(quadratic_residual(eq.alpha_star, game), _describe(game))
    return worst.report("br_iteration_vs_closed_form", 1e-6), resid.report("quadratic_residual", 1e-9)


def check_concavity(rng: np.random.Generator, instances: int = 100, samples: int = 10) -> OracleReport:
    worst = _Worst()
    for _ in range(instances):
        game = random_instance(rng)
        rep = fd_concavity_check(game, samples, rng)
        worst.count += rep.instances_checked - 1
        worst.update(rep.max_abs_error, rep.worst_instance)
    return worst.report("fd_concavity", 1e-6)


def check_resource_continuity(rng: np.random.Generator, count: int = 200) -> OracleReport:
    """Mismatch between the two branches of the resource map where they meet at ``theta``.

    The sustained-branch formula is evaluated at ``abar = theta`` and
    compared with the line-segment value used there, for ``dRT0 > 0``.
    """
    worst = _Worst()
    while worst.count < count:
        game = random_instance(rng)
        if game.policy.dRT0 <= 0:
            continue
        co = game.coeffs
        branch = -(co.b + co.d) / (co.a + co.c)
        worst.update(abs(resource_level(game.theta, game) - branch), _describe(game))
    return worst.report("resource_continuity_at_theta", 1e-9)


def check_regime_continuity(rng: np.random.Generator, count: int = 100, offset: float = 1e-6) -> OracleReport:
    """``alpha*`` on either side of the saturation threshold in ``dRT0``."""
    worst = _Worst()
    while worst.count < count:
        base = random_instance(rng, M=int(rng.integers(2, 13)))
        p, M = base.policy, base.M
        edge = threshold_C((M - 1) * base.theta / M, base)
        if not edge + offset < p.upper_bound:
            continue
        values = []
        for dRT0 in (edge - offset, edge + offset):
            game = GameInstance(M, Policy(p.dSP0, dRT0, p.dTR1, p.dPS1), base.alpha, base.theta)
            values.append(symmetric_equilibrium(game).alpha_star)
        worst.update(abs(values[0] - values[1]), _describe(base, threshold=edge))
    return worst.report("regime_boundary_continuity", 1e-3)


def slowest_decay_rate(rates: RateParams, policy: Policy, outcome: Sustained) -> float:
    """Smallest decay rate of the linearised dynamics at a sustained fixed point.

    Uses the Jacobian eigenvalues of the ``(x, n)`` block and the
    linear decay rates ``-g_i(0, n*)`` of the greedy shares.
    """
    co = g_coefficients(policy)
    x, n = outcome.xstar, outcome.nstar
    jac = np.array([
        [x * (1 - x) * (co.a * n + co.b), x * (1 - x) * (co.a * x + co.c)],
        [rates.eps * n * (1 - n) * (rates.alpha + rates.theta), 0.0],
    ])
    rate = float(-np.max(np.linalg.eigvals(jac).real))
    for g in rates.greedy:
        gco = g.policy.coefficients()
        rate = min(rate, -(gco.c * n + gco.d))
    return rate


def random_sustained_rates(
    rng: np.random.Generator, max_M: int = 4, eps: float = 1.0, min_decay: float = 0.0
) -> tuple[RateParams, Policy]:
    """A random multi-population instance whose predicted outcome is sustained.

    ``min_decay`` rejects instances whose slowest linear mode decays more
    slowly than that rate (near the neutral-orbit boundary convergence
    takes arbitrarily long).
    """
    while True:
        alpha = rng.uniform(0.1, 1.0)
        theta = rng.uniform(0.5, 2.0)
        policy = random_policy(rng, alpha, theta)
        M = int(rng.integers(1, max_M + 1))
        shares = rng.dirichlet(np.ones(M))
        abar = rng.uniform(0.0, 0.8) * theta
        greedy = tuple(GreedyPopulation(abar * s, rng.uniform(0.5, 2.0)) for s in shares)
        rates = RateParams(alpha, theta, eps, greedy)
        outcome = classify_multi(rates, policy)
        if isinstance(outcome, Sustained) and slowest_decay_rate(rates, policy, outcome) >= min_decay:
            return rates, policy


def check_dynamics(
    rng: np.random.Generator, sustained: int = 20, collapsing: int = 5, starts: int = 5,
    dt: float = 0.01, t_end: float = 2000.0, min_decay: float = 5e-3,
) -> tuple[OracleReport, OracleReport]:
    """Long-run integration against the predicted steady state.

    Sustained instances are drawn with a slowest linear decay rate of at
    least ``min_decay`` so that ``t_end`` resolves them.  Returns the sustained-instance report (max-norm distance to the
    predicted fixed point) and the collapse report (final resource level).
    """
    near = _Worst()
    for _ in range(sustained):
        rates, policy = random_sustained_rates(rng, min_decay=min_decay)
        outcome = classify_multi(rates, policy)
        target = np.array([outcome.xstar, *([0.0] * rates.M), outcome.nstar])
        traj = integrate(
            multi_population_field(rates, policy), _random_starts(rng, starts, rates.M + 2), t_end, dt
        )
        err = float(np.max(np.abs(traj.final - target)))
        near.update(err, {**policy.as_dict(), "alpha": rates.alpha, "theta": rates.theta,
                          "greedy_alpha": [g.alpha for g in rates.greedy]})
    gone = _Worst()
    for _ in range(collapsing):
        alpha = rng.uniform(0.1, 1.0)
        theta = rng.uniform(0.5, 2.0)
        policy = random_policy(rng, alpha, theta)
        M = int(rng.integers(1, 5))
        abar = rng.uniform(1.1, 2.0) * theta
        rates = RateParams(alpha, theta, 1.0, tuple(GreedyPopulation(abar / M) for _ in range(M)))
        traj = integrate(multi_population_field(rates, policy), _random_starts(rng, starts, M + 2), t_end, dt)
        gone.update(float(np.max(traj.final[:, -1])), {**policy.as_dict(), "alpha": alpha, "theta": theta, "abar": abar})
    return near.report("dynamics_sustained", 1e-3), gone.report("dynamics_collapse", 1e-3)


def check_ode_equilibrium(rng: np.random.Generator, count: int = 5) -> OracleReport:
    """Dynamics against interior symmetric equilibria of random instances."""
    worst = _Worst()
    while worst.count < count:
        game = random_instance(rng, M=int(rng.integers(1, 5)))
        eq = symmetric_equilibrium(game)
        if eq.regime is Regime.CAP_SATURATED:
            continue
        rates = RateParams(game.alpha, game.theta, 1.0, tuple(GreedyPopulation(eq.alpha_star) for _ in range(game.M)))
        outcome = classify_multi(rates, game.policy)
        if not isinstance(outcome, Sustained) or slowest_decay_rate(rates, game.policy, outcome) < 5e-3:
            continue
        rep = ode_equilibrium_consistency(game, eq, rng=rng)
        worst.update(rep.max_abs_error, rep.worst_instance)
    return worst.report("ode_equilibrium_consistency", 1e-3)


def run_all(seed: int = DEFAULT_SEED, quick: bool = False) -> list[OracleReport]:
    """Every oracle with a seeded generator, in a fixed order.

    ``quick`` shrinks instance counts for smoke runs; tolerances are unchanged.
    """
    rng = np.random.default_rng(seed)
    scale = 0.1 if quick else 1.0

    def n(count):
        return max(1, int(count * scale))

    reports = [
        check_y_identity(rng, n(10_000)),
        check_best_response(rng, n(200)),
        check_threshold_C(rng, n(200)),
        check_e_roots(rng, n(200)),
        *check_br_iteration(rng, n(100)),
        check_concavity(rng, n(100), 10),
        check_resource_continuity(rng, n(200)),
        check_regime_continuity(rng, n(100)),
        *check_dynamics(rng, n(20), n(5)),
        check_ode_equilibrium(rng, n(10)),
    ]
    dep_game = GameInstance(3, Policy(2.0, 0.2, 2.1, 2.0), 0.4, 1.03)
    reports.append(depletion_grid_check(dep_game, 0.05 if not quick else 0.1))
    return reports
