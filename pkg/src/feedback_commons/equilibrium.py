"""The resource extraction game played by the greedy populations' principals.

Each of ``M`` agents picks an extraction rate ``alpha_i >= 0`` and earns
``alpha_i * R(abar)``, where ``R`` is the steady-state resource level the
low-level dynamics settle at under total greedy extraction ``abar``.
This module gives the resource map, the restricted strategy sets, the
closed-form best responses and the unique symmetric Nash equilibrium,
together with its large-``M`` limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .exceptions import DomainError, EmptyStrategySetError, InvalidPolicyError
from .game import GCoefficients, Policy, g_coefficients, is_responsible

__all__ = [
    "GameInstance",
    "StrategyProfile",
    "Regime",
    "EquilibriumResult",
    "resource_level",
    "utility",
    "capacity",
    "strategy_cap",
    "threshold_C",
    "best_response",
    "f_response",
    "f_response_literal",
    "is_depleting_equilibrium",
    "equilibrium_quadratic",
    "e_roots",
    "symmetric_equilibrium",
    "limits",
    "equilibrium_table",
    "A_DEADBAND",
]

A_DEADBAND = 1e-9
RADICAND_SLACK = 1e-12


@dataclass(frozen=True)
class GameInstance:
    """``M`` identical greedy agents facing a responsible population.

    The responsible population's policy must sustain the resource on its
    own; otherwise the constrained game has no feasible profile.
    """

    M: int
    policy: Policy
    alpha: float
    theta: float

    def __post_init__(self):
        if isinstance(self.M, bool) or int(self.M) != self.M or self.M < 1:
            raise DomainError(f"M must be a positive integer, got {self.M!r}")
        object.__setattr__(self, "M", int(self.M))
        if not isinstance(self.policy, Policy):
            raise InvalidPolicyError(f"expected a Policy, got {type(self.policy).__name__}")
        if not (self.alpha > 0 and self.theta > 0):
            raise DomainError(f"alpha and theta must be positive, got {self.alpha}, {self.theta}")
        if not is_responsible(self.policy, self.alpha, self.theta):
            p = self.policy
            raise InvalidPolicyError(
                "policy is not responsible: need max(-theta/alpha*dSP0, -dTR1) <= dRT0 "
                f"< dTR1/dPS1*dSP0, got dSP0={p.dSP0}, dRT0={p.dRT0} "
                f"(bounds {max(-self.theta / self.alpha * p.dSP0, -p.dTR1):.6g}, {p.upper_bound:.6g})"
            )

    @property
    def coeffs(self) -> GCoefficients:
        return g_coefficients(self.policy)

    def with_M(self, M: int) -> "GameInstance":
        return GameInstance(M, self.policy, self.alpha, self.theta)


@dataclass(frozen=True)
class StrategyProfile:
    rates: tuple[float, ...]

    def __post_init__(self):
        rates = tuple(float(r) for r in self.rates)
        if any(not (r >= 0) for r in rates):
            raise DomainError(f"extraction rates must be non-negative, got {rates}")
        object.__setattr__(self, "rates", rates)

    @classmethod
    def symmetric(cls, rate: float, M: int) -> "StrategyProfile":
        return cls((rate,) * M)

    @property
    def abar(self) -> float:
        return math.fsum(self.rates)

    def abar_minus(self, i: int) -> float:
        return math.fsum(r for j, r in enumerate(self.rates) if j != i)


class Regime(str, Enum):
    CAP_SATURATED = "CapSaturated"
    INTERIOR_EPLUS = "InteriorEplus"
    INTERIOR_EMINUS = "InteriorEminus"
    INTERIOR_LINEAR = "InteriorLinear"


@dataclass(frozen=True)
class EquilibriumResult:
    alpha_star: float
    regime: Regime
    abar_star: float
    R_star: float
    utility_star: float

    def as_record(self, game: GameInstance) -> dict:
        """Flat record suitable for CSV/JSON output."""
        return {
            "M": game.M,
            **game.policy.as_dict(),
            "alpha": game.alpha,
            "theta": game.theta,
            "alpha_star": self.alpha_star,
            "regime": self.regime.value,
            "abar_star": self.abar_star,
            "R_star": self.R_star,
            "utility_star": self.utility_star,
        }


def capacity(game: GameInstance) -> float:
    """Largest total extraction that still leaves a positive resource branch."""
    p = game.policy
    if p.dRT0 > 0:
        return game.theta
    return (game.alpha * p.dRT0 + game.theta * p.dSP0) / (p.dSP0 - p.dRT0)


def resource_level(abar, game: GameInstance):
    """Steady-state resource level under total greedy extraction ``abar``.

    Works elementwise on arrays.  At ``abar == theta`` the highest stable
    level of the line segment of fixed points is used, which keeps the map
    left-continuous there.
    """
    p, alpha, theta = game.policy, game.alpha, game.theta
    co = game.coeffs
    arr = np.asarray(abar, dtype=float)
    if np.any(arr < 0):
        raise DomainError("total extraction must be non-negative")
    x = (alpha + arr) / (alpha + theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        lower = np.maximum((arr - theta) / (alpha + arr) * p.dSP0, -p.dTR1)
        interior = -(co.b * x + co.d) / (co.a * x + co.c)
    sustained = (arr < theta) & (lower <= p.dRT0) & (p.dRT0 < p.upper_bound)
    # round-off can push the sustained branch a few ulps below zero at capacity
    level = np.where(sustained, np.maximum(interior, 0.0), 0.0)
    if p.dRT0 > 0:
        level = np.where(arr == theta, p.dRT0 / (p.dRT0 + p.dTR1), level)
    if level.ndim == 0:
        return float(level)
    return level


def utility(i: int, profile: StrategyProfile, game: GameInstance) -> float:
    """Payoff ``alpha_i * R(abar)`` of agent ``i``; zero outside the sustainable set."""
    if not 0 <= i < len(profile.rates):
        raise IndexError(f"agent index {i} out of range for {len(profile.rates)} agents")
    return profile.rates[i] * resource_level(profile.abar, game)


def strategy_cap(abar_minus: float, game: GameInstance) -> float:
    """Upper end of agent ``i``'s restricted strategy set ``[0, cap]``."""
    if not abar_minus >= 0:
        raise DomainError(f"abar_minus must be non-negative, got {abar_minus}")
    p, alpha, theta = game.policy, game.alpha, game.theta
    if p.dRT0 > 0:
        if abar_minus > theta:
            raise EmptyStrategySetError(
                f"others already extract {abar_minus} > theta={theta}; no sustainable rate left"
            )
        return theta - abar_minus
    if (abar_minus - theta) / (alpha + abar_minus) * p.dSP0 > p.dRT0:
        raise EmptyStrategySetError(
            f"others already extract {abar_minus} beyond capacity {capacity(game):.6g}"
        )
    return max(capacity(game) - abar_minus, 0.0)


def threshold_C(abar_minus: float, game: GameInstance) -> float:
    """Smallest ``dRT0`` at which agent ``i`` prefers the full remaining capacity.

    It is the positive root in ``dRT0`` of the marginal utility evaluated at
    ``alpha_i = theta - abar_minus``; decreasing in ``abar_minus`` and zero
    at ``abar_minus = theta``.
    """
    p, alpha, theta = game.policy, game.alpha, game.theta
    if abar_minus > theta:
        raise DomainError(f"abar_minus must not exceed theta, got {abar_minus} > {theta}")
    q = (theta - abar_minus) / (alpha + theta)
    lin = p.dTR1 + q * p.dPS1
    return 0.5 * (-lin + math.sqrt(lin * lin + 4.0 * q * p.dTR1 * p.dSP0))


def _checked_sqrt(value: float, what: str) -> float:
    if value < 0:
        if value < -RADICAND_SLACK:
            raise InvalidPolicyError(f"negative radicand {value:.3g} in {what}")
        return 0.0
    return math.sqrt(value)


def _at_hat(abar_minus: float, game: GameInstance) -> tuple[float, float]:
    """``(dg/dn, g(., 0))`` at ``(alpha + abar_minus) / (alpha + theta)``."""
    co = game.coeffs
    xhat = (game.alpha + abar_minus) / (game.alpha + game.theta)
    return co.a * xhat + co.c, co.b * xhat + co.d


def f_response(abar_minus: float, game: GameInstance) -> float:
    """Interior critical point of agent ``i``'s utility.

    Rationalised form of the root; free of the cancellation the textbook
    expression suffers when ``a`` is small, and exact at ``a = 0``.
    """
    co = game.coeffs
    h, G = _at_hat(abar_minus, game)
    if not co.b < 0:
        raise InvalidPolicyError(f"interior best response needs b < 0, got b={co.b}")
    root = _checked_sqrt(h * co.Y / co.b, "best response")
    return (game.alpha + game.theta) * (h * G / co.b) / (-h + root)


def f_response_literal(abar_minus: float, game: GameInstance) -> float:
    """Interior critical point evaluated exactly as the textbook root (needs ``a != 0``)."""
    co = game.coeffs
    h, _ = _at_hat(abar_minus, game)
    root = _checked_sqrt(co.b * h * co.Y, "best response")
    return (game.alpha + game.theta) / co.a * (-h + root / co.b)


def best_response(abar_minus: float, game: GameInstance) -> float:
    """Utility-maximising rate of one agent given the others' total ``abar_minus``."""
    cap = strategy_cap(abar_minus, game)
    p = game.policy
    if p.dRT0 > 0 and threshold_C(abar_minus, game) <= p.dRT0 <= p.upper_bound:
        return game.theta - abar_minus
    if abs(game.coeffs.a) < A_DEADBAND:
        rate = 0.5 * (capacity(game) - abar_minus)
    else:
        rate = f_response(abar_minus, game)
    return min(max(rate, 0.0), cap)


def is_depleting_equilibrium(profile: StrategyProfile, game: GameInstance) -> bool:
    """Whether every unilateral deviation still leaves total extraction above ``theta``."""
    abar = profile.abar
    return all(abar - r > game.theta for r in profile.rates)


def equilibrium_quadratic(game: GameInstance) -> tuple[float, float, float]:
    """Coefficients ``(M**2, K1, K0)`` of the quadratic a symmetric interior equilibrium solves."""
    co, M = game.coeffs, game.M
    if abs(co.a) < A_DEADBAND:
        raise InvalidPolicyError("quadratic is degenerate for a = 0")
    s = game.alpha + game.theta
    h0, _ = _at_hat(0.0, game)
    K1 = s / co.a * (2 * M * h0 - (M - 1) * co.Y / co.b)
    K0 = s * s / (co.a * co.a) * h0 * (h0 - co.Y / co.b)
    return float(M * M), K1, K0


def e_roots(game: GameInstance) -> tuple[float, float]:
    """Both roots ``(E_plus, E_minus)`` of the symmetric quadratic, textbook formula."""
    A, K1, K0 = equilibrium_quadratic(game)
    root = _checked_sqrt(K1 * K1 - 4.0 * A * K0, "symmetric equilibrium")
    return (-K1 + root) / (2.0 * A), (-K1 - root) / (2.0 * A)


def _interior_symmetric(game: GameInstance) -> float:
    """Symmetric interior equilibrium, solved in a form that stays finite as ``a -> 0``.

    Multiplying the quadratic by ``a`` gives ``a*M^2*g^2 + k1*g + k0 = 0``;
    the wanted root is the larger one for ``a < 0`` and the smaller for
    ``a > 0``, computed without subtracting nearly equal numbers.
    """
    co, M = game.coeffs, game.M
    s = game.alpha + game.theta
    h0, G0 = _at_hat(0.0, game)
    A = co.a * M * M
    k1 = s * (2 * M * h0 - (M - 1) * co.Y / co.b)
    k0 = s * s * h0 * G0 / co.b
    root = _checked_sqrt(k1 * k1 - 4.0 * A * k0, "symmetric equilibrium")
    q = -0.5 * (k1 + math.copysign(root, k1))
    r1, r2 = q / A, k0 / q
    return max(r1, r2) if co.a < 0 else min(r1, r2)


def symmetric_equilibrium(game: GameInstance) -> EquilibriumResult:
    """The unique symmetric Nash equilibrium of the constrained extraction game."""
    p, M, theta = game.policy, game.M, game.theta
    a = game.coeffs.a
    if p.dRT0 > 0 and threshold_C((M - 1) * theta / M, game) <= p.dRT0 <= p.upper_bound:
        rate, regime = theta / M, Regime.CAP_SATURATED
    elif abs(a) < A_DEADBAND:
        rate, regime = capacity(game) / (M + 1), Regime.INTERIOR_LINEAR
    else:
        rate = _interior_symmetric(game)
        regime = Regime.INTERIOR_EPLUS if a < 0 else Regime.INTERIOR_EMINUS
    if regime is Regime.CAP_SATURATED:
        # M * (theta / M) may round below theta; the saturated level has one formula
        abar, R = theta, p.dRT0 / (p.dRT0 + p.dTR1)
    else:
        abar = M * rate
        R = resource_level(abar, game)
    return EquilibriumResult(rate, regime, abar, R, rate * R)


def limits(game_or_policy, alpha: float | None = None, theta: float | None = None) -> tuple[float, float]:
    """Total equilibrium extraction and resource level as ``M -> infinity``.

    Accepts a :class:`GameInstance` (its ``M`` is ignored) or a policy
    together with ``alpha`` and ``theta``.
    """
    if isinstance(game_or_policy, GameInstance):
        game = game_or_policy
    else:
        game = GameInstance(1, game_or_policy, alpha, theta)
    p = game.policy
    if p.dRT0 > 0:
        return game.theta, p.dRT0 / (p.dRT0 + p.dTR1)
    return capacity(game), 0.0


def equilibrium_table(game: GameInstance, Ms: Sequence[int]) -> list[tuple[int, EquilibriumResult]]:
    """Symmetric equilibria of the same instance for several population counts."""
    return [(M, symmetric_equilibrium(game.with_M(M))) for M in Ms]
