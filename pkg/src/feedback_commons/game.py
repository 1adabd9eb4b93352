"""Payoff parameters, the bilinear payoff gap and policy-region geometry.

A population's incentives are summarised by four payoff differences:
``dSP0 = S0 - P0`` and ``dRT0 = R0 - T0`` in the depleted environment,
``dTR1 = T1 - R1`` and ``dPS1 = P1 - S1`` in the replete one.  The payoff
advantage of low consumers over high consumers is then bilinear in the
cooperator share ``x`` and the resource level ``n``::

    g(x, n) = a*x*n + b*x + c*n + d
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .exceptions import DomainError, InvalidPolicyError

__all__ = [
    "Policy",
    "GreedyPolicy",
    "PayoffMatrices",
    "GCoefficients",
    "g_coefficients",
    "payoff_gap",
    "dg_dn",
    "payoffs_from_matrices",
    "in_region_V",
    "is_responsible",
    "policy_from_config",
    "POLICY_KEYS",
    "MATRIX_KEYS",
]

POLICY_KEYS = ("dSP0", "dRT0", "dTR1", "dPS1")
MATRIX_KEYS = ("r1", "s1", "t1", "p1", "r0", "s0", "t0", "p0")


def _check_unit_interval(value, name):
    arr = np.asarray(value, dtype=float)
    if not np.all((arr >= 0.0) & (arr <= 1.0)):
        raise DomainError(f"{name} must lie in [0, 1], got {value!r}")


@dataclass(frozen=True)
class Policy:
    """Payoff differences of the responsible population.

    Construction enforces that high consumption dominates in the replete
    state (``dTR1, dPS1 > 0``) and that the payoff gap decreases in the
    resource level (``dSP0 > -dPS1``, ``dRT0 > -dTR1``).
    """

    dSP0: float
    dRT0: float
    dTR1: float
    dPS1: float

    def __post_init__(self):
        for key in POLICY_KEYS:
            value = float(getattr(self, key))
            if not np.isfinite(value):
                raise InvalidPolicyError(f"{key} must be finite, got {value!r}")
            object.__setattr__(self, key, value)
        if not (self.dTR1 > 0 and self.dPS1 > 0):
            raise InvalidPolicyError(
                "high consumption must dominate in the replete state: "
                f"need dTR1 > 0 and dPS1 > 0, got dTR1={self.dTR1}, dPS1={self.dPS1}"
            )
        if not self.dSP0 > -self.dPS1:
            raise InvalidPolicyError(
                f"dg/dn < 0 requires dSP0 > -dPS1, got dSP0={self.dSP0}, dPS1={self.dPS1}"
            )
        if not self.dRT0 > -self.dTR1:
            raise InvalidPolicyError(
                f"dg/dn < 0 requires dRT0 > -dTR1, got dRT0={self.dRT0}, dTR1={self.dTR1}"
            )

    @property
    def upper_bound(self) -> float:
        """``(dTR1/dPS1)*dSP0``, the strict upper limit on ``dRT0`` for sustainability."""
        return self.dTR1 / self.dPS1 * self.dSP0

    def as_dict(self) -> dict:
        return {key: getattr(self, key) for key in POLICY_KEYS}


@dataclass(frozen=True)
class GreedyPolicy:
    """Payoff differences of a greedy population.

    Both deplete-state differences are negative, so low consumption is
    never favoured: the induced gap is negative on the whole unit square.
    """

    dSP0i: float = -1.0
    dRT0i: float = -1.0
    dTR1i: float = 2.1
    dPS1i: float = 2.0

    def __post_init__(self):
        for key in ("dSP0i", "dRT0i", "dTR1i", "dPS1i"):
            object.__setattr__(self, key, float(getattr(self, key)))
        if not (self.dSP0i < 0 and self.dRT0i < 0):
            raise InvalidPolicyError(
                f"greedy policy needs dSP0i < 0 and dRT0i < 0, got {self.dSP0i}, {self.dRT0i}"
            )
        if not (self.dTR1i > 0 and self.dPS1i > 0):
            raise InvalidPolicyError(
                f"greedy policy needs dTR1i > 0 and dPS1i > 0, got {self.dTR1i}, {self.dPS1i}"
            )
        # corners of [0,1]^2: g(0,0), g(1,0), g(0,1), g(1,1)
        corners = (self.dSP0i, self.dRT0i, -self.dPS1i, -self.dTR1i)
        if max(corners) >= 0:
            raise InvalidPolicyError("greedy payoff gap must be negative at every corner")

    def coefficients(self) -> "GCoefficients":
        return _coefficients(self.dSP0i, self.dRT0i, self.dTR1i, self.dPS1i)


@dataclass(frozen=True)
class PayoffMatrices:
    """Replete (``A1``) and depleted (``A0``) 2x2 payoff matrices.

    Rows and columns are ordered (low consumer, high consumer).  Any pair
    of matrices is accepted; :meth:`policy` enforces the sign assumptions.
    """

    A1: np.ndarray
    A0: np.ndarray

    def __post_init__(self):
        for name in ("A1", "A0"):
            mat = np.array(getattr(self, name), dtype=float)
            if mat.shape != (2, 2):
                raise DomainError(f"{name} must be 2x2, got shape {mat.shape}")
            mat.setflags(write=False)
            object.__setattr__(self, name, mat)

    @classmethod
    def from_entries(cls, r1, s1, t1, p1, r0, s0, t0, p0) -> "PayoffMatrices":
        return cls(np.array([[r1, s1], [t1, p1]]), np.array([[r0, s0], [t0, p0]]))

    def policy(self) -> Policy:
        (r1, s1), (t1, p1) = self.A1
        (r0, s0), (t0, p0) = self.A0
        return Policy(dSP0=s0 - p0, dRT0=r0 - t0, dTR1=t1 - r1, dPS1=p1 - s1)


@dataclass(frozen=True)
class GCoefficients:
    a: float
    b: float
    c: float
    d: float
    Y: float


def _coefficients(dSP0, dRT0, dTR1, dPS1):
    a = dSP0 - dRT0 + dPS1 - dTR1
    b = dRT0 - dSP0
    c = -(dPS1 + dSP0)
    d = dSP0
    return GCoefficients(a=a, b=b, c=c, d=d, Y=dTR1 * dSP0 - dRT0 * dPS1)


def g_coefficients(policy: Policy) -> GCoefficients:
    """Bilinear coefficients of the payoff gap and the constant ``Y``.

    ``Y`` is evaluated as ``dTR1*dSP0 - dRT0*dPS1``; it equals ``b*c - a*d``
    identically.
    """
    if not isinstance(policy, Policy):
        raise InvalidPolicyError(f"expected a Policy, got {type(policy).__name__}")
    return _coefficients(policy.dSP0, policy.dRT0, policy.dTR1, policy.dPS1)


def payoff_gap(coeffs: GCoefficients, x, n):
    """Payoff advantage ``g(x, n)`` of low over high consumers."""
    _check_unit_interval(x, "x")
    _check_unit_interval(n, "n")
    return coeffs.a * x * n + coeffs.b * x + coeffs.c * n + coeffs.d


def dg_dn(coeffs: GCoefficients, x):
    """Partial derivative of the payoff gap in ``n``; independent of ``n``."""
    _check_unit_interval(x, "x")
    return coeffs.a * x + coeffs.c


def payoffs_from_matrices(mats: PayoffMatrices, x: float, n: float) -> tuple[float, float]:
    """Expected payoffs ``(pi_L, pi_H)`` under the environment-mixed matrix."""
    _check_unit_interval(x, "x")
    _check_unit_interval(n, "n")
    A = n * mats.A1 + (1.0 - n) * mats.A0
    pi = A @ np.array([x, 1.0 - x])
    return float(pi[0]), float(pi[1])


def in_region_V(policy: Policy, alpha: float, theta: float, abar: float) -> bool:
    """Whether the policy sustains the resource against total greedy extraction ``abar``.

    Exact floating-point comparisons; no tolerance band.
    """
    if not (alpha > 0 and theta > 0):
        raise DomainError(f"alpha and theta must be positive, got {alpha}, {theta}")
    if not abar >= 0:
        raise DomainError(f"abar must be non-negative, got {abar}")
    lower = max((abar - theta) / (alpha + abar) * policy.dSP0, -policy.dTR1)
    return lower <= policy.dRT0 < policy.upper_bound


def is_responsible(policy: Policy, alpha: float, theta: float) -> bool:
    """Whether a lone responsible population sustains a positive resource."""
    if not (alpha > 0 and theta > 0):
        raise DomainError(f"alpha and theta must be positive, got {alpha}, {theta}")
    lower = max(-theta / alpha * policy.dSP0, -policy.dTR1)
    return lower <= policy.dRT0 < policy.upper_bound


def policy_from_config(block: Mapping[str, object]) -> Policy:
    """Build a policy from a flat key-value block.

    Accepts either the four differences (``dSP0``, ``dRT0``, ``dTR1``,
    ``dPS1``) or the eight matrix entries ``r1, s1, t1, p1, r0, s0, t0, p0``.
    """
    if all(key in block for key in POLICY_KEYS):
        return Policy(**{key: float(block[key]) for key in POLICY_KEYS})
    if all(key in block for key in MATRIX_KEYS):
        return PayoffMatrices.from_entries(*(float(block[key]) for key in MATRIX_KEYS)).policy()
    missing = [key for key in POLICY_KEYS if key not in block]
    raise InvalidPolicyError(
        f"policy block needs {', '.join(POLICY_KEYS)} or all of {', '.join(MATRIX_KEYS)}; "
        f"missing {', '.join(missing)}"
    )
