"""Coupled population/resource dynamics and asymptotic outcome classification.

State vectors are laid out as ``[x, x_1, ..., x_M, n]``: the cooperator
share of the responsible population, the cooperator shares of the ``M``
greedy populations, and the shared resource level.  Every array-valued
function here also accepts a leading batch axis, so several initial
conditions can be integrated in one pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import DimensionMismatchError, DomainError, InvalidPolicyError, NonFiniteStateError
from .game import GCoefficients, GreedyPolicy, Policy, g_coefficients, in_region_V

__all__ = [
    "GreedyPopulation",
    "RateParams",
    "SystemState",
    "Trajectory",
    "Outcome",
    "Sustained",
    "OscillatingTOC",
    "Collapse",
    "LineSegment",
    "rhs_single",
    "rhs_multi",
    "MultiPopulationField",
    "multi_population_field",
    "integrate",
    "classify_single",
    "classify_multi",
    "CLAMP",
    "DEFAULT_GREEDY_POLICY",
]

CLAMP = 1e-12
DEFAULT_GREEDY_POLICY = GreedyPolicy(-1.0, -1.0, 2.1, 2.0)


@dataclass(frozen=True)
class GreedyPopulation:
    alpha: float
    theta: float = 1.0
    policy: GreedyPolicy = DEFAULT_GREEDY_POLICY

    def __post_init__(self):
        if not (self.alpha >= 0 and self.theta >= 0):
            raise DomainError(
                f"greedy rates must be non-negative, got alpha={self.alpha}, theta={self.theta}"
            )


@dataclass(frozen=True)
class RateParams:
    """Rates of the responsible population, resource timescale and greedy populations."""

    alpha: float
    theta: float
    eps: float = 1.0
    greedy: tuple[GreedyPopulation, ...] = ()

    def __post_init__(self):
        if not (self.alpha > 0 and self.theta > 0 and self.eps > 0):
            raise DomainError(
                f"alpha, theta, eps must be positive, got {self.alpha}, {self.theta}, {self.eps}"
            )
        greedy = tuple(
            g if isinstance(g, GreedyPopulation) else GreedyPopulation(*g) for g in self.greedy
        )
        object.__setattr__(self, "greedy", greedy)
        if not math.isfinite(self.abar):
            raise DomainError("total greedy extraction must be finite")

    @property
    def M(self) -> int:
        return len(self.greedy)

    @property
    def abar(self) -> float:
        return float(sum(g.alpha for g in self.greedy))


@dataclass(frozen=True)
class SystemState:
    x: float
    xg: tuple[float, ...]
    n: float

    def __post_init__(self):
        object.__setattr__(self, "xg", tuple(float(v) for v in self.xg))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, *self.xg, self.n], dtype=float)

    @classmethod
    def from_array(cls, y) -> "SystemState":
        y = np.asarray(y, dtype=float)
        return cls(float(y[0]), tuple(y[1:-1]), float(y[-1]))


@dataclass
class Trajectory:
    """Time series of states; ``states[k]`` is the state at ``times[k]``.

    ``stop_reason`` is ``"converged"`` when the steady-state test fired and
    ``"t_end"`` otherwise.  ``max_clamp`` is the largest per-component
    adjustment made by the boundary clamp over the whole run.
    """

    times: np.ndarray
    states: np.ndarray
    stop_reason: str = "t_end"
    max_clamp: float = 0.0
    steps: int = 0

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def __len__(self):
        return len(self.times)


class Outcome:
    """Base class of asymptotic outcome tags."""

    label = "outcome"


@dataclass(frozen=True)
class Sustained(Outcome):
    xstar: float
    nstar: float
    label = "sustained"


@dataclass(frozen=True)
class OscillatingTOC(Outcome):
    note: str = ""
    label = "oscillating_toc"


@dataclass(frozen=True)
class Collapse(Outcome):
    label = "collapse"


@dataclass(frozen=True)
class LineSegment(Outcome):
    n_upper: float
    label = "line_segment"


def _gap(co: GCoefficients, x, n):
    return co.a * x * n + co.b * x + co.c * n + co.d


def rhs_single(state, policy: Policy, alpha: float, theta: float) -> tuple[float, float]:
    """Replicator dynamics for one population coupled to the resource."""
    x, n = state
    if not (0.0 <= x <= 1.0 and 0.0 <= n <= 1.0):
        raise DomainError(f"state must lie in the unit square, got (x={x}, n={n})")
    co = g_coefficients(policy)
    dx = x * (1.0 - x) * _gap(co, x, n)
    dn = n * (1.0 - n) * (theta * x - alpha * (1.0 - x))
    return dx, dn


class MultiPopulationField:
    """Vector field of the multi-population system on state arrays.

    Calling it maps an array of shape ``(..., M + 2)`` to its time
    derivative without domain checks.  :func:`integrate` recognises this
    type and runs a compiled loop over the same arithmetic.
    """

    def __init__(self, rates: RateParams, policy: Policy):
        co = g_coefficients(policy)
        self.M = rates.M
        self.resp = np.array([co.a, co.b, co.c, co.d])
        greedy = [g.policy.coefficients() for g in rates.greedy]
        self.gco = np.array([[c.a, c.b, c.c, c.d] for c in greedy]).reshape(self.M, 4)
        self.alphas = np.array([g.alpha for g in rates.greedy], dtype=float)
        self.thetas = np.array([g.theta for g in rates.greedy], dtype=float)
        self.alpha, self.theta, self.eps = float(rates.alpha), float(rates.theta), float(rates.eps)

    def __call__(self, y):
        a, b, c, d = self.resp
        ga, gb, gc, gd = self.gco.T
        x = y[..., 0]
        xg = y[..., 1:-1]
        n = y[..., -1]
        ncol = n[..., None]
        out = np.empty_like(y)
        out[..., 0] = x * (1.0 - x) * (a * x * n + b * x + c * n + d)
        out[..., 1:-1] = xg * (1.0 - xg) * (ga * xg * ncol + gb * xg + gc * ncol + gd)
        restore = self.theta * x + xg @ self.thetas
        extract = self.alpha * (1.0 - x) + (1.0 - xg) @ self.alphas
        out[..., -1] = self.eps * n * (1.0 - n) * (restore - extract)
        return out

    def kernel_args(self):
        return self.resp, self.gco, self.alphas, self.thetas, self.alpha, self.theta, self.eps


def multi_population_field(rates: RateParams, policy: Policy) -> MultiPopulationField:
    return MultiPopulationField(rates, policy)


def rhs_multi(state, rates: RateParams, policy: Policy) -> np.ndarray:
    """Time derivative of ``[x, x_1..x_M, n]`` under the shared-resource dynamics."""
    y = state.as_array() if isinstance(state, SystemState) else np.asarray(state, dtype=float)
    if y.shape[-1] != rates.M + 2:
        raise DimensionMismatchError(
            f"state has {y.shape[-1]} components, expected M + 2 = {rates.M + 2}"
        )
    if not np.all((y >= 0.0) & (y <= 1.0)):
        raise DomainError("state components must lie in [0, 1]")
    return multi_population_field(rates, policy)(y)


def integrate(
    rhs: Callable[[np.ndarray], np.ndarray],
    state0,
    t_end: float,
    dt: float = 0.01,
    *,
    steady_tol: float | None = None,
    record_every: int = 1,
    clamp: float = CLAMP,
    compiled: bool = True,
) -> Trajectory:
    """Fixed-step RK4 integration with per-step clamping into ``[clamp, 1 - clamp]``.

    The step count is ``ceil(t_end / dt)`` with the step shrunk uniformly to
    land on ``t_end``.  With ``steady_tol`` set, integration stops early once
    the largest derivative component drops below it.  ``record_every``
    thins the stored series; the final state is always stored.  A
    :class:`MultiPopulationField` right-hand side runs through a compiled
    loop unless ``compiled`` is false.
    """
    y = state0.as_array() if isinstance(state0, SystemState) else np.array(state0, dtype=float)
    if not np.all((y > 0.0) & (y < 1.0)):
        raise DomainError("initial state must be strictly inside the unit cube")
    if not (dt > 0 and t_end >= 0):
        raise DomainError(f"need dt > 0 and t_end >= 0, got dt={dt}, t_end={t_end}")
    if record_every < 1:
        raise DomainError("record_every must be at least 1")

    nsteps = int(math.ceil(t_end / dt - 1e-9)) if t_end > 0 else 0
    h = t_end / nsteps if nsteps else 0.0
    if isinstance(rhs, MultiPopulationField) and compiled:
        return _integrate_compiled(rhs, y, nsteps, h, steady_tol, record_every, clamp)
    lo, hi = clamp, 1.0 - clamp

    times = [0.0]
    states = [y.copy()]
    stop_reason = "t_end"
    max_clamp = 0.0
    step = 0
    while step < nsteps:
        k1 = rhs(y)
        if steady_tol is not None and np.max(np.abs(k1)) < steady_tol:
            stop_reason = "converged"
            break
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y_new = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        step += 1
        if not np.all(np.isfinite(y_new)):
            raise NonFiniteStateError(f"non-finite state at t={step * h:g}")
        y = np.clip(y_new, lo, hi)
        max_clamp = max(max_clamp, float(np.max(np.abs(y - y_new))))
        if step % record_every == 0 or step == nsteps:
            times.append(step * h)
            states.append(y.copy())
    if times[-1] != step * h:
        times.append(step * h)
        states.append(y.copy())
    return Trajectory(np.array(times), np.array(states), stop_reason, max_clamp, step)


def _integrate_compiled(field, y, nsteps, h, steady_tol, record_every, clamp):
    from ._kernels import rk4_multi

    batch = y.ndim == 1
    y2 = np.ascontiguousarray(y.reshape(1, -1) if batch else y)
    if y2.shape[-1] != field.M + 2:
        raise DimensionMismatchError(f"state has {y2.shape[-1]} components, expected {field.M + 2}")
    tol = -1.0 if steady_tol is None else float(steady_tol)
    step, times, states, count, converged, max_clamp, finite = rk4_multi(
        y2, nsteps, h, tol, record_every, clamp, 1.0 - clamp, *field.kernel_args()
    )
    if not finite:
        raise NonFiniteStateError(f"non-finite state at t={step * h:g}")
    states = states[:count]
    if batch:
        states = states[:, 0, :]
    return Trajectory(
        times[:count].copy(), states.copy(), "converged" if converged else "t_end", float(max_clamp), int(step)
    )


def classify_single(policy: Policy, alpha: float, theta: float) -> Outcome:
    """Asymptotic outcome of the single-population system."""
    if not isinstance(policy, Policy):
        raise InvalidPolicyError(f"expected a Policy, got {type(policy).__name__}")
    if not (alpha > 0 and theta > 0):
        raise DomainError(f"alpha and theta must be positive, got {alpha}, {theta}")
    dSP0, dRT0 = policy.dSP0, policy.dRT0
    if dSP0 > 0 and -theta / alpha * dSP0 <= dRT0 < policy.upper_bound:
        co = g_coefficients(policy)
        xstar = alpha / (alpha + theta)
        nstar = _gap(co, xstar, 0.0) / -(co.a * xstar + co.c)
        return Sustained(xstar, max(nstar, 0.0))
    if dSP0 > 0 and dRT0 > policy.upper_bound:
        return OscillatingTOC("heteroclinic cycle on the boundary")
    if dSP0 > 0 and dRT0 == policy.upper_bound:
        return OscillatingTOC("neutrally stable closed orbits")
    return Collapse()


def classify_multi(rates: RateParams, policy: Policy) -> Outcome:
    """Asymptotic outcome of the multi-population system.

    Depends only on the total greedy extraction, never on ``eps``.  With
    no greedy extraction at all the system is the single-population one.
    """
    if not isinstance(policy, Policy):
        raise InvalidPolicyError(f"expected a Policy, got {type(policy).__name__}")
    abar, alpha, theta = rates.abar, rates.alpha, rates.theta
    if abar == 0.0:
        return classify_single(policy, alpha, theta)
    if abar > theta:
        return Collapse()
    if abar < theta:
        if in_region_V(policy, alpha, theta, abar):
            co = g_coefficients(policy)
            xstar = (alpha + abar) / (alpha + theta)
            nstar = -_gap(co, xstar, 0.0) / (co.a * xstar + co.c)
            return Sustained(xstar, max(nstar, 0.0))
        return Collapse()
    if policy.dRT0 > 0:
        return LineSegment(policy.dRT0 / (policy.dRT0 + policy.dTR1))
    return Collapse()
