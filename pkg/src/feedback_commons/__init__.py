"""Multi-population feedback-evolving games and the hierarchical resource-extraction game.

The package is organised in layers:

* :mod:`~feedback_commons.game` -- payoff parameters, the bilinear payoff gap
  and the responsible-policy region.
* :mod:`~feedback_commons.dynamics` -- coupled population/resource ODEs,
  a fixed-step RK4 integrator and asymptotic-outcome classification.
* :mod:`~feedback_commons.equilibrium` -- the resource map, closed-form best
  responses, the symmetric Nash equilibrium and its large-``M`` limits.
* :mod:`~feedback_commons.oracles` -- brute-force checks of every closed form.
* :mod:`~feedback_commons.cli` -- the ``feedback-commons`` command.
"""

from .dynamics import (
    Collapse,
    GreedyPopulation,
    LineSegment,
    OscillatingTOC,
    RateParams,
    Sustained,
    SystemState,
    Trajectory,
    classify_multi,
    classify_single,
    integrate,
    multi_population_field,
    rhs_multi,
    rhs_single,
)
from .equilibrium import (
    EquilibriumResult,
    GameInstance,
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
from .exceptions import (
    DimensionMismatchError,
    DomainError,
    EmptyStrategySetError,
    InvalidPolicyError,
    NonFiniteStateError,
)
from .game import (
    GCoefficients,
    GreedyPolicy,
    PayoffMatrices,
    Policy,
    dg_dn,
    g_coefficients,
    in_region_V,
    is_responsible,
    payoff_gap,
)
from .oracles import OracleReport, run_all

__version__ = "0.1.0"

__all__ = [
    "Collapse", "GreedyPopulation", "LineSegment", "OscillatingTOC", "RateParams", "Sustained",
    "SystemState", "Trajectory", "classify_multi", "classify_single", "integrate",
    "multi_population_field", "rhs_multi", "rhs_single",
    "EquilibriumResult", "GameInstance", "Regime", "StrategyProfile", "best_response", "capacity",
    "e_roots", "equilibrium_table", "limits", "resource_level", "strategy_cap",
    "symmetric_equilibrium", "threshold_C", "utility",
    "DimensionMismatchError", "DomainError", "EmptyStrategySetError", "InvalidPolicyError",
    "NonFiniteStateError",
    "GCoefficients", "GreedyPolicy", "PayoffMatrices", "Policy", "dg_dn", "g_coefficients",
    "in_region_V", "is_responsible", "payoff_gap",
    "OracleReport", "run_all",
]
