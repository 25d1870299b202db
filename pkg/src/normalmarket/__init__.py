"""Exact competitive equilibria, graphs and finite mechanisms for normal markets."""

from .curves import Curves, build_curves, conditional_supply_cost
from .games import (
    SymmetricPricingGame,
    ValueFunction,
    classify_symmetric_profiles,
    common_value_pseudo_equilibrium,
)
from .graphs import DiscreteMeasure, MarketGraphs, build_graphs
from .markets import FIXTURE_NAMES, fixture
from .mechanism import (
    Contract,
    MarketTransaction,
    MechanismConfig,
    MediatorStrategy,
    check_feasible,
    equilibrium_replay,
    run_market,
)
from .population import PopulationSpec, sample_finite_market, validate_well_behaved
from .solver import EquilibriumCandidate, EquilibriumSet, find_equilibria, verify_equilibrium
from .specio import load_spec, parse_spec

__all__ = [
    "Contract",
    "Curves",
    "DiscreteMeasure",
    "EquilibriumCandidate",
    "EquilibriumSet",
    "FIXTURE_NAMES",
    "MarketGraphs",
    "MarketTransaction",
    "MechanismConfig",
    "MediatorStrategy",
    "PopulationSpec",
    "SymmetricPricingGame",
    "ValueFunction",
    "build_curves",
    "build_graphs",
    "check_feasible",
    "classify_symmetric_profiles",
    "common_value_pseudo_equilibrium",
    "conditional_supply_cost",
    "equilibrium_replay",
    "find_equilibria",
    "fixture",
    "load_spec",
    "parse_spec",
    "run_market",
    "sample_finite_market",
    "validate_well_behaved",
    "verify_equilibrium",
]
