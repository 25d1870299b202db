import json
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings

from normalmarket.graphs import DiscreteMeasure, ZERO_MEASURE, build_graphs
from normalmarket.markets import credit_infinite_example, trading_example
from normalmarket.population import Atom, DemanderClass, DomainError, PopulationSpec, SupplierClass, validate_well_behaved
from normalmarket.markets import TradingKind
from normalmarket.solver import (
    CLAUSE_EQUAL_BID,
    CLAUSE_MAXIMIZERS,
    CLAUSE_NOT_HIGHER,
    EMPTY,
    FAMILY,
    UNIQUE,
    EquilibriumCandidate,
    classify,
    demand_clearing,
    find_equilibria,
    infinite_example_report,
    monopoly_optimistic_resale_value,
    profitable_set_membership,
    profitable_supremum,
    summary_line,
    verify_equilibrium,
)

from conftest import trading_specs
from oracles import in_closure, lattice_candidates

F = Fraction


def candidate(rho, q, mass, demand):
    supply = DiscreteMeasure(((rho, mass),)) if rho is not None else ZERO_MEASURE
    return EquilibriumCandidate(supply, q, DiscreteMeasure(tuple(demand)))


def test_no_equilibrium_when_capacity_is_high():
    eq = find_equilibria(trading_example(F(4, 5)))
    assert eq.kind == EMPTY and eq.candidates == []
    assert summary_line(eq) == "no equilibrium"


def test_unique_positive_profit_equilibrium():
    eq = find_equilibria(trading_example(F(43, 100)))
    assert eq.kind == UNIQUE
    (c,) = eq.candidates
    assert c.supply.atoms == ((F(50, 43), F(2, 5)),)
    assert c.demand.atoms == ((2, F(2, 5)),)
    assert not eq.is_rationing(c)


def test_rationing_equilibrium_at_low_capacity():
    eq = find_equilibria(trading_example(F(6, 25)))
    (c,) = eq.candidates
    assert c.supply.atoms == ((2, F(6, 25)),)
    assert c.demand.atoms == ((2, F(6, 25)),)
    info = classify(eq)
    assert info["exists"] and info["unique"] and info["rationing"]
    assert verify_equilibrium(trading_example(F(6, 25)), c).passed


def test_lower_supply_price_at_low_capacity_is_not_an_equilibrium():
    # raising the supply price to 2 stays profitable, so 5/4 cannot hold
    spec = trading_example(F(6, 25))
    verdict = verify_equilibrium(spec, candidate(F(5, 4), 1, F(6, 25), [(2, F(6, 25))]))
    assert not verdict.passed
    assert CLAUSE_NOT_HIGHER in verdict.violated
    assert profitable_set_membership(spec, F(3, 2), 1)


def test_summary_line():
    eq = find_equilibria(trading_example(F(43, 100)))
    assert summary_line(eq) == (
        "unique equilibrium; supply price 50/43; traded volume 2/5; demand price 2; rationing: no"
    )


def test_profitable_set_membership():
    spec = trading_example(F(43, 100))
    assert profitable_set_membership(spec, 1, 1)
    assert not profitable_set_membership(spec, -1, 1)
    assert not profitable_set_membership(spec, F(3, 2), 1)


def test_equilibrium_bid_itself_is_profitable():
    # demand price 2 keeps volume 2/5 at revenue 2 > 50/43
    assert profitable_set_membership(trading_example(F(43, 100)), F(50, 43), 1)


def test_verifier_accepts_solution():
    spec = trading_example(F(43, 100))
    verdict = verify_equilibrium(spec, candidate(F(50, 43), 1, F(2, 5), [(2, F(2, 5))]))
    assert verdict.passed and verdict.violated == []


def test_verifier_rejects_low_demand_price():
    spec = trading_example(F(43, 100))
    verdict = verify_equilibrium(spec, candidate(F(50, 43), 1, F(2, 5), [(1, F(2, 5))]))
    assert verdict.first_violation == CLAUSE_MAXIMIZERS


def test_verifier_rejects_low_supply_price():
    spec = trading_example(F(43, 100))
    verdict = verify_equilibrium(spec, candidate(1, 1, F(344, 1000), [(2, F(344, 1000))]))
    assert CLAUSE_NOT_HIGHER in verdict.violated


def test_verifier_rejects_mass_mismatch():
    spec = trading_example(F(43, 100))
    verdict = verify_equilibrium(spec, candidate(F(50, 43), 1, F(1, 5), [(2, F(1, 5))]))
    assert verdict.first_violation == CLAUSE_EQUAL_BID


def test_verifier_rejects_two_supply_bids():
    spec = trading_example(F(43, 100))
    cand = EquilibriumCandidate(DiscreteMeasure(((1, F(1, 5)), (2, F(1, 5)))), 1, DiscreteMeasure(((2, F(2, 5)),)))
    assert verify_equilibrium(spec, cand).violated == [CLAUSE_EQUAL_BID]


def test_candidate_json_round_trip():
    c = find_equilibria(trading_example(F(43, 100))).candidates[0]
    back = EquilibriumCandidate.from_json(json.loads(json.dumps(c.to_json())))
    assert back == c


def test_monopoly_value_explains_nonexistence():
    value = monopoly_optimistic_resale_value(trading_example(F(4, 5)), 1, 1, 2)
    assert value.improving and value.value == F(6, 25)


def test_monopoly_value_empty_above_top_revenue():
    value = monopoly_optimistic_resale_value(trading_example(F(4, 5)), 3, 1, 2)
    assert value.empty and not value.improving


def test_monopoly_value_below_cost_quote():
    # quoting 11/10 against unit cost 5/4 cannot earn anything after resale
    value = monopoly_optimistic_resale_value(trading_example(F(4, 5)), F(5, 4), 1, F(11, 10))
    assert not value.improving and value.value <= 0


def test_monopoly_value_needs_resale():
    with pytest.raises(DomainError):
        monopoly_optimistic_resale_value(trading_example(F(4, 5)), 1, 1, F(1, 2))


def test_demand_clearing_full_match():
    g = build_graphs(trading_example(F(43, 100)))
    clr = demand_clearing(g.curves, DiscreteMeasure(((2, F(2, 5)),)))
    assert clr.resale_volume == 0 and clr.p_high == 1


def test_classify_outcomes():
    assert classify(find_equilibria(trading_example(F(4, 5))))["exists"] is False
    info = classify(find_equilibria(credit_infinite_example(F(3, 4), K=20)))
    assert info["unique"] is False
    assert info["max_support_size"] == 20


def test_infinite_example_report_is_structured():
    report = infinite_example_report(1, K=20)
    assert report["single_demand_atom"]
    assert report["claimed"] == {"price": "4", "mass": "1"}
    assert len(report["computed"]) == 1
    if not report["agrees"]:
        assert "discrepancy" in report


def test_capacity_scaling_never_raises_volume():
    volumes = {}
    for k in range(1, 21):
        eq = find_equilibria(trading_example(F(k, 20)))
        if eq.candidates:
            volumes[k] = max(c.volume for c in eq.candidates)
    ks = sorted(volumes)
    for a, b in zip(ks, ks[1:]):
        assert volumes[a] <= volumes[b]


def test_no_trade_market_zero_outcome():
    # suppliers cost more than any buyer pays: the zero outcome passes the
    # verifier, while the graphical search only returns positive-price points
    spec = PopulationSpec(
        (SupplierClass(Atom(1), h1=1, v=1, h0=3),), (DemanderClass(Atom(1), eta1=1, eta0=2),), TradingKind()
    )
    eq = find_equilibria(spec)
    assert eq.kind == EMPTY
    assert profitable_supremum(spec) is None
    assert verify_equilibrium(spec, EquilibriumCandidate(ZERO_MEASURE, 1, ZERO_MEASURE)).passed


@settings(max_examples=30)
@given(trading_specs())
def test_soundness(spec):
    assume(validate_well_behaved(spec).well_behaved)
    g = build_graphs(spec)
    eq = find_equilibria(g)
    for c in eq.candidates:
        assert verify_equilibrium(g, c).passed, c.to_json()
    if eq.kind == UNIQUE:
        assert len({c.supply for c in eq.candidates}) == 1


@settings(max_examples=20)
@given(trading_specs(max_suppliers=2, max_demanders=2, max_value=4))
def test_lattice_completeness(spec):
    assume(validate_well_behaved(spec).well_behaved)
    g = build_graphs(spec)
    eq = find_equilibria(g)
    for c in lattice_candidates(g.curves, F(1, 8)):
        if c.volume > 0 and verify_equilibrium(g, c).passed:
            assert in_closure(eq, c), (eq.kind, c.to_json())


@settings(max_examples=20)
@given(trading_specs())
def test_family_points_sit_on_border(spec):
    assume(validate_well_behaved(spec).well_behaved)
    g = build_graphs(spec)
    eq = find_equilibria(g)
    if eq.kind == FAMILY:
        for pt in eq.points:
            assert g.in_V3(pt.price, pt.volume) and g.in_S(pt.price, pt.volume)
