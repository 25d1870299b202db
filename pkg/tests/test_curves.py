from fractions import Fraction

from hypothesis import given, settings, strategies as st

from normalmarket.curves import (
    MonotoneStepCorrespondence,
    build_curves,
    check_maximal_monotone,
    conditional_supply_cost,
    real_demand,
    real_supply,
)
from normalmarket.markets import CreditKind, ProjectDistribution, TradingKind, credit_basic_example, credit_infinite_example, trading_example
from normalmarket.population import Atom, DemanderClass, PopulationSpec, SupplierClass, UniformSegment
from normalmarket.scalar import PiecewisePoly, Poly

from conftest import trading_specs

F = Fraction


def one_atom_supply():
    return PopulationSpec((SupplierClass(Atom(1), h1=2, v=2, h0=1),), (DemanderClass(Atom(1), eta1=1, eta0=3),), TradingKind())


def test_single_atom_supply_step():
    s = real_supply(one_atom_supply())
    assert s(1) == (0, 2)
    assert s(2) == (2, 2)
    assert s(F(1, 2)) == (0, 0)


def test_trading_supply_values():
    c = build_curves(trading_example(F(43, 100)))
    assert c.supply(1) == (F(344, 1000), F(344, 1000))
    assert c.s_max == F(43, 100)


def test_trading_supply_by_quadrature():
    # midpoint rule on the uniform cost density reproduces the linear curve
    c = build_curves(trading_example(F(43, 100)))
    n = 2000
    for rho in (F(1, 3), F(1), F(6, 5)):
        h = F(5, 4) / n
        mass = sum(h * F(4, 5) for k in range(n) if h * k + h / 2 <= rho)
        assert abs(float(mass * F(43, 100) - c.supply.max(rho))) < 1e-3


def test_empty_supply_is_zero():
    spec = PopulationSpec((), (DemanderClass(Atom(1), eta1=1, eta0=1),), TradingKind())
    assert real_supply(spec)(5) == (0, 0)


def test_trading_demand_values():
    d = real_demand(trading_example(F(43, 100)))
    assert d(1) == (F(2, 5), 1)
    assert d(2) == (0, F(2, 5))
    assert d(3) == (0, 0)
    assert d(-5) == (1, 1)


def test_truncated_family_total_demand():
    c = build_curves(credit_infinite_example(1, K=5))
    assert c.d_max == sum(F(1, 2**i) for i in range(1, 6))


def test_trading_unit_values():
    c = build_curves(trading_example(F(43, 100)))
    for rho in (F(1, 5), F(1), F(5, 4), F(3)):
        assert c.p_bar(rho) == rho and c.p_low(rho) == rho
    for r in (F(1, 2), F(1), F(3, 2), F(2)):
        assert c.p_hat(r) == r
    assert c.p_hat(3) == 0
    assert c.p_hat.vacuous(3)


def test_supply_cost_zero_below_cutoffs():
    c = build_curves(one_atom_supply())
    assert c.p_bar(F(1, 2)) == 0 and c.p_low(F(1, 2)) == 0


def test_credit_supply_cost_with_interest():
    kind = CreditKind({1: ProjectDistribution(((4, 1),))})
    spec = PopulationSpec(
        (SupplierClass(Atom(F(1, 2)), h1=1, v=1, h0=F(1, 10)), SupplierClass(Atom(F(1, 2)), h1=1, v=1, h0=F(1, 5))),
        (DemanderClass(Atom(1), eta1=2, eta0=(F(1, 2), 1)),),
        kind,
    )
    c = build_curves(spec)
    for rho in (F(1, 10), F(3, 20), F(1, 5), F(1)):
        assert c.p_bar(rho) >= c.p_low(rho)
        assert c.p_bar(rho) == 1 + rho


def test_credit_revenue_at_safe_cutoff():
    spec = credit_basic_example()
    c = build_curves(spec)
    kind = spec.kind
    cutoffs = sorted(kind.demander_cutoff(d) for d in spec.demanders)
    r = cutoffs[0]
    num = den = F(0)
    for d in spec.demanders:
        if kind.demander_cutoff(d) >= r:
            equity, key = d.eta0
            loan = (1 - equity) * d.eta1
            repay = sum(p * min(x * d.eta1, (1 + r) * loan) for x, p in kind.projects[key].atoms)
            num += d.weight.mass * repay
            den += d.weight.mass * loan
    assert c.p_hat(r) == num / den


def test_conditional_cost():
    spec = one_atom_supply()
    assert conditional_supply_cost(spec, 0, 1) == 0
    assert conditional_supply_cost(spec, F(1, 2), 1) == 1
    assert conditional_supply_cost(spec, 1, 2) == 2
    t = trading_example(F(43, 100))
    assert conditional_supply_cost(t, F(1, 3), F(9, 10)) == F(9, 10)


def test_maximal_monotone_examples():
    assert check_maximal_monotone(real_supply(one_atom_supply())).passed
    const = PiecewisePoly((), (), (Poly.const(1),))
    assert check_maximal_monotone(MonotoneStepCorrespondence(const, const)).passed
    # upper at the jump stops short of the right limit
    lower = PiecewisePoly((F(1),), (F(0),), (Poly.const(0), Poly.const(2)))
    upper = PiecewisePoly((F(1),), (F(1),), (Poly.const(0), Poly.const(2)))
    verdict = check_maximal_monotone(MonotoneStepCorrespondence(lower, upper))
    assert not verdict.passed and verdict.reasons


def _brute_supply(spec, rho):
    lo = hi = F(0)
    for s in spec.suppliers:
        w = s.weight
        if isinstance(w, Atom):
            lo += w.mass * s.v * (s.h0 < rho)
            hi += w.mass * s.v * (s.h0 <= rho)
        else:
            covered = min(max(rho - w.lo, 0), w.hi - w.lo)
            lo += w.density * covered * s.v
            hi += w.density * covered * s.v
    return lo, hi


def _brute_demand(spec, r):
    lo = hi = F(0)
    for d in spec.demanders:
        lo += d.weight.mass * d.eta1 * (d.eta0 > r)
        hi += d.weight.mass * d.eta1 * (d.eta0 >= r)
    return lo, hi


@settings(max_examples=100)
@given(trading_specs(), st.lists(st.fractions(-1, 14, max_denominator=16), min_size=50, max_size=50))
def test_aggregation_matches_enumeration(spec, prices):
    c = build_curves(spec)
    for x in prices:
        assert c.supply(x) == _brute_supply(spec, x)
        assert c.demand(x) == _brute_demand(spec, x)


@settings(max_examples=100)
@given(trading_specs())
def test_real_curves_are_maximal_monotone(spec):
    c = build_curves(spec)
    assert check_maximal_monotone(c.supply).passed
    assert check_maximal_monotone(c.demand.negated()).passed


@settings(max_examples=50)
@given(trading_specs())
def test_cost_curves_differ_only_at_jumps(spec):
    c = build_curves(spec)
    for b in set(c.p_bar.breaks) | set(c.p_low.breaks) | set(c.supply.breaks):
        if c.p_bar(b) != c.p_low(b):
            lo, hi = c.supply(b)
            assert lo < hi


@settings(max_examples=50)
@given(trading_specs())
def test_revenue_is_left_continuous_at_breaks(spec):
    c = build_curves(spec)
    vals = c.p_hat.values
    for b in vals.breaks:
        if c.max_d(b) > 0:
            assert vals(b) == vals.left_limit(b)


@settings(max_examples=30)
@given(trading_specs())
def test_revenue_identity_for_trading(spec):
    c = build_curves(spec)
    for d in spec.demanders:
        r = d.eta0
        assert c.p_hat(r) == r
        assert c.p_hat(r - F(1, 8)) == r - F(1, 8)
