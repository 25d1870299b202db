import time
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from normalmarket.games import (
    ConfigurationError,
    SymmetricPricingGame,
    ValueFunction,
    classify_symmetric_profiles,
    common_value_pseudo_equilibrium,
    monopoly_price,
    oligopoly_example_a,
    oligopoly_example_b,
    uniform_grid,
)
from normalmarket.population import DomainError
from normalmarket.scalar import PiecewisePoly, Poly, sum_piecewise


def test_example_a_sets():
    t0 = time.perf_counter()
    game = oligopoly_example_a()
    c = classify_symmetric_profiles(game)
    assert time.perf_counter() - t0 < 1
    assert c.bfcf == [F(2)]
    assert c.collusion_free == [F(2)]
    assert set(p for p in game.grid if 0 < p <= 2) <= set(c.nash)


def test_example_b_sets():
    t0 = time.perf_counter()
    c = classify_symmetric_profiles(oligopoly_example_b())
    assert time.perf_counter() - t0 < 1
    assert c.collusion_free == []
    # market clears where 2 - p equals capacity 3/2
    assert c.bfcf == [F(1, 2)]
    assert c.nash == [F(1, 2)]


def test_monopoly_prices():
    assert monopoly_price(oligopoly_example_a()) == 2
    assert monopoly_price(oligopoly_example_b()) == 1


def test_zero_demand_every_price_is_stable():
    # nobody can gain anything, so no deviation or coalition is strictly profitable
    game = SymmetricPricingGame(F(1), PiecewisePoly.constant(0), uniform_grid(0, 2, F(1, 4)))
    assert monopoly_price(game) is None
    c = classify_symmetric_profiles(game)
    assert c.nash == c.collusion_free == c.bfcf == list(game.grid)


def test_grid_missing_monopoly_price_is_rejected():
    with pytest.raises(ConfigurationError, match="monopoly"):
        classify_symmetric_profiles(oligopoly_example_b(F(2, 5)))


def test_classification_json():
    doc = classify_symmetric_profiles(oligopoly_example_b()).to_json()
    assert doc == {"nash": ["1/2"], "collusion_free": [], "bfcf": ["1/2"]}


def test_common_value_right_continuous_step():
    v = ValueFunction.step(1, -1, 1, right_continuous=True)
    assert v.continuity() == ["right"]
    assert common_value_pseudo_equilibrium(v) == (1, True)


def test_common_value_left_continuous_step():
    v = ValueFunction.step(1, -1, 1, right_continuous=False)
    assert v.continuity() == ["left"]
    assert common_value_pseudo_equilibrium(v) == (1, False)


def test_common_value_positive_from_zero():
    v = ValueFunction.step(0, -1, 1, right_continuous=True)
    assert common_value_pseudo_equilibrium(v) == (0, True)


def test_common_value_linear_root():
    v = ValueFunction(PiecewisePoly((), (), (Poly.linear(-3, 2),)))
    assert common_value_pseudo_equilibrium(v) == (F(3, 2), True)


def test_common_value_premises():
    with pytest.raises(DomainError):
        common_value_pseudo_equilibrium(ValueFunction(PiecewisePoly.constant(-1)))
    with pytest.raises(DomainError):
        common_value_pseudo_equilibrium(ValueFunction(PiecewisePoly.constant(2)))


@st.composite
def small_games(draw):
    """Step demand with a few drops on a quarter grid, grid holding every break."""
    n = draw(st.integers(1, 3))
    breaks = draw(st.lists(st.integers(1, 8), min_size=n, max_size=n, unique=True))
    parts = [
        PiecewisePoly.step_down(F(b, 4), F(draw(st.integers(1, 4)), 4), draw(st.booleans())) for b in breaks
    ]
    quantity = F(draw(st.integers(1, 6)), 4)
    return SymmetricPricingGame(quantity, sum_piecewise(parts), uniform_grid(0, 3, F(1, 4)))


@settings(max_examples=40)
@given(small_games())
def test_profile_sets_nest(game):
    c = classify_symmetric_profiles(game)
    assert set(c.bfcf) <= set(c.nash)
    assert set(c.collusion_free) <= set(c.bfcf)


@st.composite
def step_values(draw):
    """Non-decreasing steps starting negative and ending positive."""
    n = draw(st.integers(1, 4))
    cuts = sorted(draw(st.lists(st.integers(-8, 8), min_size=n, max_size=n, unique=True)))
    levels = sorted(draw(st.lists(st.integers(-5, 5), min_size=n + 1, max_size=n + 1, unique=True)))
    levels[0] = min(levels[0], -1)
    levels[-1] = max(levels[-1], 1)
    at = []
    for k in range(n):
        at.append(levels[k + 1] if draw(st.booleans()) else levels[k])
    pieces = tuple(Poly.const(x) for x in levels)
    return ValueFunction(PiecewisePoly(tuple(F(c, 2) for c in cuts), tuple(F(a) for a in at), pieces))


@settings(max_examples=100)
@given(step_values())
def test_pseudo_equilibrium_bids_below_lose_money(v):
    y, attained = common_value_pseudo_equilibrium(v)
    for k in range(-40, 41):
        z = F(k, 4)
        if z < y:
            assert v(z) <= 0
    assert (v(y) >= 0) == attained
