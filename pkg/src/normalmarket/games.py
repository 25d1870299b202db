"""Finite-proxy checkers for equilibrium notions of games with a continuum of agents.

Two worked settings are covered: symmetric price setting by a unit mass of
retailers sharing a fixed capacity, and a known common value auction.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .curves import iter_elements, sample_in
from .population import DomainError
from .scalar import PiecewisePoly, Poly, ScalarLike, fmt, to_scalar

MASS_FRACTIONS = tuple(Fraction(k, 16) for k in range(1, 17))


class ConfigurationError(ValueError):
    """The price grid cannot decide the game."""


@dataclass(frozen=True)
class SymmetricPricingGame:
    """Unit mass of sellers, each endowed with ``quantity`` per unit mass.

    ``demand`` maps a price to the volume demanded at that price and must be
    non-increasing.  Buyers fill up from the cheapest sellers first.
    """

    quantity: Fraction
    demand: PiecewisePoly
    grid: tuple[Fraction, ...]
    refinement: int = 4

    def __post_init__(self) -> None:
        object.__setattr__(self, "quantity", to_scalar(self.quantity))
        object.__setattr__(self, "grid", tuple(sorted({to_scalar(p) for p in self.grid})))
        if not self.grid:
            raise ConfigurationError("price grid is empty")
        if self.quantity <= 0:
            raise ConfigurationError("quantity must be positive")

    def D(self, p: Fraction) -> Fraction:
        cached = self._demand_table.get(p)
        if cached is not None:
            return cached
        return max(Fraction(0), self.demand(p))

    @cached_property
    def _demand_table(self) -> dict[Fraction, Fraction]:
        return {p: max(Fraction(0), self.demand(p)) for p in self.betrayal_grid}

    @cached_property
    def betrayal_grid(self) -> tuple[Fraction, ...]:
        """The price grid with every gap split into ``refinement`` parts."""
        out = set(self.grid)
        for a, b in zip(self.grid, self.grid[1:]):
            for k in range(1, self.refinement):
                out.add(a + (b - a) * k / self.refinement)
        return tuple(sorted(out))

    # -- payoffs -----------------------------------------------------------

    def level_payoffs(self, profile: Sequence[tuple[Fraction, Fraction]]) -> dict[Fraction, Fraction]:
        """Per-unit-mass revenue at each price of a profile of ``(price, mass)`` blocks."""
        levels: dict[Fraction, Fraction] = {}
        for p, m in profile:
            if m > 0:
                levels[p] = levels.get(p, Fraction(0)) + m
        sold = Fraction(0)
        out = {}
        for p in sorted(levels):
            m = levels[p]
            sell = min(self.quantity * m, max(Fraction(0), self.D(p) - sold))
            sold += sell
            out[p] = p * sell / m
        return out

    def symmetric_payoff(self, p: Fraction) -> Fraction:
        return p * min(self.quantity, self.D(p))

    def entrant_gain(self, p: Fraction) -> bool:
        """Whether a measure-zero seller gains by moving away from the common price ``p``."""
        base = self.symmetric_payoff(p)
        # a measure-zero seller sells its whole endowment wherever residual demand is left
        reach = self._residual_frontier(Fraction(0))
        if reach is not None and min(p, reach) * self.quantity > base:
            return True
        z = self._residual_frontier(min(self.quantity, self.D(p)))
        return z is not None and z > p and z * self.quantity > base

    def _residual_frontier(self, sold: Fraction) -> Optional[Fraction]:
        """Supremum of prices where demand exceeds ``sold``; None if there are none."""
        best: Optional[Fraction] = None
        for el in iter_elements(self.demand.breaks):
            if el[0] == "pt":
                if self.demand(el[1]) > sold:
                    best = el[1]
                continue
            lo, hi = el[1], el[2]
            piece = self.demand.pieces[self.demand.piece_index(sample_in(el))[0]]
            if piece.degree <= 0:
                if piece.coeff(0) > sold:
                    if hi is None:
                        raise ConfigurationError("demand must vanish at high prices")
                    best = hi
                continue
            if piece.coeff(1) > 0:
                raise ConfigurationError("demand must be non-increasing")
            root = (sold - piece.coeff(0)) / piece.coeff(1)
            if (lo is None or root > lo) and (hi is None or root <= hi):
                best = root
            elif hi is not None and root > hi:
                best = hi
        return best

    def is_nash(self, p: Fraction) -> bool:
        return not self.entrant_gain(to_scalar(p))

    def collusion_payoff(self, p: Fraction, g: Fraction, p_dev: Fraction) -> Fraction:
        return self.level_payoffs([(p, 1 - g), (p_dev, g)])[p_dev]

    def profitable_collusions(self, p: Fraction) -> Iterable[tuple[Fraction, Fraction]]:
        """Blocks ``(mass, price)`` whose members all strictly gain by leaving ``p``."""
        base = self.symmetric_payoff(p)
        for g in MASS_FRACTIONS:
            for p_dev in self.grid:
                if p_dev != p and self.collusion_payoff(p, g, p_dev) > base:
                    yield g, p_dev

    def find_betrayal(self, p: Fraction, g: Fraction, p_dev: Fraction) -> Optional[tuple[Fraction, Fraction]]:
        """A sub-block that gains on the collusion while leaving the rest no better than before."""
        base = self.symmetric_payoff(p)
        colluded = self.collusion_payoff(p, g, p_dev)
        for f, p_b in self._betrayal_candidates(p, g, p_dev, base, colluded):
            pay = self.level_payoffs([(p, 1 - g), (p_dev, g * (1 - f)), (p_b, g * f)])
            if pay[p_b] > colluded and base >= pay[p_dev]:
                return f, p_b
        return None

    @cached_property
    def _screen_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        fs = np.array([float(f) for f in MASS_FRACTIONS[:-1]])
        prices = np.array([float(x) for x in self.betrayal_grid])
        demand = np.array([float(self.D(x)) for x in self.betrayal_grid])
        return fs, prices, demand

    def _betrayal_candidates(self, p, g, p_dev, base, colluded) -> list[tuple[Fraction, Fraction]]:
        """Float screen of all (fraction, price) betrayals; exact checks follow on survivors."""
        fs, prices, demand = self._screen_arrays
        fi, pi = np.meshgrid(np.arange(len(fs)), np.arange(len(prices)), indexing="ij")
        fi, pi = fi.ravel(), pi.ravel()
        gf = float(g)
        price = np.stack([np.full(fi.shape, float(p)), np.full(fi.shape, float(p_dev)), prices[pi]], axis=1)
        mass = np.stack([np.full(fi.shape, 1 - gf), gf * (1 - fs[fi]), gf * fs[fi]], axis=1)
        dem = np.stack([np.full(fi.shape, float(self.D(p))), np.full(fi.shape, float(self.D(p_dev))), demand[pi]], axis=1)
        q = float(self.quantity)
        sales = np.zeros_like(mass)
        # three sweeps settle every level since each only depends on cheaper ones
        for _ in range(3):
            for k in range(3):
                lower = price < price[:, [k]]
                same = price == price[:, [k]]
                sold_below = (sales * lower).sum(axis=1)
                group_mass = (mass * same).sum(axis=1)
                room = np.maximum(0.0, dem[:, k] - sold_below)
                share = np.divide(mass[:, k], group_mass, out=np.zeros_like(group_mass), where=group_mass > 0)
                sales[:, k] = np.minimum(q * group_mass, room) * share
        pay = price * sales / np.where(mass > 0, mass, 1.0)
        eps = 1e-9
        keep = (pay[:, 2] > float(colluded) - eps) & (float(base) >= pay[:, 1] - eps) & (price[:, 2] != price[:, 1])
        return [(MASS_FRACTIONS[fi[i]], self.betrayal_grid[pi[i]]) for i in np.flatnonzero(keep)]

    def is_collusion_free(self, p: Fraction) -> bool:
        return next(iter(self.profitable_collusions(p)), None) is None

    def is_bfcf(self, p: Fraction) -> bool:
        return all(self.find_betrayal(p, g, p_dev) is not None for g, p_dev in self.profitable_collusions(p))


@dataclass
class ProfileClassification:
    nash: list[Fraction]
    collusion_free: list[Fraction]
    bfcf: list[Fraction]

    def to_json(self) -> dict:
        return {k: [fmt(p) for p in getattr(self, k)] for k in ("nash", "collusion_free", "bfcf")}


def monopoly_price(game: SymmetricPricingGame) -> Optional[Fraction]:
    """Revenue-maximizing common price over the reals; None when revenue is identically zero."""
    cands = set(game.demand.breaks)
    for el in iter_elements(game.demand.breaks):
        if el[0] == "pt":
            continue
        lo, hi = el[1], el[2]
        piece = game.demand.pieces[game.demand.piece_index(sample_in(el))[0]]
        if piece.degree == 1:
            c0, c1 = piece.coeff(0), piece.coeff(1)
            for x in ((game.quantity - c0) / c1, -c0 / (2 * c1)):
                if (lo is None or x > lo) and (hi is None or x < hi):
                    cands.add(x)
    cands = {x for x in cands if x >= 0}
    best = max(cands, key=lambda x: (game.symmetric_payoff(x), -x), default=None)
    if best is None or game.symmetric_payoff(best) <= 0:
        return None
    return best


def classify_symmetric_profiles(game: SymmetricPricingGame) -> ProfileClassification:
    """Nash, collusion-free and betrayal-free-collusion-free symmetric prices on the grid."""
    mono = monopoly_price(game)
    if mono is not None and mono not in game.grid:
        raise ConfigurationError(f"grid misses the monopoly price {fmt(mono)}")
    missing = [b for b in game.demand.breaks if b not in game.grid and game.grid[0] <= b <= game.grid[-1]]
    if missing:
        raise ConfigurationError(f"grid misses the demand breakpoint {fmt(missing[0])}")
    nash = [p for p in game.grid if game.is_nash(p)]
    bfcf = [p for p in nash if game.is_bfcf(p)]
    cf = [p for p in bfcf if game.is_collusion_free(p)]
    return ProfileClassification(nash, cf, bfcf)


def uniform_grid(lo: ScalarLike, hi: ScalarLike, step: ScalarLike) -> tuple[Fraction, ...]:
    lo, hi, step = to_scalar(lo), to_scalar(hi), to_scalar(step)
    n = int((hi - lo) / step)
    return tuple(lo + k * step for k in range(n + 1))


def oligopoly_example_a(step: ScalarLike = Fraction(1, 16)) -> SymmetricPricingGame:
    """Capacity 1 fully sold at any price up to 2, revenue peaking at 2."""
    demand = PiecewisePoly(
        (Fraction(2), Fraction(4)),
        (Fraction(1), Fraction(0)),
        (Poly.const(1), Poly.linear(2, Fraction(-1, 2)), Poly()),
    )
    return SymmetricPricingGame(Fraction(1), demand, uniform_grid(0, 4, step))


def oligopoly_example_b(step: ScalarLike = Fraction(1, 16)) -> SymmetricPricingGame:
    """Linear demand reaching zero volume at price 2, capacity 3/2."""
    demand = PiecewisePoly((Fraction(2),), (Fraction(0),), (Poly.linear(2, -1), Poly()))
    return SymmetricPricingGame(Fraction(3, 2), demand, uniform_grid(0, 2, step))


# ---------------------------------------------------------------------------
# common value auction


@dataclass(frozen=True)
class ValueFunction:
    """Piecewise value of the winning bid; ``values.at`` fixes one-sided continuity."""

    values: PiecewisePoly

    def __call__(self, x: ScalarLike) -> Fraction:
        return self.values(to_scalar(x))

    def continuity(self) -> list[str]:
        out = []
        for b, v in zip(self.values.breaks, self.values.at):
            left, right = self.values.left_limit(b), self.values.right_limit(b)
            out.append("both" if left == right == v else "left" if v == left else "right" if v == right else "neither")
        return out

    @staticmethod
    def step(at: ScalarLike, below: ScalarLike, above: ScalarLike, right_continuous: bool) -> "ValueFunction":
        at, lo, hi = to_scalar(at), to_scalar(below), to_scalar(above)
        return ValueFunction(PiecewisePoly((at,), (hi if right_continuous else lo,), (Poly.const(lo), Poly.const(hi))))


def _check_premises(v: ValueFunction) -> None:
    first = v.values.pieces[0]
    negative_far_left = (first.degree <= 0 and first.coeff(0) < 0) or (first.degree == 1 and first.coeff(1) > 0)
    if not negative_far_left:
        raise DomainError("the value must be negative for all sufficiently low bids")
    positive = any(x > 0 for x in v.values.at) or any(
        (p.degree == 0 and p.coeff(0) > 0) or p.degree > 0 for p in v.values.pieces
    )
    if not positive:
        raise DomainError("the value must be positive somewhere")


def common_value_pseudo_equilibrium(v: ValueFunction) -> tuple[Fraction, bool]:
    """Limit bid of the better-response sequence and whether it is attained as a Nash profile."""
    _check_premises(v)
    f = v.values
    for el in iter_elements(f.breaks):
        if el[0] == "pt":
            b = el[1]
            if f(b) >= 0:
                return b, True
            if f.right_limit(b) >= 0:
                return b, False
            continue
        lo, hi = el[1], el[2]
        piece = f.pieces[f.piece_index(sample_in(el))[0]]
        if piece.degree > 1:
            raise NotImplementedError("only piecewise-linear values are supported")
        if piece.degree == 1 and piece.coeff(1) > 0:
            root = -piece.coeff(0) / piece.coeff(1)
            if (lo is None or root > lo) and (hi is None or root < hi):
                return root, True
        elif piece.degree == 1 and lo is None and hi is None:
            raise DomainError("value is negative everywhere")
    raise DomainError("value never becomes non-negative")
