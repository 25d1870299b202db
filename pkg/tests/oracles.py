"""Brute-force oracles that avoid the symbolic graph code.

They work on rational lattices that contain every breakpoint of the
random trading specs in ``conftest`` (cutoffs are multiples of 1/4 and
class masses multiples of 1/12), so grid answers are exact there.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from normalmarket.curves import Curves
from normalmarket.graphs import DiscreteMeasure, ZERO_MEASURE
from normalmarket.solver import EMPTY, FAMILY, UNIQUE, EquilibriumCandidate, EquilibriumSet


def price_grid(curves: Curves, step: Fraction = Fraction(1, 16)) -> list[Fraction]:
    """Prices from 0 past the last breakpoint, plus every breakpoint."""
    breaks = set(curves.supply.breaks) | set(curves.demand.breaks)
    top = max(breaks, default=Fraction(1)) + 1
    n = int(top / step) + 1
    return sorted({step * k for k in range(n + 1)} | {b for b in breaks if b >= 0})


@dataclass
class GridGraphs:
    """Demand points and supply intervals tabulated on a price grid."""

    curves: Curves
    prices: list[Fraction]

    def __post_init__(self) -> None:
        c = self.curves
        self.demand_cloud = [(c.p_hat(r), c.max_d(r)) for r in self.prices if c.max_d(r) > 0]
        self.supply_rows = [(rho, *c.supply(rho)) for rho in self.prices]
        self.levels = sorted({d for _, d in self.demand_cloud})
        self._h: dict = {}

    def H(self, y: Fraction):
        if y not in self._h:
            best = [p for p, d in self.demand_cloud if d >= y]
            self._h[y] = max(best) if best else None
        return self._h[y]

    def in_A_D(self, p: Fraction, y: Fraction) -> bool:
        if y <= 0 or p < 0:
            return False
        h = self.H(y)
        return h is not None and p <= h

    def in_A_S(self, p: Fraction, y: Fraction) -> bool:
        # trading: unit cost equals the supply price, volumes fill the interval;
        # between two grid rows the maximal monotone curve passes every height
        if y <= 0:
            return False  # zero volume maps to the excluded origin
        rows = self.supply_rows
        for k, (rho, lo, hi) in enumerate(rows):
            if rho > p:
                break
            if lo <= y <= hi:
                return True
            if k and rows[k - 1][2] < y < lo:
                return True
        return False

    def in_V0(self, p: Fraction, y: Fraction) -> bool:
        return y > 0 and self.in_A_D(p, y) and p == self.H(y)

    def in_V1(self, p: Fraction, y: Fraction) -> bool:
        top = max(pp for pp, _ in self.demand_cloud)
        return self.in_V0(p, y) and p == top

    def in_V2(self, p: Fraction, y: Fraction) -> bool:
        if not self.in_V0(p, y) or self.in_V1(p, y):
            return False
        above = [d for d in self.levels if d > y]
        if not above:
            return False
        mid = (y + above[0]) / 2
        return self.in_V0(p, mid)

    def in_V3(self, p: Fraction, y: Fraction) -> bool:
        if p == 0 and y == 0:
            return True
        if self.in_V1(p, y):
            return True
        return self.in_V0(p, y) and any(pp == p and d <= y for pp, d in self.demand_cloud)


SET_NAMES = ("A_D", "A_S", "V0", "V1", "V2", "V3")


def sample_points(grid: GridGraphs, count: int, seed: int) -> list[tuple[Fraction, Fraction]]:
    """Lattice points, half of them placed on the demand border."""
    rng = np.random.default_rng(seed)
    heights = sorted(
        {Fraction(k, 48) for k in range(0, 61)}
        | set(grid.levels)
        | {x for _, lo, hi in grid.supply_rows for x in (lo, hi)}
    )
    out = []
    for i in range(count):
        y = heights[int(rng.integers(len(heights)))]
        h = grid.H(y) if y > 0 else None
        if i % 2 and h is not None:
            p = h
        else:
            p = grid.prices[int(rng.integers(len(grid.prices)))]
        out.append((p, y))
    return out


def lattice_candidates(curves: Curves, step: Fraction = Fraction(1, 8)) -> list[EquilibriumCandidate]:
    """Single-bid candidates over a (rho, q, r) lattice plus the empty candidate."""
    prices = price_grid(curves, step)
    demand_prices = [r for r in prices if curves.max_d(r) > 0]
    out = [EquilibriumCandidate(ZERO_MEASURE, Fraction(1), ZERO_MEASURE)]
    for rho in prices:
        lo, hi = curves.supply(rho)
        ratios = [Fraction(1)] if lo == hi else [Fraction(k, 4) for k in range(5)]
        for q in ratios:
            Q = curves.blended_volume(q, rho)
            if Q <= 0:
                continue
            supply = DiscreteMeasure(((rho, Q),))
            for r in demand_prices:
                out.append(EquilibriumCandidate(supply, q, DiscreteMeasure(((r, Q),))))
    return out


def in_closure(eqset: EquilibriumSet, cand: EquilibriumCandidate) -> bool:
    """Whether a passing candidate lies in the closure of the returned set."""
    if eqset.kind == EMPTY:
        return False
    if eqset.kind == UNIQUE:
        ref = eqset.candidates[0]
        return (cand.supply_price, cand.volume) == (ref.supply_price, ref.volume)
    assert eqset.kind == FAMILY
    Q = cand.volume
    for iv in eqset.family.intervals():
        lo_ok = iv.lo is None or Q >= iv.lo
        hi_ok = iv.hi is None or Q <= iv.hi
        if lo_ok and hi_ok:
            return True
    return False
