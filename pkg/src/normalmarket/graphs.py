"""Demand and supply graphs in the (per-unit money, volume) plane.

Both graphs are finite unions of :class:`Seg` primitives: linear images of
an interval of a parameter (the demand price for the demand graph, the
supply price or residual ratio for the supply graph).  Every derived set
used by the equilibrium algorithm is a subset of the border
``{(H(y), y)}`` or a horizontal slice, so it is stored as a
:class:`HeightSet`: the exact set of volumes at which a predicate holds.
Predicates are piecewise constant between *critical heights* (endpoint
heights and pairwise crossings of the linear pieces), so evaluating each
one at the critical heights and at one point between consecutive ones
decides it exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Iterable, Optional, Sequence

from .curves import Curves, build_curves, iter_elements, sample_in
from .population import DomainError, PopulationSpec
from .scalar import INF, Poly, ScalarLike, fmt, fmt_ext, to_scalar

Ext = object  # Fraction or +-INF


class NotFound(LookupError):
    """Raised when a queried point is not on the graph."""


@dataclass(frozen=True)
class Interval:
    """Real interval; ``None`` endpoints are infinite."""

    lo: Optional[Fraction]
    hi: Optional[Fraction]
    lo_closed: bool = True
    hi_closed: bool = True

    @staticmethod
    def point(x: Fraction) -> "Interval":
        return Interval(x, x, True, True)

    @staticmethod
    def empty() -> "Interval":
        return Interval(Fraction(1), Fraction(0), False, False)

    @staticmethod
    def real_line() -> "Interval":
        return Interval(None, None, False, False)

    @property
    def is_empty(self) -> bool:
        if self.lo is None or self.hi is None:
            return False
        if self.lo > self.hi:
            return True
        return self.lo == self.hi and not (self.lo_closed and self.hi_closed)

    @property
    def is_point(self) -> bool:
        return not self.is_empty and self.lo is not None and self.lo == self.hi

    def contains(self, x: Fraction) -> bool:
        if self.is_empty:
            return False
        if self.lo is not None and (x < self.lo or (x == self.lo and not self.lo_closed)):
            return False
        if self.hi is not None and (x > self.hi or (x == self.hi and not self.hi_closed)):
            return False
        return True

    def intersect(self, other: "Interval") -> "Interval":
        lo, lo_c = self.lo, self.lo_closed
        if other.lo is not None:
            if lo is None or other.lo > lo:
                lo, lo_c = other.lo, other.lo_closed
            elif other.lo == lo:
                lo_c = lo_c and other.lo_closed
        hi, hi_c = self.hi, self.hi_closed
        if other.hi is not None:
            if hi is None or other.hi < hi:
                hi, hi_c = other.hi, other.hi_closed
            elif other.hi == hi:
                hi_c = hi_c and other.hi_closed
        return Interval(lo, hi, lo_c, hi_c)

    def image(self, f: Poly) -> "Interval":
        """Image under a polynomial of degree at most one."""
        if self.is_empty:
            return Interval.empty()
        a, b = f.coeff(0), f.coeff(1)
        if f.degree > 1:
            raise NotImplementedError("only linear primitives are supported")
        if b == 0:
            return Interval.point(a)
        lo = None if self.lo is None else a + b * self.lo
        hi = None if self.hi is None else a + b * self.hi
        if b > 0:
            return Interval(lo, hi, self.lo_closed, self.hi_closed)
        return Interval(hi, lo, self.hi_closed, self.lo_closed)

    def sup(self) -> tuple[Ext, bool]:
        """(supremum, attained); ``(-INF, False)`` when empty."""
        if self.is_empty:
            return -INF, False
        if self.hi is None:
            return INF, False
        return self.hi, self.hi_closed

    def inf(self) -> tuple[Ext, bool]:
        if self.is_empty:
            return INF, False
        if self.lo is None:
            return -INF, False
        return self.lo, self.lo_closed

    def sample(self) -> Fraction:
        """Some point of a nonempty interval."""
        if self.lo is None and self.hi is None:
            return Fraction(0)
        if self.lo is None:
            return self.hi - 1
        if self.hi is None:
            return self.lo + 1
        return (self.lo + self.hi) / 2

    def to_json(self) -> dict:
        return {
            "lo": None if self.lo is None else fmt(self.lo),
            "hi": None if self.hi is None else fmt(self.hi),
            "lo_closed": self.lo_closed,
            "hi_closed": self.hi_closed,
        }


def _t_where(s: Poly, y: Fraction, op: str) -> Interval:
    """Parameters t with ``s(t) op y`` for ``op`` in ``==, >=, >, <=``."""
    s0, s1 = s.coeff(0), s.coeff(1)
    if s1 == 0:
        holds = {"==": s0 == y, ">=": s0 >= y, ">": s0 > y, "<=": s0 <= y}[op]
        return Interval.real_line() if holds else Interval.empty()
    tau = (y - s0) / s1
    if op == "==":
        return Interval.point(tau)
    up = (op in (">=", ">")) == (s1 > 0)
    closed = op != ">"
    return Interval(tau, None, closed, False) if up else Interval(None, tau, False, closed)


@dataclass(frozen=True)
class Seg:
    """Linear primitive ``t -> (p(t), s(t))`` over a parameter interval.

    ``rho``/``q`` map the parameter to the generating supply bid for supply
    primitives; demand primitives are parametrised by the demand price.
    """

    p: Poly
    s: Poly
    t: Interval
    rho: Optional[Poly] = None
    q: Optional[Poly] = None

    def at(self, t: Fraction) -> tuple[Fraction, Fraction]:
        return self.p(t), self.s(t)

    @property
    def kind(self) -> str:
        if self.t.is_point:
            return "point"
        if self.s.degree <= 0:
            return "horizontal"
        if self.p.degree <= 0:
            return "vertical"
        return "sloped"

    def heights(self) -> Interval:
        return self.t.image(self.s)

    def prices(self) -> Interval:
        return self.t.image(self.p)

    def prices_at_height(self, y: Fraction) -> Interval:
        return self.t.intersect(_t_where(self.s, y, "==")).image(self.p)

    def heights_at_price(self, p: Fraction) -> Interval:
        return self.t.intersect(_t_where(self.p, p, "==")).image(self.s)

    def sup_price_above(self, y: Fraction, strict: bool) -> tuple[Ext, bool]:
        sub = self.t.intersect(_t_where(self.s, y, ">" if strict else ">="))
        return sub.image(self.p).sup()

    def locate(self, p: Fraction, s: Fraction) -> Optional[Fraction]:
        """Parameter of the point ``(p, s)`` if it lies on this primitive."""
        sub = self.t.intersect(_t_where(self.s, s, "==")).intersect(_t_where(self.p, p, "=="))
        if sub.is_empty:
            return None
        return sub.sample() if not sub.is_point else sub.lo

    def line(self) -> Optional[tuple[Fraction, Fraction]]:
        """``(a, b)`` with ``p = a + b*s`` along the primitive, if it is not horizontal."""
        s1 = self.s.coeff(1)
        if s1 == 0 or self.t.is_point:
            return None
        b = self.p.coeff(1) / s1
        return self.p.coeff(0) - b * self.s.coeff(0), b

    def endpoint_values(self) -> list[tuple[Fraction, Fraction]]:
        out = []
        for t in (self.t.lo, self.t.hi):
            if t is not None:
                out.append(self.at(t))
        return out

    def to_json(self) -> dict:
        out = {"kind": self.kind, "t": self.t.to_json()}
        out["p"] = [fmt(c) for c in self.p.coeffs] or ["0"]
        out["s"] = [fmt(c) for c in self.s.coeffs] or ["0"]
        if self.rho is not None:
            out["rho"] = [fmt(c) for c in self.rho.coeffs] or ["0"]
            out["q"] = [fmt(c) for c in self.q.coeffs] or ["0"]
        return out


T = Poly.linear(0, 1)


def demand_primitives(curves: Curves) -> list[Seg]:
    """Image of ``r -> (p_hat(r), max D(r))`` without the volume-zero points."""
    phat, vol = curves.p_hat.values, curves.demand.upper
    breaks = tuple(sorted(set(phat.breaks) | set(vol.breaks)))
    ph, dv = phat.refine(breaks), vol.refine(breaks)
    out = []
    for el in iter_elements(breaks):
        if el[0] == "pt":
            i = breaks.index(el[1])
            if dv.at[i] > 0:
                out.append(Seg(Poly.const(ph.at[i]), Poly.const(dv.at[i]), Interval.point(el[1])))
            continue
        i, _ = dv.piece_index(sample_in(el))
        dpiece = dv.pieces[i]
        if dpiece.is_zero():
            continue
        out.append(Seg(ph.pieces[i], dpiece, Interval(el[1], el[2], False, False)))
    return out


def supply_primitives(curves: Curves) -> list[Seg]:
    """Points ``(c_hat(q, rho), Q(q, rho))`` with ``Q > 0``.

    Open pieces in ``rho`` carry ``q = 1`` (no residual volume to split),
    a jump of the real supply at ``b`` becomes a vertical segment in ``q``.
    """
    lo_c, up_c = curves.supply.lower, curves.supply.upper
    pb, pl = curves.p_bar.values, curves.p_low.values
    breaks = tuple(sorted(set(lo_c.breaks) | set(up_c.breaks) | set(pb.breaks) | set(pl.breaks)))
    lo_r, up_r, pb_r = lo_c.refine(breaks), up_c.refine(breaks), pb.refine(breaks)
    out = []
    one = Poly.const(1)
    for el in iter_elements(breaks):
        if el[0] == "open":
            i, _ = up_r.piece_index(sample_in(el))
            vol = up_r.pieces[i]
            if vol.is_zero():
                continue
            out.append(Seg(pb_r.pieces[i], vol, Interval(el[1], el[2], False, False), rho=T, q=one))
            continue
        b = el[1]
        lo, hi = lo_c(b), up_c(b)
        if hi == 0:
            continue
        if lo == hi:
            out.append(Seg(Poly.const(pb(b)), Poly.const(hi), Interval.point(Fraction(1)), rho=Poly.const(b), q=one))
            continue
        cost_hi, cost_lo = pb(b), pl(b)
        if lo > 0 and cost_hi != cost_lo:
            raise NotImplementedError("supply jump with distinct marginal costs gives a curved graph")
        out.append(
            Seg(
                Poly.const(cost_hi),
                Poly.linear(lo, hi - lo),
                Interval(Fraction(0), Fraction(1), lo > 0, True),
                rho=Poly.const(b),
                q=T,
            )
        )
    return out


@dataclass(frozen=True)
class HeightSet:
    """Exact set of volumes, as a sorted union of points and open intervals."""

    elements: tuple = ()

    def contains(self, y: Fraction) -> bool:
        for el in self.elements:
            if el[0] == "pt" and el[1] == y:
                return True
            if el[0] == "open" and (el[1] is None or el[1] < y) and (el[2] is None or y < el[2]):
                return True
        return False

    @property
    def is_empty(self) -> bool:
        return not self.elements

    def sup(self) -> tuple[Ext, bool]:
        if not self.elements:
            return -INF, False
        last = self.elements[-1]
        if last[0] == "pt":
            return last[1], True
        return (INF if last[2] is None else last[2]), False

    def intervals(self) -> list[Interval]:
        """Merge adjacent elements into maximal intervals."""
        out: list[Interval] = []
        for el in self.elements:
            iv = Interval.point(el[1]) if el[0] == "pt" else Interval(el[1], el[2], False, False)
            if out:
                prev = out[-1]
                touching = prev.hi is not None and iv.lo is not None and prev.hi == iv.lo and (prev.hi_closed or iv.lo_closed)
                if touching:
                    out[-1] = Interval(prev.lo, iv.hi, prev.lo_closed, iv.hi_closed)
                    continue
            out.append(iv)
        return out

    def representatives(self) -> list[Fraction]:
        return [sample_in(el) for el in self.elements]

    def to_json(self) -> list[dict]:
        return [iv.to_json() for iv in self.intervals()]


def _crossings(lines: Sequence[tuple[Fraction, Fraction]]) -> set[Fraction]:
    out = set()
    uniq = sorted(set(lines))
    for i, (a1, b1) in enumerate(uniq):
        for a2, b2 in uniq[i + 1 :]:
            if b1 != b2:
                out.add((a2 - a1) / (b1 - b2))
    return out


@dataclass
class MarketGraphs:
    """Demand and supply graphs of one population, with exact set queries."""

    curves: Curves
    demand: list[Seg]
    supply: list[Seg]
    _h_cache: dict = field(default_factory=dict, repr=False)

    # -- scalar summaries -------------------------------------------------

    @cached_property
    def p_star(self) -> tuple[Ext, bool]:
        """Highest per-unit revenue on the demand graph."""
        best: tuple = (-INF, False)
        for seg in self.demand:
            best = _max_ext(best, seg.prices().sup())
        return best

    @cached_property
    def d_star(self) -> Optional[Fraction]:
        """Largest volume at which the highest revenue is reached."""
        p, attained = self.p_star
        if not attained:
            return None
        best: tuple = (-INF, False)
        for seg in self.demand:
            best = _max_ext(best, seg.heights_at_price(p).sup())
        return best[0] if best[0] != -INF else None

    @property
    def d_max(self) -> Fraction:
        return self.curves.d_max

    @property
    def s_max(self) -> Fraction:
        return self.curves.s_max

    # -- slices -------------------------------------------------------------

    def H(self, y: Fraction, strict: bool = False) -> tuple[Ext, bool]:
        """Supremum of revenue over demand points with volume >= y (> y if strict)."""
        key = (y, strict)
        if key not in self._h_cache:
            best: tuple = (-INF, False)
            for seg in self.demand:
                best = _max_ext(best, seg.sup_price_above(y, strict))
            self._h_cache[key] = best
        return self._h_cache[key]

    def supply_floor(self, y: Fraction) -> tuple[Ext, bool]:
        """Infimum of supply-graph prices at volume ``y``."""
        best: tuple = (INF, False)
        for seg in self.supply:
            best = _min_ext(best, seg.prices_at_height(y).inf())
        return best

    def demand_prices_at(self, y: Fraction) -> list[Interval]:
        return [iv for seg in self.demand if not (iv := seg.prices_at_height(y)).is_empty]

    def supply_prices_at(self, y: Fraction) -> list[Interval]:
        return [iv for seg in self.supply if not (iv := seg.prices_at_height(y)).is_empty]

    def demand_heights_at(self, p: Fraction) -> list[Interval]:
        return [iv for seg in self.demand if not (iv := seg.heights_at_price(p)).is_empty]

    # -- point membership ---------------------------------------------------

    def in_D(self, p: ScalarLike, y: ScalarLike) -> bool:
        p, y = to_scalar(p), to_scalar(y)
        return any(iv.contains(p) for iv in self.demand_prices_at(y))

    def in_S(self, p: ScalarLike, y: ScalarLike) -> bool:
        p, y = to_scalar(p), to_scalar(y)
        return y > 0 and any(iv.contains(p) for iv in self.supply_prices_at(y))

    def in_A_D(self, p: ScalarLike, y: ScalarLike) -> bool:
        p, y = to_scalar(p), to_scalar(y)
        if y <= 0 or p < 0:
            return False
        h, att = self.H(y)
        return p < h or (p == h and att)

    def in_A_S(self, p: ScalarLike, y: ScalarLike) -> bool:
        p, y = to_scalar(p), to_scalar(y)
        low, att = self.supply_floor(y)
        return p > low or (p == low and att)

    def in_B(self, p: ScalarLike, y: ScalarLike) -> bool:
        p, y = to_scalar(p), to_scalar(y)
        if p == 0 and y == 0:
            return True
        return self.in_A_D(p, y) and self.in_A_S(p, y)

    def _border(self, p: Fraction, y: Fraction, pred: Callable[[Fraction], bool]) -> bool:
        if y <= 0:
            return False
        h, att = self.H(y)
        return att and h >= 0 and p == h and pred(y)

    def in_V0(self, p: ScalarLike, y: ScalarLike) -> bool:
        return self._border(to_scalar(p), to_scalar(y), self.v0_at)

    def in_V1(self, p: ScalarLike, y: ScalarLike) -> bool:
        return self._border(to_scalar(p), to_scalar(y), self.v1_at)

    def in_V2(self, p: ScalarLike, y: ScalarLike) -> bool:
        return self._border(to_scalar(p), to_scalar(y), self.v2_at)

    def in_V3(self, p: ScalarLike, y: ScalarLike) -> bool:
        p, y = to_scalar(p), to_scalar(y)
        if p == 0 and y == 0:
            return True
        return self._border(p, y, self.v3_at)

    # -- height predicates (the point is (H(y), y)) --------------------------

    def v0_at(self, y: Fraction) -> bool:
        if y <= 0:
            return False
        h, att = self.H(y)
        return att and h >= 0

    def v1_at(self, y: Fraction) -> bool:
        return self.v0_at(y) and self.d_star is not None and y <= self.d_star

    def is_column_top(self, y: Fraction) -> bool:
        """True unless the border continues vertically just above ``y``."""
        above = self._next_critical(y)
        if above is None:
            return True
        m = (y + above) / 2
        return not (self.v0_at(m) and self.H(m)[0] == self.H(y)[0])

    def v2_at(self, y: Fraction) -> bool:
        return self.v0_at(y) and not self.v1_at(y) and not self.is_column_top(y)

    def v3_at(self, y: Fraction) -> bool:
        if not self.v0_at(y):
            return False
        if self.v1_at(y):
            return True
        h = self.H(y)[0]
        for iv in self.demand_heights_at(h):
            low, att = iv.inf()
            if low < y or (low == y and att):
                return True
        return False

    def b_positive_at(self, y: Fraction) -> bool:
        """The horizontal slice of ``(A_D & A_S)`` at ``y`` has positive length."""
        if y <= 0:
            return False
        h, _ = self.H(y)
        low, _ = self.supply_floor(y)
        return h > max(low, Fraction(0))

    # -- height sets --------------------------------------------------------

    @cached_property
    def critical_heights(self) -> tuple[Fraction, ...]:
        heights: set[Fraction] = {Fraction(0), self.d_max, self.s_max}
        prices: set[Fraction] = {Fraction(0)}
        lines = []
        for seg in self.demand + self.supply:
            for p, s in seg.endpoint_values():
                heights.add(s)
                prices.add(p)
            if seg.s.degree <= 0 and not seg.heights().is_empty:
                heights.add(seg.s.coeff(0))
            ln = seg.line()
            if ln is not None:
                lines.append(ln)
        if self.d_star is not None:
            heights.add(self.d_star)
        p_star, _ = self.p_star
        if p_star not in (INF, -INF):
            prices.add(p_star)
        lines.extend((p, Fraction(0)) for p in prices)
        heights |= _crossings(lines)
        return tuple(sorted(h for h in heights if h >= 0))

    def _next_critical(self, y: Fraction) -> Optional[Fraction]:
        for c in self.critical_heights:
            if c > y:
                return c
        return None

    def height_set(self, pred: Callable[[Fraction], bool], floor: Fraction = Fraction(0)) -> HeightSet:
        out = []
        for el in iter_elements(self.critical_heights):
            if el[0] == "open" and el[1] is None:
                continue
            y = sample_in(el)
            if y < floor:
                continue
            if pred(y):
                out.append(el)
        return HeightSet(tuple(out))

    @cached_property
    def V0(self) -> HeightSet:
        return self.height_set(self.v0_at)

    @cached_property
    def V1(self) -> HeightSet:
        return self.height_set(self.v1_at)

    @cached_property
    def V2(self) -> HeightSet:
        return self.height_set(self.v2_at)

    @cached_property
    def V3(self) -> HeightSet:
        """Volumes of the admissible border, excluding the origin."""
        return self.height_set(self.v3_at)

    def border_point(self, y: Fraction) -> tuple[Fraction, Fraction]:
        return self.H(y)[0], y

    # -- finders --------------------------------------------------------------

    def demand_price_finder(self, p: ScalarLike, d: ScalarLike) -> Fraction:
        """Demand price generating the demand-graph point ``(p, d)``."""
        p, d = to_scalar(p), to_scalar(d)
        for seg in self.demand:
            t = seg.locate(p, d)
            if t is not None:
                return t
        raise NotFound(f"({fmt(p)}, {fmt(d)}) is not on the demand graph")

    def supply_bid_finder(self, p: ScalarLike, s: ScalarLike) -> tuple[Fraction, Fraction]:
        """Supply price and residual ratio generating ``(p, s)``."""
        p, s = to_scalar(p), to_scalar(s)
        for seg in self.supply:
            t = seg.locate(p, s)
            if t is not None:
                return seg.rho(t), seg.q(t)
        raise NotFound(f"({fmt(p)}, {fmt(s)}) is not on the supply graph")

    def supply_price_finder(self, p: ScalarLike, s: ScalarLike) -> Fraction:
        return self.supply_bid_finder(p, s)[0]

    def residual_ratio_finder(self, p: ScalarLike, s: ScalarLike) -> Fraction:
        return self.supply_bid_finder(p, s)[1]

    def to_json(self) -> dict:
        p_star, att = self.p_star
        return {
            "demand_graph": [seg.to_json() for seg in self.demand],
            "supply_graph": [seg.to_json() for seg in self.supply],
            "p_star": fmt_ext(p_star),
            "p_star_attained": att,
            "d_star": None if self.d_star is None else fmt(self.d_star),
            "V0": self.V0.to_json(),
            "V1": self.V1.to_json(),
            "V2": self.V2.to_json(),
            "V3": self.V3.to_json(),
            "A_D": self._region_json(lambda y: self.H(y), upper=True),
            "A_S": self._region_json(lambda y: self.supply_floor(y), upper=False),
        }

    def _region_json(self, bound, upper: bool) -> list[dict]:
        rows = []
        for el in iter_elements(self.critical_heights):
            if el[0] == "open" and el[1] is None:
                continue
            y = sample_in(el)
            if y <= 0:
                continue
            v, att = bound(y)
            if v in (INF, -INF) or (upper and v < 0):
                continue
            row = {"heights": _element_json(el), "closed": att}
            row["x_max" if upper else "x_min"] = fmt(v) if el[0] == "pt" else _edge_json(bound, el)
            rows.append(row)
        return rows


def _edge_json(bound, el) -> list:
    lo, hi = el[1], el[2]
    span = (hi - lo) if hi is not None else Fraction(2)
    a, b = lo + span / 4, lo + 3 * span / 4
    va, vb = bound(a)[0], bound(b)[0]
    slope = (vb - va) / (b - a)
    return [fmt(va - slope * a), fmt(slope)]


def _element_json(el) -> dict:
    if el[0] == "pt":
        return Interval.point(el[1]).to_json()
    return Interval(el[1], el[2], False, False).to_json()


def _max_ext(a: tuple, b: tuple) -> tuple:
    if b[0] > a[0]:
        return b
    if b[0] == a[0]:
        return a[0], a[1] or b[1]
    return a


def _min_ext(a: tuple, b: tuple) -> tuple:
    if b[0] < a[0]:
        return b
    if b[0] == a[0]:
        return a[0], a[1] or b[1]
    return a


def build_graphs(spec_or_curves) -> MarketGraphs:
    curves = spec_or_curves if isinstance(spec_or_curves, Curves) else build_curves(spec_or_curves)
    return MarketGraphs(curves, demand_primitives(curves), supply_primitives(curves))


def build_demand_graph(curves: Curves) -> list[Seg]:
    return demand_primitives(curves)


def build_supply_graph(curves: Curves) -> list[Seg]:
    return supply_primitives(curves)


# ---------------------------------------------------------------------------
# measures


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely many atoms ``(location, mass)`` plus an optional tail note."""

    atoms: tuple[tuple[Fraction, Fraction], ...] = ()
    tail: Optional[dict] = None

    def __post_init__(self) -> None:
        merged: dict[Fraction, Fraction] = {}
        for loc, mass in self.atoms:
            loc, mass = to_scalar(loc), to_scalar(mass)
            if mass < 0:
                raise ValueError("atom masses must be non-negative")
            if mass > 0:
                merged[loc] = merged.get(loc, Fraction(0)) + mass
        object.__setattr__(self, "atoms", tuple(sorted(merged.items())))

    @property
    def total(self) -> Fraction:
        return sum((m for _, m in self.atoms), Fraction(0))

    @property
    def support(self) -> tuple[Fraction, ...]:
        return tuple(loc for loc, _ in self.atoms)

    def mass_at(self, loc: Fraction) -> Fraction:
        return dict(self.atoms).get(loc, Fraction(0))

    def mass_above(self, loc: Fraction) -> Fraction:
        return sum((m for r, m in self.atoms if r > loc), Fraction(0))

    def to_json(self) -> dict:
        out = {"atoms": [[fmt(r), fmt(m)] for r, m in self.atoms]}
        out["tail"] = self.tail
        return out

    @staticmethod
    def from_json(obj: dict) -> "DiscreteMeasure":
        return DiscreteMeasure(tuple((to_scalar(r), to_scalar(m)) for r, m in obj.get("atoms", [])), obj.get("tail"))


ZERO_MEASURE = DiscreteMeasure()


def supply_measure(graphs: MarketGraphs, p: ScalarLike, s: ScalarLike) -> DiscreteMeasure:
    """Point mass of size ``s`` at the supply price generating ``(p, s)``."""
    p, s = to_scalar(p), to_scalar(s)
    if p == 0 and s == 0:
        return ZERO_MEASURE
    rho = graphs.supply_price_finder(p, s)
    return DiscreteMeasure(((rho, s),))


@dataclass(frozen=True)
class DemandMeasures:
    """Canonical members of the demand price measure set at a border point."""

    point: tuple[Fraction, Fraction]
    representatives: tuple[DiscreteMeasure, ...]
    ratio_floor: Fraction
    achievable: tuple[tuple[Fraction, Fraction], ...]  # (r, max D(r)) with revenue p
    continuum: bool

    @property
    def max_support_size(self) -> Ext:
        if self.continuum:
            return INF
        if len(self.achievable) <= 1:
            return len(self.achievable)
        vols = [d for _, d in self.achievable]
        s = self.point[1]
        if self.ratio_floor == 0:
            return len(self.achievable)
        if min(vols) < s < max(vols):
            return len(self.achievable)
        return sum(1 for d in vols if d == s) or 1


def _achievable_prices(graphs: MarketGraphs, p: Fraction) -> tuple[list[tuple[Fraction, Fraction]], bool]:
    pts, continuum = [], False
    for seg in graphs.demand:
        sub = seg.t.intersect(_t_where(seg.p, p, "=="))
        if sub.is_empty:
            continue
        if sub.is_point:
            pts.append((sub.lo, seg.s(sub.lo)))
        else:
            continuum = True
            for t in (sub.lo, sub.hi):
                if t is not None and sub.contains(t):
                    pts.append((t, seg.s(t)))
            pts.append((sub.sample(), seg.s(sub.sample())))
    return sorted(set(pts)), continuum


def demand_measures(graphs: MarketGraphs, p: ScalarLike, s: ScalarLike) -> DemandMeasures:
    """Demand price measures selectable at the border point ``(p, s)``."""
    p, s = to_scalar(p), to_scalar(s)
    if p == 0 and s == 0:
        return DemandMeasures((p, s), (ZERO_MEASURE,), Fraction(0), (), False)
    if not graphs.in_V3(p, s):
        raise DomainError(f"({fmt(p)}, {fmt(s)}) is not on the admissible border")
    achievable, continuum = _achievable_prices(graphs, p)
    in_v1 = graphs.in_V1(p, s)
    floor = Fraction(0) if in_v1 else Fraction(1)
    reps: list[DiscreteMeasure] = []
    exact = [r for r, d in achievable if d == s]
    if exact:
        reps.append(DiscreteMeasure(((exact[0], s),)))
    elif in_v1:
        r, d = max(achievable, key=lambda a: a[1])
        reps.append(DiscreteMeasure(((r, s),)))
    else:
        above = [a for a in achievable if a[1] > s]
        below = [a for a in achievable if a[1] < s]
        (r1, d1), (r2, d2) = min(above, key=lambda a: a[1]), max(below, key=lambda a: a[1])
        reps.append(_two_atom(r1, d1, r2, d2, s))
    full = _full_support(achievable, s, floor)
    if full is not None and full not in reps:
        reps.append(full)
    return DemandMeasures((p, s), tuple(reps), floor, tuple(achievable), continuum)


def _two_atom(r1, d1, r2, d2, s) -> DiscreteMeasure:
    return DiscreteMeasure(((r1, d1 * (s - d2) / (d1 - d2)), (r2, d2 * (d1 - s) / (d1 - d2))))


def _full_support(achievable, s, floor) -> Optional[DiscreteMeasure]:
    """A representative charging every achievable price, when one exists."""
    if len(achievable) <= 1:
        return None
    n = len(achievable)
    vols = [d for _, d in achievable]
    lo_i = min(range(n), key=lambda i: vols[i])
    hi_i = max(range(n), key=lambda i: vols[i])
    if floor == 0 and s <= min(vols):
        # rationing allowed: equal mass on every achievable price
        return DiscreteMeasure(tuple((r, s / n) for r, _ in achievable))
    if not vols[lo_i] < s < vols[hi_i]:
        return None
    mean = sum(vols) / n
    lam = Fraction(1, 2)
    while True:
        target = (s - lam * mean) / (1 - lam)
        if vols[lo_i] < target < vols[hi_i]:
            break
        lam /= 2
    w = [lam / n] * n
    d1, d2 = vols[hi_i], vols[lo_i]
    w[hi_i] += (1 - lam) * (target - d2) / (d1 - d2)
    w[lo_i] += (1 - lam) * (d1 - target) / (d1 - d2)
    return DiscreteMeasure(tuple((achievable[i][0], w[i] * vols[i]) for i in range(n)))


def is_demand_measure_admissible(graphs: MarketGraphs, p: ScalarLike, s: ScalarLike, mu: DiscreteMeasure) -> bool:
    """Membership test for the demand price measure set at ``(p, s)``."""
    p, s = to_scalar(p), to_scalar(s)
    if p == 0 and s == 0:
        return mu.total == 0
    if not graphs.in_V3(p, s) or mu.total != s:
        return False
    ratio = Fraction(0)
    for r, m in mu.atoms:
        dmax = graphs.curves.max_d(r)
        if dmax == 0 or graphs.curves.p_hat(r) != p:
            return False
        ratio += m / dmax
    floor = 0 if graphs.in_V1(p, s) else 1
    return floor <= ratio <= 1
