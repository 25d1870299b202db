"""Aggregate supply/demand correspondences and per-unit value curves.

Every curve is an exact :class:`PiecewisePoly`.  Correspondences keep the
lower and upper envelopes separately so that the value set at a jump is
the closed interval between them.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional, Sequence, Union

from .population import (
    Atom,
    ConditionVerdict,
    ConditionViolation,
    PopulationSpec,
    UniformSegment,
)
from .scalar import INF, PiecewisePoly, Poly, ScalarLike, fmt, sum_piecewise, to_scalar

Element = tuple  # ("pt", b) or ("open", lo, hi) with None for unbounded ends


def iter_elements(breaks: Sequence[Fraction]) -> Iterator[Element]:
    """Open intervals and breakpoints of the real line, left to right."""
    prev: Optional[Fraction] = None
    for b in breaks:
        yield ("open", prev, b)
        yield ("pt", b)
        prev = b
    yield ("open", prev, None)


def sample_in(element: Element) -> Fraction:
    """A representative point of an element."""
    if element[0] == "pt":
        return element[1]
    lo, hi = element[1], element[2]
    if lo is None and hi is None:
        return Fraction(0)
    if lo is None:
        return hi - 1
    if hi is None:
        return lo + 1
    return (lo + hi) / 2


def poly_range(poly: Poly, lo: Optional[Fraction], hi: Optional[Fraction]) -> tuple:
    """(inf, sup) of a polynomial of degree at most one on the open interval."""
    if poly.degree <= 0:
        c = poly.coeff(0)
        return c, c
    if poly.degree > 1:
        raise NotImplementedError("only piecewise-linear curves are supported")
    slope = poly.coeff(1)
    left = poly(lo) if lo is not None else (-INF if slope > 0 else INF)
    right = poly(hi) if hi is not None else (INF if slope > 0 else -INF)
    return (left, right) if slope > 0 else (right, left)


@dataclass(frozen=True)
class MonotoneStepCorrespondence:
    """Interval-valued monotone map given by its lower and upper envelopes."""

    lower: PiecewisePoly
    upper: PiecewisePoly
    increasing: bool = True

    @property
    def breaks(self) -> tuple[Fraction, ...]:
        return tuple(sorted(set(self.lower.breaks) | set(self.upper.breaks)))

    def __call__(self, x: ScalarLike) -> tuple[Fraction, Fraction]:
        x = to_scalar(x)
        return self.lower(x), self.upper(x)

    def max(self, x: ScalarLike) -> Fraction:
        return self.upper(to_scalar(x))

    def min(self, x: ScalarLike) -> Fraction:
        return self.lower(to_scalar(x))

    @property
    def sup_value(self) -> Fraction:
        """Limit at +inf (increasing) or -inf (decreasing)."""
        piece = self.upper.pieces[-1] if self.increasing else self.upper.pieces[0]
        if piece.degree > 0:
            raise ConditionViolation(3 if self.increasing else 6, "unbounded aggregate volume")
        return piece.coeff(0)

    def negated(self) -> "MonotoneStepCorrespondence":
        return MonotoneStepCorrespondence(self.upper * -1, self.lower * -1, not self.increasing)

    def to_rows(self) -> list[dict]:
        rows = []
        for b in self.breaks:
            lo, hi = self(b)
            rows.append({"price": fmt(b), "lower": fmt(lo), "upper": fmt(hi), "closed_lower": True, "closed_upper": True})
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["price", "lower", "upper", "closed_lower", "closed_upper"])
        writer.writeheader()
        writer.writerows(self.to_rows())
        return buf.getvalue()


@dataclass(frozen=True)
class UnitValueCurve:
    """Per-unit money value with the volume it is averaged over."""

    values: PiecewisePoly
    volume: PiecewisePoly

    def __call__(self, x: ScalarLike) -> Fraction:
        return self.values(to_scalar(x))

    def vacuous(self, x: ScalarLike) -> bool:
        """True where the value is the zero-volume convention."""
        return self.volume(to_scalar(x)) == 0

    @property
    def breaks(self) -> tuple[Fraction, ...]:
        return self.values.breaks

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["price", "value"])
        for b in self.breaks:
            writer.writerow([fmt(b), fmt(self.values(b))])
        return buf.getvalue()


def ratio_curve(num: PiecewisePoly, den: PiecewisePoly, condition: int) -> PiecewisePoly:
    """Exact ``num / den`` piecewise, with 0 where the volume vanishes."""
    breaks = tuple(sorted(set(num.breaks) | set(den.breaks)))
    n, d = num.refine(breaks), den.refine(breaks)
    at, pieces = [], []
    for nv, dv in zip(n.at, d.at):
        if dv == 0:
            if nv != 0:
                raise ConditionViolation(condition, "non-zero value carried by zero volume")
            at.append(Fraction(0))
        else:
            at.append(nv / dv)
    for npc, dpc in zip(n.pieces, d.pieces):
        if dpc.is_zero():
            if not npc.is_zero():
                raise ConditionViolation(condition, "non-zero value carried by zero volume")
            pieces.append(Poly())
        else:
            pieces.append(npc.exact_div(dpc))
    return PiecewisePoly(breaks, tuple(at), tuple(pieces)).simplify()


@dataclass(frozen=True)
class Curves:
    """Everything the graphical construction needs from a population."""

    supply: MonotoneStepCorrespondence
    demand: MonotoneStepCorrespondence
    p_bar: UnitValueCurve
    p_low: UnitValueCurve
    p_hat: UnitValueCurve
    cost_num_upper: PiecewisePoly
    cost_num_lower: PiecewisePoly
    revenue_num: PiecewisePoly

    @property
    def s_max(self) -> Fraction:
        return self.supply.sup_value

    @property
    def d_max(self) -> Fraction:
        return self.demand.sup_value

    def max_d(self, r: ScalarLike) -> Fraction:
        return self.demand.max(r)

    def c_hat(self, q: ScalarLike, rho: ScalarLike) -> Fraction:
        return _c_hat(self, to_scalar(q), to_scalar(rho))

    def blended_volume(self, q: ScalarLike, rho: ScalarLike) -> Fraction:
        q, rho = to_scalar(q), to_scalar(rho)
        lo, hi = self.supply(rho)
        return (1 - q) * lo + q * hi


def _supply_parts(spec: PopulationSpec):
    kind = spec.kind
    vol_up, vol_lo, num_up, num_lo = [], [], [], []
    for cls in spec.suppliers:
        vbar = kind.supplier_volume(cls)
        cost = kind.supplier_payoff_poly(cls) * (-cls.h1)
        w = cls.weight
        if isinstance(w, Atom):
            if w.mass == 0:
                continue
            cut = kind.supplier_cutoff(cls)
            up = PiecewisePoly.step(cut, w.mass, closed=True)
            lo = PiecewisePoly.step(cut, w.mass, closed=False)
        else:
            up = lo = PiecewisePoly.ramp(w.lo, w.hi, w.density)
        vol_up.append(up * vbar)
        vol_lo.append(lo * vbar)
        num_up.append(up * cost)
        num_lo.append(lo * cost)
    return vol_up, vol_lo, num_up, num_lo


def _demand_parts(spec: PopulationSpec):
    kind = spec.kind
    vol_up, vol_lo, num = [], [], []
    for cls in spec.demanders:
        vbar = kind.demander_volume(cls)
        w = cls.weight
        if isinstance(w, Atom):
            if w.mass == 0:
                continue
            cut = kind.demander_cutoff(cls)
            up = PiecewisePoly.step_down(cut, w.mass, closed=True)
            lo = PiecewisePoly.step_down(cut, w.mass, closed=False)
        else:
            up = lo = PiecewisePoly.ramp_down(w.lo, w.hi, w.density)
        vol_up.append(up * vbar)
        vol_lo.append(lo * vbar)
        num.append(up * kind.demander_revenue_pw(cls) * cls.eta1)
    return vol_up, vol_lo, num


def real_supply(spec: PopulationSpec) -> MonotoneStepCorrespondence:
    """Aggregate supply volume as a function of the supply price."""
    vol_up, vol_lo, _, _ = _supply_parts(spec)
    corr = MonotoneStepCorrespondence(
        sum_piecewise(vol_lo).simplify(), sum_piecewise(vol_up).simplify(), increasing=True
    )
    corr.sup_value  # raises when unbounded
    return corr


def real_demand(spec: PopulationSpec) -> MonotoneStepCorrespondence:
    """Aggregate demand volume as a function of the demand price."""
    vol_up, vol_lo, _ = _demand_parts(spec)
    corr = MonotoneStepCorrespondence(
        sum_piecewise(vol_lo).simplify(), sum_piecewise(vol_up).simplify(), increasing=False
    )
    corr.sup_value
    return corr


def supply_cost_curves(spec: PopulationSpec) -> tuple[UnitValueCurve, UnitValueCurve]:
    """Per-unit supply cost with weak (upper) and strict (lower) inclusion."""
    vol_up, vol_lo, num_up, num_lo = _supply_parts(spec)
    up, lo = sum_piecewise(vol_up), sum_piecewise(vol_lo)
    p_bar = ratio_curve(sum_piecewise(num_up), up, 9)
    p_low = ratio_curve(sum_piecewise(num_lo), lo, 9)
    return UnitValueCurve(p_bar, up.simplify()), UnitValueCurve(p_low, lo.simplify())


def demand_revenue_curve(spec: PopulationSpec) -> UnitValueCurve:
    """Per-unit revenue from demanders still willing at each demand price."""
    vol_up, _, num = _demand_parts(spec)
    up = sum_piecewise(vol_up)
    return UnitValueCurve(ratio_curve(sum_piecewise(num), up, 13), up.simplify())


def build_curves(spec: PopulationSpec) -> Curves:
    vol_up, vol_lo, num_up, num_lo = _supply_parts(spec)
    s_up, s_lo = sum_piecewise(vol_up).simplify(), sum_piecewise(vol_lo).simplify()
    n_up, n_lo = sum_piecewise(num_up).simplify(), sum_piecewise(num_lo).simplify()
    supply = MonotoneStepCorrespondence(s_lo, s_up, increasing=True)
    d_vol_up, d_vol_lo, d_num = _demand_parts(spec)
    d_up, d_lo = sum_piecewise(d_vol_up).simplify(), sum_piecewise(d_vol_lo).simplify()
    rev = sum_piecewise(d_num).simplify()
    demand = MonotoneStepCorrespondence(d_lo, d_up, increasing=False)
    supply.sup_value
    demand.sup_value
    return Curves(
        supply=supply,
        demand=demand,
        p_bar=UnitValueCurve(ratio_curve(n_up, s_up, 9), s_up),
        p_low=UnitValueCurve(ratio_curve(n_lo, s_lo, 9), s_lo),
        p_hat=UnitValueCurve(ratio_curve(rev, d_up, 13), d_up),
        cost_num_upper=n_up,
        cost_num_lower=n_lo,
        revenue_num=rev,
    )


def _c_hat(curves: Curves, q: Fraction, rho: Fraction) -> Fraction:
    lo, hi = curves.supply(rho)
    den = (1 - q) * lo + q * hi
    if den == 0:
        return Fraction(0)
    return ((1 - q) * lo * curves.p_low(rho) + q * hi * curves.p_bar(rho)) / den


def conditional_supply_cost(spec_or_curves: Union[PopulationSpec, Curves], q: ScalarLike, rho: ScalarLike) -> Fraction:
    """Blended per-unit cost when a fraction ``q`` of the marginal volume is taken."""
    q, rho = to_scalar(q), to_scalar(rho)
    if not 0 <= q <= 1:
        raise ValueError("q must lie in [0, 1]")
    curves = spec_or_curves if isinstance(spec_or_curves, Curves) else build_curves(spec_or_curves)
    return _c_hat(curves, q, rho)


# ---------------------------------------------------------------------------
# checks


@dataclass
class MonotoneVerdict:
    passed: bool
    reasons: list[str]


def check_maximal_monotone(corr: MonotoneStepCorrespondence) -> MonotoneVerdict:
    """Verify monotonicity, maximality at jumps and finite limits."""
    c = corr if corr.increasing else corr.negated()
    reasons = []
    breaks = tuple(sorted(set(c.lower.breaks) | set(c.upper.breaks)))
    lo, up = c.lower.refine(breaks), c.upper.refine(breaks)
    for i, (pl, pu) in enumerate(zip(lo.pieces, up.pieces)):
        if pl != pu:
            reasons.append(f"envelopes differ on open piece {i}")
        if pl.degree > 1:
            reasons.append(f"piece {i} is not linear")
        elif pl.degree == 1 and pl.coeff(1) < 0:
            reasons.append(f"piece {i} decreases")
    for i, b in enumerate(breaks):
        if lo.at[i] > up.at[i]:
            reasons.append(f"lower exceeds upper at {fmt(b)}")
        if lo.at[i] != lo.pieces[i](b):
            reasons.append(f"lower is not the left limit at {fmt(b)}")
        if up.at[i] != up.pieces[i + 1](b):
            reasons.append(f"upper is not the right limit at {fmt(b)}")
    for end in (up.pieces[0], up.pieces[-1]):
        if end.degree > 0:
            reasons.append("limit at infinity is not finite")
    return MonotoneVerdict(not reasons, reasons)


def _value_range(curve: PiecewisePoly, element: Element) -> tuple:
    if element[0] == "pt":
        v = curve(element[1])
        return v, v, True
    i, _ = curve.piece_index(sample_in(element))
    lo, hi = poly_range(curve.pieces[i], element[1], element[2])
    return lo, hi, lo == hi


def _strictly_increasing_on_flats(value: PiecewisePoly, volume: PiecewisePoly, decreasing_volume: bool) -> Optional[str]:
    """Check ``value`` strictly increases across points sharing a positive volume."""
    breaks = tuple(sorted(set(value.breaks) | set(volume.breaks)))
    prev = None  # (volume, sup value, attained)
    for el in iter_elements(breaks):
        vmin, vmax, _ = _value_range(volume, el)
        if vmin != vmax or vmin <= 0:
            prev = None
            continue
        lo, hi, const = _value_range(value, el)
        if el[0] == "open" and const:
            return f"value is flat where volume is {fmt(vmin)}"
        if prev is not None and prev[0] == vmin:
            if prev[1] > lo or (prev[1] == lo and prev[2] and el[0] == "pt"):
                return f"value does not increase at volume {fmt(vmin)}"
        prev = (vmin, hi, el[0] == "pt")
    return None


def check_curve_conditions(curves: Curves) -> list[ConditionVerdict]:
    """Decide Conditions 9-11 and 13-15 on the exact curves."""
    out = [ConditionVerdict(9, True, "supply cost limits exist (exact division)")]

    reason = None
    for curve, vol in ((curves.p_bar.values, curves.supply.upper), (curves.p_low.values, curves.supply.lower)):
        breaks = tuple(sorted(set(curve.breaks) | set(vol.breaks)))
        for el in iter_elements(breaks):
            vmin, vmax, _ = _value_range(vol, el)
            if vmax <= 0:
                continue
            lo, _, _ = _value_range(curve, el)
            attained = el[0] == "pt" or lo == _value_range(curve, el)[1]
            if lo < 0 or (lo == 0 and attained):
                reason = f"non-positive supply cost with positive supply near {fmt(sample_in(el))}"
                break
        if reason:
            break
    out.append(ConditionVerdict(10, reason is None, reason or "positive cost wherever supply is positive"))

    r1 = _strictly_increasing_on_flats(curves.p_bar.values, curves.supply.upper, False)
    r2 = _strictly_increasing_on_flats(curves.p_low.values, curves.supply.lower, False)
    r = r1 or r2
    out.append(ConditionVerdict(11, r is None, r or "cost increases along flat supply"))

    out.append(ConditionVerdict(13, True, "demand revenue limits exist (exact division)"))
    r = _strictly_increasing_on_flats(curves.p_hat.values, curves.demand.upper, True)
    out.append(ConditionVerdict(14, r is None, r or "revenue increases along flat demand"))

    bad = [b for b in curves.p_hat.values.breaks if curves.p_hat.values(b) != curves.p_hat.values.left_limit(b)]
    out.append(
        ConditionVerdict(
            15, not bad, f"not left-continuous at {', '.join(fmt(b) for b in bad)}" if bad else "left-continuous"
        )
    )
    return out
