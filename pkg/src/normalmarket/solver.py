"""Competitive equilibria: the graphical algorithm, the profitable set and a verifier."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

from .curves import Curves, iter_elements, sample_in
from .graphs import (
    DemandMeasures,
    DiscreteMeasure,
    HeightSet,
    Interval,
    MarketGraphs,
    Seg,
    ZERO_MEASURE,
    _t_where,
    build_graphs,
    demand_measures,
)
from .population import DomainError, PopulationSpec
from .scalar import INF, ScalarLike, decimal_str, fmt, fmt_ext, to_scalar

EMPTY = "Empty"
UNIQUE = "UniquePositiveProfit"
FAMILY = "ZeroProfitFamily"

CLAUSE_EQUAL_BID = "Equal Supply Bid"
CLAUSE_UNMATCHED = "No Unmatched Supply"
CLAUSE_MAXIMIZERS = "Demand Prices as Conditional Maximizers"
CLAUSE_SANDWICH = "Sandwiched Demand Prices"
CLAUSE_NOT_HIGHER = "Not Higher Supply Price"
CLAUSE_NOT_LOWER = "Not Lower Supply Price"

SpecOrGraphs = Union[PopulationSpec, MarketGraphs]


def _graphs(obj: SpecOrGraphs) -> MarketGraphs:
    return obj if isinstance(obj, MarketGraphs) else build_graphs(obj)


@dataclass(frozen=True)
class EquilibriumCandidate:
    """Reduced form of a competitive strategy: one supply bid and a demand price measure."""

    supply: DiscreteMeasure
    q: Fraction
    demand: DiscreteMeasure

    def __post_init__(self) -> None:
        object.__setattr__(self, "q", to_scalar(self.q))

    @property
    def supply_price(self) -> Optional[Fraction]:
        return self.supply.atoms[0][0] if self.supply.atoms else None

    @property
    def volume(self) -> Fraction:
        return self.supply.total

    def to_json(self) -> dict:
        supply = None
        if self.supply.atoms:
            supply = {"price": fmt(self.supply.atoms[0][0]), "mass": fmt(self.supply.atoms[0][1])}
        return {"supply": supply, "q": fmt(self.q), "demand": self.demand.to_json()}

    @staticmethod
    def from_json(obj: dict) -> "EquilibriumCandidate":
        sup = obj.get("supply")
        atoms = () if not sup else ((to_scalar(sup["price"]), to_scalar(sup["mass"])),)
        return EquilibriumCandidate(DiscreteMeasure(atoms), to_scalar(obj.get("q", 1)), DiscreteMeasure.from_json(obj["demand"]))


@dataclass(frozen=True)
class EquilibriumPoint:
    """A point of the supply graph selected by the algorithm."""

    price: Fraction
    volume: Fraction
    supply_price: Optional[Fraction]
    q: Fraction
    measures: DemandMeasures

    def candidates(self) -> list[EquilibriumCandidate]:
        supply = ZERO_MEASURE if self.supply_price is None else DiscreteMeasure(((self.supply_price, self.volume),))
        return [EquilibriumCandidate(supply, self.q, mu) for mu in self.measures.representatives]


def rationing_ratio(curves: Curves, demand: DiscreteMeasure) -> Fraction:
    """Sum of served fractions of the demand willing at each quoted price."""
    total = Fraction(0)
    for r, m in demand.atoms:
        d = curves.max_d(r)
        total += m / d if d > 0 else Fraction(0)
    return total


@dataclass
class EquilibriumSet:
    """Result of the graphical algorithm."""

    kind: str
    points: list[EquilibriumPoint]
    family: Optional[HeightSet]
    trace: dict
    graphs: MarketGraphs = field(repr=False)

    @property
    def candidates(self) -> list[EquilibriumCandidate]:
        return [c for pt in self.points for c in pt.candidates()]

    def is_rationing(self, cand: EquilibriumCandidate) -> bool:
        return cand.volume > 0 and rationing_ratio(self.graphs.curves, cand.demand) < 1

    def to_json(self) -> dict:
        cands = []
        for c in self.candidates:
            row = c.to_json()
            row["rationing"] = self.is_rationing(c)
            row["multiple_demand_prices"] = len(c.demand.atoms) > 1
            cands.append(row)
        family = None
        if self.family is not None:
            family = [
                {"volumes": iv.to_json(), "price_at_low_end": _border_price_json(self.graphs, iv)}
                for iv in self.family.intervals()
            ]
        return {
            "kind": self.kind,
            "candidates": cands,
            "family": family,
            "trace": {k: fmt_ext(v) if not isinstance(v, (bool, str)) else v for k, v in self.trace.items()},
        }


def _border_price_json(graphs: MarketGraphs, iv: Interval) -> Optional[str]:
    if iv.lo is None:
        return None
    y = iv.lo if iv.lo_closed else (iv.lo + (iv.hi if iv.hi is not None else iv.lo + 2)) / 2
    return fmt_ext(graphs.H(y)[0])


def _point(graphs: MarketGraphs, p: Fraction, s: Fraction, demand_price: Optional[Fraction] = None) -> EquilibriumPoint:
    """Supply bid at ``(p, s)`` with demand measures at ``(demand_price, s)``."""
    if p == 0 and s == 0:
        rho, q = None, Fraction(1)
    else:
        rho, q = graphs.supply_bid_finder(p, s)
    dp = p if demand_price is None else demand_price
    return EquilibriumPoint(p, s, rho, q, demand_measures(graphs, dp, s))


def find_equilibria(spec: SpecOrGraphs) -> EquilibriumSet:
    """Run the graphical equilibrium-finding algorithm on exact sets."""
    g = _graphs(spec)
    zero = Fraction(0)

    def q_low_pred(y: Fraction) -> bool:
        if g.b_positive_at(y):
            return True
        return g.v2_at(y) and g.in_S(g.H(y)[0], y)

    q_sup, _ = g.height_set(q_low_pred).sup()
    q_low = max(zero, q_sup) if q_sup != -INF else zero

    v_bar = zero
    if q_low > 0 and g.v3_at(q_low):
        h = g.H(q_low)[0]
        if g.in_B(h, q_low):
            v_bar = max(zero, h)

    cap = Interval(zero, v_bar, True, True)
    if q_low == 0:
        s0 = [Interval.point(zero)]
    else:
        s0 = [iv.intersect(cap) for iv in g.supply_prices_at(q_low)]
        s0 = [iv for iv in s0 if not iv.is_empty]

    a = zero
    for iv in s0:
        if iv.is_point and iv.lo == v_bar:
            continue
        top, _ = iv.sup()
        a = max(a, top)
    options = [x for x in {a, v_bar} if any(iv.contains(x) for iv in s0)]
    v_low = min(options) if options else INF

    trace = {"Q_low": q_low, "v_bar": v_bar, "v_low": v_low}
    if v_low < v_bar:
        pt = _point(g, v_low, q_low, demand_price=v_bar)
        return EquilibriumSet(UNIQUE, [pt], None, trace, g)

    def e_pred(y: Fraction) -> bool:
        h, _ = g.H(y)
        return y >= q_low and g.v3_at(y) and h > 0 and g.in_S(h, y)

    fam = g.height_set(e_pred, floor=q_low)
    if fam.is_empty:
        return EquilibriumSet(EMPTY, [], fam, trace, g)
    points = []
    for y in fam.representatives():
        points.append(_point(g, g.H(y)[0], y))
    return EquilibriumSet(FAMILY, points, fam, trace, g)


def classify(eqset: EquilibriumSet) -> dict:
    """Qualitative summary of an equilibrium set."""
    cands = eqset.candidates
    single_point = len(eqset.points) == 1 and (
        eqset.family is None or (len(eqset.family.elements) == 1 and eqset.family.elements[0][0] == "pt")
    )
    unique = bool(cands) and single_point and eqset.points[0].measures.max_support_size <= 1 and len(cands) == 1
    sizes = [pt.measures.max_support_size for pt in eqset.points]
    return {
        "kind": eqset.kind,
        "exists": bool(cands),
        "unique": unique,
        "rationing": any(eqset.is_rationing(c) for c in cands),
        "max_support_size": max(sizes) if sizes else 0,
    }


def summary_line(eqset: EquilibriumSet) -> str:
    """Human summary used by the command-line front end."""
    if eqset.kind == EMPTY:
        return "no equilibrium"
    info = classify(eqset)
    c = eqset.candidates[0]
    demand_prices = ", ".join(fmt(r) for r in c.demand.support) or "none"
    head = "unique equilibrium" if info["unique"] or eqset.kind == UNIQUE else "zero-profit equilibrium family"
    rho = "none" if c.supply_price is None else fmt(c.supply_price)
    return (
        f"{head}; supply price {rho}; traded volume {fmt(c.volume)}; "
        f"demand price {demand_prices}; rationing: {'yes' if info['rationing'] else 'no'}"
    )


def decimal_summary(eqset: EquilibriumSet) -> str:
    if eqset.kind == EMPTY:
        return "no equilibrium"
    c = eqset.candidates[0]
    rho = "none" if c.supply_price is None else decimal_str(c.supply_price)
    return f"supply price ~ {rho}; traded volume ~ {decimal_str(c.volume)}"


# ---------------------------------------------------------------------------
# profitable set


def in_profitable_set(g: MarketGraphs, c: Fraction, Q: Fraction) -> bool:
    """Profitable-deviation test for the supply-graph point ``(c, Q)``."""
    if Q <= 0:
        return False
    if g.H(Q)[0] > c:
        return True
    if not g.p_star[0] > c:
        return False
    h_plus, att = g.H(Q, strict=True)
    return h_plus > c or (h_plus == c and att)


def profitable_set_membership(spec: SpecOrGraphs, rho: ScalarLike, q: ScalarLike) -> bool:
    """Whether ``(rho, q)`` lets a single mediator profit as a second-stage monopoly."""
    g = _graphs(spec)
    rho, q = to_scalar(rho), to_scalar(q)
    Q = g.curves.blended_volume(q, rho)
    return in_profitable_set(g, g.curves.c_hat(q, rho), Q)


def _partition(g: MarketGraphs, seg: Seg) -> list[Fraction]:
    ts = {x for x in (seg.t.lo, seg.t.hi) if x is not None}
    if seg.s.coeff(1) != 0:
        for y in g.critical_heights:
            ts.add(_t_where(seg.s, y, "==").lo)
    elif seg.p.coeff(1) != 0:
        y = seg.s.coeff(0)
        for v in (g.H(y)[0], g.H(y, strict=True)[0], g.p_star[0]):
            if v not in (INF, -INF):
                ts.add(_t_where(seg.p, v, "==").lo)
    return sorted(ts)


def _profitable_elements(g: MarketGraphs, seg: Seg) -> list[tuple]:
    """Elements of the parameter line on which the profitable test holds."""
    out = []
    for el in iter_elements(_partition(g, seg)):
        t = sample_in(el)
        if not seg.t.contains(t):
            continue
        p, s = seg.at(t)
        if in_profitable_set(g, p, s):
            out.append(el)
    return out


def profitable_supremum(spec: SpecOrGraphs) -> Optional[tuple[tuple, bool]]:
    """Lexicographic supremum of the profitable set as ``((rho, q), attained)``.

    ``rho`` may be ``INF``.  Returns ``None`` when the set is empty.
    """
    g = _graphs(spec)
    # memoized on the graphs object, as cached_property would
    if "_profitable_sup" not in g.__dict__:
        g.__dict__["_profitable_sup"] = _profitable_supremum(g)
    return g.__dict__["_profitable_sup"]


def _profitable_supremum(g: MarketGraphs) -> Optional[tuple[tuple, bool]]:
    best = None
    for seg in g.supply:
        els = _profitable_elements(g, seg)
        if not els:
            continue
        last = els[-1]
        if last[0] == "pt":
            t, attained = last[1], True
        else:
            t, attained = last[2], False
        if t is None:
            key = (INF, Fraction(0)) if seg.rho.degree > 0 else (seg.rho(Fraction(0)), INF)
        elif attained or seg.rho.degree == 0:
            key = (seg.rho(t), seg.q(t))
        else:
            # approached from below in rho, so every q at the limit price bounds it
            key = (seg.rho(t), Fraction(0))
        if best is None or key > best[0] or (key == best[0] and attained):
            best = (key, attained)
    return best


# ---------------------------------------------------------------------------
# demand clearing


@dataclass(frozen=True)
class Clearing:
    r_bar: object
    remaining: Fraction
    p_high: Fraction
    resale_volume: Fraction


def demand_clearing(curves: Curves, demand: DiscreteMeasure) -> Clearing:
    """Order-book clearing of a finite demand price measure against real demand."""
    cum = Fraction(0)
    share = {}
    exhausted = []
    for r, m in demand.atoms:
        d = curves.max_d(r)
        take = min(1 - cum, m / d) if d > 0 else Fraction(0)
        share[r] = take
        cum += take
        if cum == 1:
            exhausted.append(r)
    top = _demand_top(curves)
    pool = list(exhausted)
    if demand.atoms and cum == 1:
        pool.append(demand.atoms[-1][0])
    pool.append(top)
    r_bar = min(pool)
    remaining = 1 - sum((share[r] for r in share if r < r_bar), Fraction(0))
    at = demand.mass_at(r_bar) if r_bar not in (INF, -INF) else Fraction(0)
    numer = (curves.max_d(r_bar) if r_bar not in (INF, -INF) else Fraction(0)) * remaining
    if at == 0:
        p_high = Fraction(0) if numer == 0 else Fraction(1)
    else:
        p_high = min(Fraction(1), numer / at)
    above = demand.mass_above(r_bar) if r_bar != -INF else demand.total
    return Clearing(r_bar, remaining, p_high, (1 - p_high) * at + above)


def _demand_top(curves: Curves):
    up = curves.demand.upper
    if not up.pieces[-1].is_zero():
        return INF
    for i in range(len(up.breaks) - 1, -1, -1):
        if up.at[i] > 0:
            return up.breaks[i]
        if not up.pieces[i].is_zero():
            return up.breaks[i]
    return -INF


# ---------------------------------------------------------------------------
# verifier


@dataclass
class Verdict:
    passed: bool
    violated: list[str]
    notes: list[str] = field(default_factory=list)

    @property
    def first_violation(self) -> Optional[str]:
        return self.violated[0] if self.violated else None

    def to_json(self) -> dict:
        return {"passed": self.passed, "violated": self.violated, "notes": self.notes}


def _b_tilde_nonempty(g: MarketGraphs, c: Fraction, Q: Fraction) -> bool:
    if Q <= 0:
        return False
    h, att = g.H(Q)
    return att and h >= c and g.v3_at(Q)


def verify_equilibrium(spec: SpecOrGraphs, cand: EquilibriumCandidate) -> Verdict:
    """Check a candidate against the necessary and sufficient conditions."""
    g = _graphs(spec)
    curves = g.curves
    violated: list[str] = []
    notes: list[str] = []

    if len(cand.supply.atoms) > 1 or not 0 <= cand.q <= 1:
        return Verdict(False, [CLAUSE_EQUAL_BID], ["supply side must be a single bid"])
    rho = cand.supply_price
    if rho is None:
        Q, c = Fraction(0), Fraction(0)
    else:
        Q, c = curves.blended_volume(cand.q, rho), curves.c_hat(cand.q, rho)
        if cand.supply.total != Q:
            violated.append(CLAUSE_EQUAL_BID)
            notes.append(f"supply mass {fmt(cand.supply.total)} differs from acquired volume {fmt(Q)}")
    if cand.demand.total != Q:
        if CLAUSE_EQUAL_BID not in violated:
            violated.append(CLAUSE_EQUAL_BID)
        notes.append(f"demand mass {fmt(cand.demand.total)} differs from acquired volume {fmt(Q)}")

    if Q > 0:
        clr = demand_clearing(curves, cand.demand)
        support = cand.demand.support
        top = max(support) if support else -INF
        unmatched = clr.resale_volume != 0 or clr.r_bar < top or (clr.r_bar in support and clr.p_high != 1)
        if unmatched:
            violated.append(CLAUSE_UNMATCHED)
        h = g.H(Q)[0]
        revenues = {curves.p_hat(r) for r in support}
        if not revenues or revenues != {h} or h < c:
            violated.append(CLAUSE_MAXIMIZERS)
        p_star, p_att = g.p_star
        at_argmax = p_att and all(curves.p_hat(r) == p_star for r in support)
        sandwiched = clr.r_bar <= top and (clr.r_bar in support or clr.p_high == 0)
        if not (at_argmax or sandwiched):
            violated.append(CLAUSE_SANDWICH)

    sup = profitable_supremum(g)
    key = (rho if rho is not None else -INF, cand.q)
    if sup is not None and sup[0] > key:
        violated.append(CLAUSE_NOT_HIGHER)
    elif sup is not None and sup[1] and sup[0] < key:
        m_rho, m_q = sup[0]
        mQ, mc = curves.blended_volume(m_q, m_rho), curves.c_hat(m_q, m_rho)
        if _b_tilde_nonempty(g, mc, mQ) and g.H(mQ)[0] > mc:
            violated.append(CLAUSE_NOT_LOWER)
            notes.append(f"profitable bid ({fmt(m_rho)}, {fmt(m_q)}) below the candidate is sustainable")
    return Verdict(not violated, violated, notes)


# ---------------------------------------------------------------------------
# monopoly with resale


@dataclass(frozen=True)
class MonopolyValue:
    value: Fraction
    empty: bool
    resale_demands: tuple[Fraction, ...]

    @property
    def improving(self) -> bool:
        return not self.empty and self.value > 0


def monopoly_optimistic_resale_value(spec: SpecOrGraphs, rho: ScalarLike, q: ScalarLike, r: ScalarLike) -> MonopolyValue:
    """Best resale outcome of a lone winning mediator quoting demand price ``r``."""
    g = _graphs(spec)
    curves = g.curves
    rho, q, r = to_scalar(rho), to_scalar(q), to_scalar(r)
    Q, c = curves.blended_volume(q, rho), curves.c_hat(q, rho)
    if Q > 0 and curves.max_d(r) >= Q:
        raise DomainError(f"demand at {fmt(r)} absorbs the whole volume {fmt(Q)}; nothing is resold")
    demand = DiscreteMeasure(((r, Q),)) if Q > 0 else ZERO_MEASURE
    clr = demand_clearing(curves, demand)
    r_bar = clr.r_bar
    phat = curves.p_hat.values
    vol = curves.demand.upper

    def e2(z: Fraction) -> Fraction:
        return phat(z) if z < r_bar else Fraction(0)

    def e2_right(z: Fraction) -> Fraction:
        return phat.right_limit(z) if z < r_bar else Fraction(0)

    breaks = sorted(set(phat.breaks) | set(vol.breaks) | ({r_bar} if r_bar not in (INF, -INF) else set()))
    # first point where e2 exceeds c
    z_star, star_in = INF, True
    cands: set[Fraction] = set(breaks)
    for el in iter_elements(tuple(breaks)):
        if el[0] == "pt":
            if e2(el[1]) > c:
                z_star, star_in = el[1], False
                break
            continue
        lo, hi = el[1], el[2]
        t = sample_in(el)
        piece = phat.pieces[phat.piece_index(t)[0]] if t < r_bar else None
        if piece is None:
            continue
        if piece.degree == 1:
            root = (c - piece.coeff(0)) / piece.coeff(1)
            if (lo is None or root > lo) and (hi is None or root < hi):
                cands.add(root)
        sample_hi = hi if hi is not None else t + 1
        sample_lo = lo if lo is not None else t - 1
        if piece(sample_lo) > c or piece(sample_hi) > c:
            if lo is not None and piece(lo) > c:
                z_star, star_in = lo, True
            elif piece.degree == 1 and piece.coeff(1) > 0:
                z_star, star_in = (c - piece.coeff(0)) / piece.coeff(1), True
            else:
                z_star, star_in = (lo if lo is not None else -INF), True
            break
    demands: set[Fraction] = set()
    if z_star == -INF or (phat.pieces[0].degree == 0 and phat.pieces[0].coeff(0) >= c and r_bar == INF):
        demands.add(curves.d_max)
    for z in cands:
        if z > z_star:
            continue
        in_t = z < z_star or star_in
        if in_t and e2_right(z) >= c:
            demands.add(vol.right_limit(z))
        if e2(z) >= c:
            demands.add(vol(z))
    if z_star not in (INF, -INF):
        if star_in and e2_right(z_star) >= c:
            demands.add(vol.right_limit(z_star))
        if e2(z_star) >= c:
            demands.add(vol(z_star))
    if not demands:
        return MonopolyValue(Fraction(0), True, ())
    d_r = curves.max_d(r)
    margin = curves.p_hat(r) - c

    def u(d: Fraction) -> Fraction:
        if d <= Q:
            return -(Q - d) * c
        return d_r * (d - Q) / (d - d_r) * margin

    ordered = tuple(sorted(demands))
    return MonopolyValue(max(u(d) for d in ordered), False, ordered)


# ---------------------------------------------------------------------------
# infinite credit example


REFERENCE_INFINITE_ATOM = {"price": Fraction(4), "mass": Fraction(1)}


def infinite_example_report(v: ScalarLike = 1, K: int = 20) -> dict:
    """Compare the solver's demand atom on the infinite credit example with the reference values."""
    from .markets import credit_infinite_example

    spec = credit_infinite_example(v, K)
    eq = find_equilibria(spec)
    info = classify(eq)
    cand = eq.candidates[0] if eq.candidates else None
    atoms = list(cand.demand.atoms) if cand else []
    single = len(atoms) == 1
    report = {
        "v": fmt(to_scalar(v)),
        "K": K,
        "kind": eq.kind,
        "single_demand_atom": single,
        "computed": [{"price": fmt(r), "mass": fmt(m)} for r, m in atoms],
        "claimed": {k: fmt(x) for k, x in REFERENCE_INFINITE_ATOM.items()},
        "classification": info,
    }
    agrees = single and atoms[0][0] == REFERENCE_INFINITE_ATOM["price"] and atoms[0][1] == REFERENCE_INFINITE_ATOM["mass"]
    report["agrees"] = agrees
    if not agrees and single:
        report["discrepancy"] = (
            f"computed atom at {fmt(atoms[0][0])} with mass {fmt(atoms[0][1])}; "
            "the truncated population has total demand volume below 1 and the safest type's cutoff "
            "follows from the repayment formula"
        )
    return report
