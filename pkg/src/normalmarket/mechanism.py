"""Finite normal-market mechanism: supply auctions, order-book clearing and resale rounds."""

from __future__ import annotations

import bisect
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Optional, Sequence, Union

import numpy as np

from .curves import build_curves
from .population import FiniteMarketInstance, PopulationSpec, sample_finite_market
from .scalar import ScalarLike, fmt, to_scalar

SUPPLIER = "supplier"
DEMANDER = "demander"

STAGES = (
    "Supply Introduction",
    "Demand Introduction",
    "Supply Price Bidding",
    "Supply Price Auction",
    "Supply Residual Bidding",
    "Supply Residual Auction",
    "Demand Bulk Bidding",
    "Demand Bulk Auction",
    "Resale Bidding",
    "Demand Resale Auction",
)


@dataclass(frozen=True)
class Contract:
    volume: Fraction
    price: Fraction
    party_kind: str
    party: int
    mediator: int

    def __post_init__(self) -> None:
        if self.volume < 0:
            raise ValueError("contract volume must be non-negative")
        if self.party_kind not in (SUPPLIER, DEMANDER):
            raise ValueError(f"unknown party kind {self.party_kind!r}")

    def moved_to(self, mediator: int) -> "Contract":
        return Contract(self.volume, self.price, self.party_kind, self.party, mediator)

    def to_json(self) -> dict:
        return {
            "volume": fmt(self.volume),
            "price": fmt(self.price),
            "party": [self.party_kind, self.party],
            "mediator": self.mediator,
        }


@dataclass(frozen=True)
class MarketTransaction:
    supply: tuple[Contract, ...] = ()
    demand: tuple[Contract, ...] = ()

    @property
    def traded_volume(self) -> Fraction:
        return fsum(c.volume for c in self.demand)

    def to_json(self) -> dict:
        return {"supply": [c.to_json() for c in self.supply], "demand": [c.to_json() for c in self.demand]}


@dataclass(frozen=True)
class MechanismConfig:
    mu_bar: Fraction = Fraction(1, 2)
    max_rounds: int = 64
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "mu_bar", to_scalar(self.mu_bar))
        if not 0 <= self.mu_bar <= 1:
            raise ValueError("mu_bar must lie in [0, 1]")
        if self.max_rounds < 0:
            raise ValueError("max_rounds must be non-negative")


@dataclass(frozen=True)
class ResaleInfo:
    """What a mediator sees when bidding in a resale round."""

    round: int
    max_volume: Fraction
    held: Fraction
    sold: Fraction


ResidualRule = Callable[[Fraction, tuple[Fraction, ...]], Fraction]
DemandRule = Callable[[Fraction], Fraction]
ResaleRule = Callable[[ResaleInfo], tuple[Fraction, Fraction]]


def take_all_weak(strict_volume: Fraction, weak_volumes: tuple[Fraction, ...]) -> Fraction:
    return fsum(weak_volumes)


def no_resale(info: ResaleInfo) -> tuple[Fraction, Fraction]:
    return Fraction(0), Fraction(0)


@dataclass(frozen=True)
class MediatorStrategy:
    """Bids of one mediator; ``supply_price`` of None stands for minus infinity."""

    supply_price: Optional[Fraction]
    demand_price: DemandRule
    residual_bid: ResidualRule = take_all_weak
    resale_bid: ResaleRule = no_resale

    @staticmethod
    def constant(
        supply_price: Optional[ScalarLike],
        demand_price: ScalarLike,
        residual_bid: ResidualRule = take_all_weak,
        resale_bid: ResaleRule = no_resale,
    ) -> "MediatorStrategy":
        rho = None if supply_price is None or supply_price == -math.inf else to_scalar(supply_price)
        r = to_scalar(demand_price)
        return MediatorStrategy(rho, lambda quota: r, residual_bid, resale_bid)


@dataclass
class MarketRun:
    transaction: MarketTransaction
    trace: list[dict]
    truncated: bool = False
    supply_price: Optional[Fraction] = None
    winners: tuple[int, ...] = ()
    resale_rounds: int = 0

    def __iter__(self) -> Iterator:
        return iter((self.transaction, self.trace))

    def trace_ndjson(self) -> str:
        return "".join(json.dumps(e, sort_keys=True, separators=(",", ":")) + "\n" for e in self.trace)


# ---------------------------------------------------------------------------
# subset sums over multisets of volumes


def _grouped(volumes: Sequence[Fraction]) -> list[tuple[Fraction, int]]:
    return sorted(Counter(volumes).items())


def is_subset_sum(volumes: Sequence[Fraction], target: Fraction) -> bool:
    """Whether some sub-multiset of ``volumes`` sums exactly to ``target``."""
    groups = _grouped(volumes)

    def rec(i: int, rest: Fraction) -> bool:
        if rest == 0:
            return True
        if i == len(groups) or rest < 0:
            return False
        v, n = groups[i]
        if i == len(groups) - 1:
            k = rest / v
            return k.denominator == 1 and 0 <= k <= n
        return any(rec(i + 1, rest - k * v) for k in range(min(n, int(rest / v)) + 1))

    return rec(0, to_scalar(target))


def max_subset_sum_at_most(volumes: Sequence[Fraction], bound: Fraction) -> Fraction:
    """Largest sub-multiset sum of ``volumes`` not exceeding ``bound``."""
    if bound < 0:
        raise ValueError("bound must be non-negative")
    groups = _grouped(v for v in volumes if v > 0)
    if len(groups) == 1:
        v, n = groups[0]
        return min(n, int(bound / v)) * v
    reach = {Fraction(0)}
    for v, n in groups:
        nxt = set()
        for base in reach:
            for k in range(min(n, int((bound - base) / v)) + 1):
                nxt.add(base + k * v)
        reach = nxt
    return max(reach)


def smallest_subset_sum_at_least(volumes: Sequence[Fraction], target: Fraction) -> Fraction:
    """Smallest sub-multiset sum reaching ``target``, or the full sum if none does."""
    total = fsum(volumes)
    if target <= 0:
        return Fraction(0)
    if target >= total:
        return total
    groups = _grouped(volumes)
    if len(groups) == 1:
        v, n = groups[0]
        return min(n, math.ceil(target / v)) * v
    reach = {Fraction(0)}
    for v, n in groups:
        reach = {base + k * v for base in reach for k in range(n + 1) if base < target or k == 0}
    return min(x for x in reach if x >= target)


# ---------------------------------------------------------------------------
# mechanism


class _Event:
    def __init__(self) -> None:
        self.events: list[dict] = []

    def __call__(self, t: float, stage: str, **payload) -> None:
        self.events.append({"t": t, "stage": stage, "payload": payload})


def _jsonable(x):
    if isinstance(x, Fraction):
        return fmt(x)
    if isinstance(x, (list, tuple)):
        return [_jsonable(y) for y in x]
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    return x


def _ranked(values: Sequence[Fraction]) -> tuple[list[Fraction], np.ndarray]:
    """Distinct sorted values and each entry's rank, so exact comparisons become integer ones."""
    distinct = sorted(set(values))
    index = {v: i for i, v in enumerate(distinct)}
    return distinct, np.fromiter((index[v] for v in values), dtype=np.int64, count=len(values))


class _DemandBook:
    """Demanders with exact cutoffs and volumes plus the contracts struck so far."""

    def __init__(self, instance: FiniteMarketInstance) -> None:
        self.demanders = instance.demanders
        self.volumes = [d.volume for d in self.demanders]
        self.cutoffs, self.rank = _ranked([d.cutoff for d in self.demanders])
        self.min_volume = min(self.volumes, default=Fraction(0))
        self.contract_of: dict[int, Contract] = {}

    def willing_mask(self, price: Fraction) -> np.ndarray:
        k = bisect.bisect_left(self.cutoffs, price)
        return self.rank >= k

    def uncontracted(self) -> np.ndarray:
        mask = np.ones(len(self.demanders), dtype=bool)
        if self.contract_of:
            mask[list(self.contract_of)] = False
        return mask


def _clear_order(
    book: _DemandBook, rng: np.random.Generator, volume: Fraction, price: Fraction, mediator: int, poaching: bool
) -> tuple[Fraction, int]:
    """Match one order against feasible demanders picked uniformly at random.

    Feasibility only shrinks while an order is worked off, so scanning a
    uniform permutation and skipping infeasible entries draws each match
    uniformly from the feasible set at that moment.
    """
    pool = book.willing_mask(price) & book.uncontracted()
    candidates = np.flatnonzero(pool)
    if poaching:
        poachable = [d for d, c in book.contract_of.items() if c.price > price and c.mediator != mediator]
        candidates = np.concatenate([candidates, np.asarray(sorted(poachable), dtype=np.int64)])
    matches = 0
    if volume < book.min_volume or len(candidates) == 0:
        return volume, matches
    for d in rng.permutation(candidates).tolist():
        v = book.volumes[d]
        if v <= volume:
            volume -= v
            book.contract_of[d] = Contract(v, price, DEMANDER, book.demanders[d].ident, mediator)
            matches += 1
            if volume < book.min_volume:
                break
    return volume, matches


def _clear_book(
    book: _DemandBook, rng: np.random.Generator, orders: list[tuple[Fraction, Fraction, int]], poaching: bool
) -> int:
    """Clear orders cheapest first, ties broken uniformly; returns the iteration count."""
    orders = list(orders)
    iterations = 0
    while orders:
        low = min(o[1] for o in orders)
        tied = [i for i, o in enumerate(orders) if o[1] == low]
        pick = tied[int(rng.integers(len(tied)))] if len(tied) > 1 else tied[0]
        volume, price, mediator = orders.pop(pick)
        _, matches = _clear_order(book, rng, volume, price, mediator, poaching)
        iterations += matches + 1
    return iterations


def fsum(values) -> Fraction:
    """Exact sum that adds numerators over shared denominators, the norm for sampled volumes."""
    by_den: dict[int, int] = {}
    for v in values:
        by_den[v.denominator] = by_den.get(v.denominator, 0) + v.numerator
    return sum((Fraction(n, d) for d, n in by_den.items()), Fraction(0))


def _holdings(contracts: Sequence[Contract], n_mediators: int) -> list[Fraction]:
    per: list[list[Fraction]] = [[] for _ in range(n_mediators)]
    for c in contracts:
        per[c.mediator].append(c.volume)
    return [fsum(vols) for vols in per]


def _max_resale(supply: Sequence[Contract], demand: Sequence[Contract], n_mediators: int) -> Fraction:
    held = _holdings(supply, n_mediators)
    sold = _holdings(demand, n_mediators)
    per: dict[int, list[Fraction]] = {}
    for c in supply:
        per.setdefault(c.mediator, []).append(c.volume)
    return fsum(max_subset_sum_at_most(vols, held[m] - sold[m]) for m, vols in per.items())


def run_market(
    instance: FiniteMarketInstance,
    strategies: Sequence[MediatorStrategy],
    config: MechanismConfig = MechanismConfig(),
) -> MarketRun:
    """Run the mechanism once with dominant-strategy bids from suppliers and demanders."""
    n_med = instance.n_mediators
    if len(strategies) != n_med:
        raise ValueError(f"expected {n_med} mediator strategies, got {len(strategies)}")
    rng = np.random.default_rng(config.seed)
    ev = _Event()
    suppliers = instance.suppliers

    ev(0, STAGES[0], bids=len(suppliers), volume=fmt(fsum(s.volume for s in suppliers)))
    ev(1, STAGES[1], bids=len(instance.demanders), volume=fmt(fsum(d.volume for d in instance.demanders)))

    bids = [st.supply_price for st in strategies]
    ev(2, STAGES[2], bids=[None if b is None else fmt(b) for b in bids])
    live = [b for b in bids if b is not None]
    if not live:
        ev(3, STAGES[3], supply_price=None, finalized=True)
        return MarketRun(MarketTransaction(), ev.events)
    rho_bar = max(live)
    m_tilde = [m for m, b in enumerate(bids) if b == rho_bar]
    strict = [s for s in suppliers if s.cutoff < rho_bar]
    weak = [s for s in suppliers if s.cutoff == rho_bar]
    v_tilde = fsum(s.volume for s in strict)
    weak_volumes = tuple(s.volume for s in weak)
    ev(3, STAGES[3], supply_price=fmt(rho_bar), price_winners=m_tilde, strict_volume=fmt(v_tilde),
       strict_count=len(strict), weak_count=len(weak))

    residual = {}
    for m in m_tilde:
        bid = to_scalar(strategies[m].residual_bid(v_tilde, weak_volumes))
        if not is_subset_sum(weak_volumes, bid):
            raise ValueError(f"mediator {m} bid a residual volume {fmt(bid)} that no weak subset reaches")
        residual[m] = bid
    ev(4, STAGES[4], bids={m: fmt(b) for m, b in residual.items()})

    v_bar_bar = max(residual.values())
    winners = [m for m in m_tilde if residual[m] == v_bar_bar]
    order = rng.permutation(len(weak)).tolist() if weak else []
    taken, admitted = Fraction(0), []
    for i in order:
        if taken >= v_bar_bar:
            break
        admitted.append(weak[i])
        taken += weak[i].volume
    strict_to = rng.integers(len(m_tilde), size=len(strict)).tolist()
    weak_to = rng.integers(len(winners), size=len(admitted)).tolist()
    supply = [Contract(s.volume, rho_bar, SUPPLIER, s.ident, m_tilde[k]) for s, k in zip(strict, strict_to)]
    supply += [Contract(s.volume, rho_bar, SUPPLIER, s.ident, winners[k]) for s, k in zip(admitted, weak_to)]
    quota = _holdings(supply, n_med)
    ev(5, STAGES[5], target=fmt(v_bar_bar), winners=winners, admitted_weak=len(admitted),
       quota=[fmt(x) for x in quota])

    quotes = [to_scalar(strategies[m].demand_price(quota[m])) for m in range(n_med)]
    ev(6, STAGES[6], bids=[fmt(r) for r in quotes])

    book = _DemandBook(instance)
    iterations = _clear_book(book, rng, [(quota[m], quotes[m], m) for m in range(n_med)], poaching=False)
    demand = list(book.contract_of.values())
    ev(7.6, STAGES[7], iterations=iterations, contracts=len(demand), traded=fmt(fsum(z.volume for z in demand)))

    def finish(truncated: bool = False, rounds: int = 0) -> MarketRun:
        tx = MarketTransaction(tuple(supply), tuple(sorted(book.contract_of.values(), key=lambda c: c.party)))
        return MarketRun(tx, [_jsonable(e) for e in ev.events], truncated, rho_bar, tuple(winners), rounds)

    if Fraction(len(winners), n_med) > config.mu_bar or len(winners) == n_med:
        return finish()

    losers = [m for m in range(n_med) if m not in set(winners)]
    r0 = _max_resale(supply, demand, n_med)
    for j in range(1, config.max_rounds + 1):
        held = _holdings(supply, n_med)
        sold = _holdings(list(book.contract_of.values()), n_med)
        resale_bids = {}
        for m in losers:
            vol, price = strategies[m].resale_bid(ResaleInfo(j, r0, held[m], sold[m]))
            vol, price = to_scalar(vol), to_scalar(price)
            resale_bids[m] = (min(max(vol, Fraction(0)), r0), price)
        ev(9 - 2.0 ** (1 - j), STAGES[8], round=j, bids={m: [fmt(v), fmt(p)] for m, (v, p) in resale_bids.items()})
        v_bar = max(v for v, _ in resale_bids.values())
        if v_bar == 0:
            ev(9 - 1.5 * 2.0 ** -j, STAGES[9], round=j, volume="0", max_resale=fmt(r0), finalized=True)
            return finish(rounds=j)
        top = [m for m, (v, _) in resale_bids.items() if v == v_bar]
        low = min(resale_bids[m][1] for m in top)
        tied = [m for m in top if resale_bids[m][1] == low]
        m_bar = tied[int(rng.integers(len(tied)))]

        moved = Fraction(0)
        while moved < v_bar:
            held = _holdings(supply, n_med)
            sold = _holdings(list(book.contract_of.values()), n_med)
            movable = [i for i, c in enumerate(supply) if c.mediator != m_bar and sold[c.mediator] <= held[c.mediator] - c.volume]
            if not movable:
                break
            i = movable[int(rng.integers(len(movable)))]
            moved += supply[i].volume
            supply[i] = supply[i].moved_to(m_bar)
        iterations = _clear_book(book, rng, [(moved, low, m_bar)], poaching=True)
        demand = list(book.contract_of.values())
        r_j = _max_resale(supply, demand, n_med)
        ev(9 - 1.5 * 2.0 ** -j, STAGES[9], round=j, winner=m_bar, volume=fmt(v_bar), moved=fmt(moved),
           price=fmt(low), iterations=iterations, max_resale=fmt(r_j))
    return finish(truncated=True, rounds=config.max_rounds)


def check_feasible(instance: FiniteMarketInstance, tx: MarketTransaction) -> bool:
    """Single contract per non-mediator, supplier capacity and mediator conservation."""
    seen = Counter((c.party_kind, c.party) for c in tx.supply + tx.demand)
    if any(n > 1 for n in seen.values()):
        return False
    if any(c.party_kind != SUPPLIER for c in tx.supply) or any(c.party_kind != DEMANDER for c in tx.demand):
        return False
    capacity = {s.ident: s.volume for s in instance.suppliers}
    for c in tx.supply:
        if c.party not in capacity or c.volume > capacity[c.party]:
            return False
    if any(not 0 <= c.mediator < instance.n_mediators for c in tx.supply + tx.demand):
        return False
    inflow = _holdings(tx.supply, instance.n_mediators)
    outflow = _holdings(tx.demand, instance.n_mediators)
    return all(i >= o for i, o in zip(inflow, outflow))


# ---------------------------------------------------------------------------
# equilibrium replay


@dataclass
class ReplayReport:
    replications: int
    volumes: list[Fraction]
    supply_prices: list[Optional[Fraction]]
    demand_price_volume: dict[Fraction, Fraction]
    served_fraction: dict[Fraction, float]
    target_volume: Fraction
    binomial_sigma: float
    all_feasible: bool
    truncated_runs: int = 0
    traces: list[str] = field(default_factory=list, repr=False)

    @property
    def mean_volume(self) -> float:
        return float(np.mean([float(v) for v in self.volumes]))

    @property
    def standard_error(self) -> float:
        if len(self.volumes) < 2:
            return 0.0
        return float(np.std([float(v) for v in self.volumes], ddof=1) / math.sqrt(len(self.volumes)))

    def within(self, k: float = 3.0) -> bool:
        return abs(self.mean_volume - float(self.target_volume)) <= k * self.binomial_sigma

    def to_json(self) -> dict:
        return {
            "replications": self.replications,
            "target_volume": fmt(self.target_volume),
            "mean_volume": self.mean_volume,
            "standard_error": self.standard_error,
            "binomial_sigma": self.binomial_sigma,
            "within_3_sigma": self.within(),
            "supply_prices": sorted({fmt(p) if p is not None else None for p in self.supply_prices}, key=str),
            "demand_price_volume": {fmt(k): fmt(v) for k, v in sorted(self.demand_price_volume.items())},
            "served_fraction": {fmt(k): v for k, v in sorted(self.served_fraction.items())},
            "all_feasible": self.all_feasible,
            "truncated_runs": self.truncated_runs,
            "volumes": [fmt(v) for v in self.volumes],
        }


def split_seeds(seed: int, count: int) -> list[int]:
    """Independent 64-bit seeds derived from ``seed`` by counter splitting."""
    return [int(s.generate_state(1, np.uint64)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def _assign_quotes(demand_atoms: Sequence[tuple[Fraction, Fraction]], n_mediators: int) -> list[Fraction]:
    """Largest-remainder split of mediators across demand prices in proportion to mass."""
    total = sum(m for _, m in demand_atoms)
    if total == 0:
        return [Fraction(0)] * n_mediators
    shares = [(r, m / total * n_mediators) for r, m in demand_atoms]
    counts = [int(s) for _, s in shares]
    rest = sorted(range(len(shares)), key=lambda i: (-(shares[i][1] - counts[i]), i))
    for i in rest[: n_mediators - sum(counts)]:
        counts[i] += 1
    return [r for (r, _), c in zip(shares, counts) for _ in range(c)]


def equilibrium_replay(
    spec: PopulationSpec,
    eq,
    n: Union[int, tuple[int, int, int]],
    replications: int,
    seed: int,
    mu_bar: ScalarLike = Fraction(1, 2),
) -> ReplayReport:
    """Run the finite mechanism with every mediator playing the given equilibrium."""
    n_s, n_m, n_d = (n, 100, n) if isinstance(n, int) else n
    n_m = max(1, n_m)
    rho = eq.supply_price
    target = eq.volume
    quotes = _assign_quotes(list(eq.demand.atoms), n_m)

    def residual(strict_volume: Fraction, weak_volumes: tuple[Fraction, ...]) -> Fraction:
        return smallest_subset_sum_at_least(weak_volumes, target - strict_volume)

    strategies = [MediatorStrategy.constant(rho, r, residual_bid=residual) for r in quotes]
    volumes, prices, traces, feasible, truncated = [], [], [], True, 0
    by_price: dict[Fraction, Fraction] = {}
    served: Counter = Counter()
    willing: Counter = Counter()
    for s in split_seeds(seed, replications):
        inst = sample_finite_market(spec, n_s, n_m, n_d, s % 2**63)
        run = run_market(inst, strategies, MechanismConfig(mu_bar=mu_bar, seed=s))
        feasible &= check_feasible(inst, run.transaction)
        truncated += run.truncated
        traces.append(run.trace_ndjson())
        volumes.append(run.transaction.traded_volume)
        prices.append(run.supply_price)
        for z in run.transaction.demand:
            by_price[z.price] = by_price.get(z.price, Fraction(0)) + z.volume
            served[z.price] += 1
        for r in set(quotes):
            willing[r] += sum(1 for d in inst.demanders if d.cutoff >= r)
    curves = build_curves(spec)
    sigma = _binomial_sigma(curves, target, quotes, n_s, n_d)
    fractions_served = {r: served[r] / willing[r] for r in willing if willing[r]}
    return ReplayReport(
        replications, volumes, prices, by_price, fractions_served, target, sigma, feasible, truncated, traces
    )


def _binomial_sigma(curves, target: Fraction, quotes: Sequence[Fraction], n_s: int, n_d: int) -> float:
    """Per-run binomial bound on the traded volume, taking the noisier market side."""
    sides = []
    cap = curves.s_max
    if cap > 0:
        p = min(1.0, float(target / cap))
        sides.append(float(cap) * math.sqrt(p * (1 - p) / n_s))
    total = curves.d_max
    if total > 0 and quotes:
        p = min(1.0, float(curves.max_d(min(quotes)) / total))
        sides.append(float(total) * math.sqrt(p * (1 - p) / n_d))
    return max(sides, default=0.0)
