"""Trading and credit market kinds plus the built-in example fixtures."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping, Optional, Sequence
from urllib.parse import parse_qsl

from .population import (
    Atom,
    ConditionViolation,
    DemanderClass,
    MarketKind,
    PopulationSpec,
    SupplierClass,
    UniformSegment,
)
from .scalar import INF, PiecewisePoly, Poly, ScalarLike, sum_piecewise, to_scalar


def _h0_of(cls: SupplierClass, h0: Optional[Fraction]) -> Fraction:
    if h0 is not None:
        return to_scalar(h0)
    if cls.h0 is None:
        raise ValueError("uniform supplier class needs an explicit h0 draw")
    return cls.h0


class TradingKind(MarketKind):
    """Physical goods: producers, retailers and consumers.

    Producers pay ``h0`` per unit to produce; consumers value a unit at
    ``eta0``.  Both sides trade their whole bulk or nothing.
    """

    name = "trading"
    supplier_actions = ("produce", "not produce")
    demander_actions = ("consume", "not consume")

    def check_supplier(self, cls: SupplierClass) -> None:
        if cls.v != cls.h1:
            raise ConditionViolation(1, "trading producers bid their whole output, so v must equal h1")

    def supplier_cutoff(self, cls: SupplierClass, h0: Optional[Fraction] = None) -> Fraction:
        return _h0_of(cls, h0)

    def supplier_volume(self, cls: SupplierClass) -> Fraction:
        return cls.h1

    def supplier_payoff_poly(self, cls: SupplierClass) -> Poly:
        # the retailer pays rho per unit of the full bid volume
        return Poly.linear(0, -self.supplier_volume(cls) / cls.h1)

    def supplier_utility(self, h0, action, x, rho):
        produce = action == "produce"
        if x > (1 if produce else 0):
            return -INF
        return rho * x - (h0 if produce else 0)

    def demander_cutoff(self, cls: DemanderClass, eta0: Any = None) -> Fraction:
        return to_scalar(cls.eta0 if eta0 is None else eta0)

    def demander_volume(self, cls: DemanderClass) -> Fraction:
        return cls.eta1

    def demander_revenue_pw(self, cls: DemanderClass) -> PiecewisePoly:
        return PiecewisePoly((), (), (Poly.linear(0, self.demander_volume(cls) / cls.eta1),))

    def demander_utility(self, eta0, action, x, r):
        consume = action == "consume"
        if x < (1 if consume else 0):
            return -INF
        return (to_scalar(eta0) if consume else 0) - r * x


@dataclass(frozen=True)
class ProjectDistribution:
    """Discrete project payoff distribution per unit of budget."""

    atoms: tuple[tuple[Fraction, Fraction], ...]
    name: str = ""

    def __post_init__(self) -> None:
        atoms = tuple((to_scalar(x), to_scalar(p)) for x, p in self.atoms)
        if not atoms:
            raise ValueError("a project needs at least one atom")
        if any(x < 0 for x, _ in atoms):
            raise ValueError("project payoffs must be non-negative")
        if any(p < 0 for _, p in atoms):
            raise ValueError("probabilities must be non-negative")
        if sum(p for _, p in atoms) != 1:
            raise ValueError("project probabilities must sum to 1")
        object.__setattr__(self, "atoms", atoms)

    @property
    def mean(self) -> Fraction:
        return sum((x * p for x, p in self.atoms), Fraction(0))

    def expected_excess(self, u: Fraction) -> Fraction:
        """E[max(0, X - u)]."""
        return sum((p * max(Fraction(0), x - u) for x, p in self.atoms), Fraction(0))

    def expected_capped(self, u: Fraction) -> Fraction:
        """E[min(X, u)]."""
        return sum((p * min(x, u) for x, p in self.atoms), Fraction(0))

    def solve_excess(self, target: Fraction) -> Fraction:
        """Exact root u > 0 of E[max(0, X - u)] = target, for 0 < target < E[X]."""
        atoms = sorted(self.atoms, key=lambda a: a[0], reverse=True)
        # on [x_{k+1}, x_k] the excess is sum_{i<=k} p_i (x_i - u)
        mass, weighted = Fraction(0), Fraction(0)
        for k, (x, p) in enumerate(atoms):
            mass += p
            weighted += p * x
            lower = atoms[k + 1][0] if k + 1 < len(atoms) else Fraction(0)
            if mass == 0:
                continue
            u = (weighted - target) / mass
            if lower <= u <= x:
                return u
        raise ConditionViolation(4, "indifference equation has no positive root")


class CreditKind(MarketKind):
    """Loanable funds: depositors, banks and entrepreneurs.

    An entrepreneur with equity share ``a`` and budget ``eta1`` borrows
    ``(1 - a) eta1`` and repays ``min(payoff, (1 + r) * loan)``.
    """

    name = "credit"
    supplier_actions = ("deposit", "not deposit")
    demander_actions = ("invest", "not invest")

    def __init__(self, projects: Mapping[Any, ProjectDistribution]) -> None:
        if not projects:
            raise ValueError("credit kind needs at least one project")
        self.projects = dict(projects)
        self._cutoffs: dict[Any, Fraction] = {}

    def supplier_cutoff(self, cls: SupplierClass, h0: Optional[Fraction] = None) -> Fraction:
        return _h0_of(cls, h0)

    def check_supplier(self, cls: SupplierClass) -> None:
        if cls.v != cls.h1:
            raise ConditionViolation(1, "depositors bid their whole fund, so v must equal h1")

    def supplier_volume(self, cls: SupplierClass) -> Fraction:
        return cls.h1

    def supplier_payoff_poly(self, cls: SupplierClass) -> Poly:
        # the bank repays principal plus interest
        k = self.supplier_volume(cls) / cls.h1
        return Poly.linear(-k, -k)

    def supplier_utility(self, h0, action, x, rho):
        deposit = action == "deposit"
        if x > (1 if deposit else 0):
            return -INF
        return (1 + rho) * x - ((1 + h0) if deposit else 0)

    def _split(self, eta0: Any) -> tuple[Fraction, ProjectDistribution]:
        equity, project = eta0
        equity = to_scalar(equity)
        if project not in self.projects:
            raise ConditionViolation(4, f"unknown project {project!r}")
        return equity, self.projects[project]

    def check_demander(self, cls: DemanderClass) -> None:
        if not isinstance(cls.weight, Atom):
            raise ConditionViolation(4, "credit demanders must be atoms")
        equity, project = self._split(cls.eta0)
        if not 0 < equity < 1:
            raise ConditionViolation(4, "equity share must lie in (0, 1)")
        if project.mean <= equity:
            raise ConditionViolation(4, "project never beats holding the equity; no finite cutoff")

    def supports_demand_segments(self) -> bool:
        return False

    def demander_cutoff(self, cls: DemanderClass, eta0: Any = None) -> Fraction:
        eta0 = cls.eta0 if eta0 is None else eta0
        key = (to_scalar(eta0[0]), eta0[1])
        if key not in self._cutoffs:
            self.check_demander(DemanderClass(Atom(1), cls.eta1, eta0))
            equity, project = self._split(eta0)
            loan = 1 - equity
            # contract utility E[max(0, X - (1 + r) loan)] equals the equity kept otherwise
            u = project.solve_excess(equity)
            self._cutoffs[key] = u / loan - 1
        return self._cutoffs[key]

    def demander_volume(self, cls: DemanderClass) -> Fraction:
        equity, _ = self._split(cls.eta0)
        return (1 - equity) * cls.eta1

    def demander_revenue_pw(self, cls: DemanderClass) -> PiecewisePoly:
        equity, project = self._split(cls.eta0)
        loan = 1 - equity
        parts = []
        for x, p in project.atoms:
            if p == 0:
                continue
            b = x / loan - 1
            # min(x, (1 + r) loan) with the kink where the cap binds
            parts.append(
                PiecewisePoly((b,), (x,), (Poly.linear(loan, loan), Poly.const(x))) * p
            )
        return sum_piecewise(parts).simplify()

    def demander_utility(self, eta0, action, x, r):
        equity, project = self._split(eta0)
        invest = action == "invest"
        if x + equity < (1 if invest else 0):
            return -INF
        if not invest:
            return max(Fraction(0), equity - r * x)
        return sum(
            (p * max(Fraction(0), equity + px - 1 - r * x) for px, p in project.atoms), Fraction(0)
        )


def trading_kind() -> TradingKind:
    return TradingKind()


def credit_kind(projects: Mapping[Any, ProjectDistribution]) -> CreditKind:
    return CreditKind(projects)


# ---------------------------------------------------------------------------
# fixtures


@dataclass(frozen=True)
class ExampleFixture:
    name: str
    spec: PopulationSpec
    expected: dict
    provenance: str
    params: dict = field(default_factory=dict)


def trading_example(v: ScalarLike) -> PopulationSpec:
    """Uniform production cost on (0, 5/4] with capacity ``v``; two consumer values."""
    v = to_scalar(v)
    suppliers = [SupplierClass(UniformSegment(0, Fraction(5, 4), Fraction(4, 5)), h1=v, v=v)]
    demanders = [
        DemanderClass(Atom(Fraction(3, 5)), eta1=1, eta0=Fraction(1)),
        DemanderClass(Atom(Fraction(2, 5)), eta1=1, eta0=Fraction(2)),
    ]
    return PopulationSpec(tuple(suppliers), tuple(demanders), TradingKind())


def _credit_supply(v: Fraction) -> tuple[SupplierClass, ...]:
    return (SupplierClass(UniformSegment(0, Fraction(2, 3), Fraction(3, 2)), h1=v, v=v),)


def credit_basic_example(v: ScalarLike = Fraction(1, 2)) -> PopulationSpec:
    """Two entrepreneur types with risky projects; depositor costs uniform on (0, 2/3]."""
    v = to_scalar(v)
    projects = {
        1: ProjectDistribution(((0, Fraction(3, 5)), (10, Fraction(2, 5))), name="X1"),
        2: ProjectDistribution(((0, Fraction(4, 5)), (20, Fraction(1, 5))), name="X2"),
    }
    demanders = (
        DemanderClass(Atom(Fraction(19, 20)), eta1=2, eta0=(Fraction(1, 2), 1)),
        DemanderClass(Atom(Fraction(1, 20)), eta1=2, eta0=(Fraction(1, 2), 2)),
    )
    return PopulationSpec(_credit_supply(v), demanders, CreditKind(projects))


def credit_infinite_example(v: ScalarLike = 1, K: int = 20) -> PopulationSpec:
    """Countable family of entrepreneur types truncated after ``K`` types."""
    v = to_scalar(v)
    if K < 1:
        raise ValueError("K must be at least 1")
    projects = {}
    demanders = []
    for i in range(1, K + 1):
        p = Fraction(1, 2**i)
        projects[i] = ProjectDistribution(((0, 1 - p), (3 * 2**i, p)), name=f"X{i}")
        demanders.append(DemanderClass(Atom(p), eta1=2, eta0=(Fraction(1, 2), i)))
    tail = {
        "mass": Fraction(1, 2**K),
        "description": "types i > K with mass 2^-i and project {0, 3*2^i} w.p. 2^-i",
        "truncation": K,
    }
    return PopulationSpec(_credit_supply(v), tuple(demanders), CreditKind(projects), demand_tail=tail)


FIXTURE_NAMES = ("trading", "credit_basic", "credit_infinite")


def fixture(name: str) -> ExampleFixture:
    """Look up a built-in example; parameters follow ``?key=value`` syntax."""
    base, _, query = name.partition("?")
    params = dict(parse_qsl(query))
    if base == "trading":
        v = to_scalar(params.get("v", "0.43"))
        expected = {
            Fraction(4, 5): {"kind": "Empty"},
            Fraction(43, 100): {
                "kind": "UniquePositiveProfit",
                "supply_price": Fraction(50, 43),
                "volume": Fraction(2, 5),
                "demand": {Fraction(2): Fraction(2, 5)},
                "rationing": False,
            },
            # the single zero-profit point; a supply price of 5/4 fails the not-higher clause
            Fraction(6, 25): {
                "kind": "ZeroProfitFamily",
                "unique": True,
                "supply_price": Fraction(2),
                "volume": Fraction(6, 25),
                "demand": {Fraction(2): Fraction(6, 25)},
                "rationing": True,
            },
        }.get(v, {})
        return ExampleFixture(name, trading_example(v), expected, "reference qualitative", {"v": v})
    if base == "credit_basic":
        v = to_scalar(params.get("v", "1/2"))
        return ExampleFixture(
            name,
            credit_basic_example(v),
            {"exists": True, "v3_heights": "[0, 1]"},
            "reference qualitative; supply side reconstructed",
            {"v": v},
        )
    if base == "credit_infinite":
        v = to_scalar(params.get("v", "1"))
        K = int(params.get("K", "20"))
        expected = (
            {"kind": "UniquePositiveProfit", "claimed_demand_atom": {"price": 4, "mass": 1}}
            if v >= 1
            else {"unique": False}
        )
        return ExampleFixture(
            name,
            credit_infinite_example(v, K),
            expected,
            "reference claim under verify-or-document",
            {"v": v, "K": K},
        )
    raise KeyError(f"unknown fixture {base!r}; known: {', '.join(FIXTURE_NAMES)}")


def list_fixtures() -> list[dict]:
    return [
        {"name": "trading?v=0.8", "expected": "no equilibrium", "provenance": "reference"},
        {"name": "trading?v=0.43", "expected": "unique, no rationing", "provenance": "reference"},
        {"name": "trading?v=0.24", "expected": "unique, rationing", "provenance": "reference"},
        {"name": "credit_basic?v=1/2", "expected": "equilibrium exists", "provenance": "reference; supply reconstructed"},
        {"name": "credit_infinite?v=1&K=20", "expected": "single demand atom (claimed 4, mass 1)", "provenance": "reference claim"},
        {"name": "credit_infinite?v=3/4&K=20", "expected": "many equilibria", "provenance": "reference"},
    ]
