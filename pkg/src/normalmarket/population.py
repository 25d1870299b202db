"""Supplier and demander populations as finite mixtures.

A population is a list of classes, each carrying a weight (an atom with a
probability mass, or a uniform density over the cutoff coordinate) and
the per-type characteristics.  A :class:`MarketKind` turns a class into
its dominant-strategy bid (cutoff price and volume) and into the per-unit
payoffs seen by the mediators.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional, Sequence, Union

import numpy as np

from .scalar import PiecewisePoly, Poly, ScalarLike, to_scalar


class ConditionViolation(ValueError):
    """Raised when a well-behavedness condition cannot hold for the input."""

    def __init__(self, condition: int, message: str) -> None:
        super().__init__(f"Condition {condition} violated: {message}")
        self.condition = condition


class DomainError(ValueError):
    """Argument outside the domain on which an operation is defined."""


@dataclass(frozen=True)
class Atom:
    """Point mass on one type."""

    mass: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "mass", to_scalar(self.mass))
        if self.mass < 0:
            raise ValueError("atom mass must be non-negative")

    @property
    def total(self) -> Fraction:
        return self.mass


@dataclass(frozen=True)
class UniformSegment:
    """Uniform density over the cutoff coordinate on ``(lo, hi)``.

    The endpoint flags only describe the support; they carry no mass.
    """

    lo: Fraction
    hi: Fraction
    density: Fraction
    lo_closed: bool = False
    hi_closed: bool = True

    def __post_init__(self) -> None:
        for name in ("lo", "hi", "density"):
            object.__setattr__(self, name, to_scalar(getattr(self, name)))
        if not self.lo < self.hi:
            raise ValueError("uniform segment needs lo < hi")
        if self.density < 0:
            raise ValueError("density must be non-negative")

    @property
    def total(self) -> Fraction:
        return self.density * (self.hi - self.lo)


WeightSpec = Union[Atom, UniformSegment]


@dataclass(frozen=True)
class SupplierClass:
    """Suppliers sharing (h0, h1, v); ``h0`` is ignored for uniform weights."""

    weight: WeightSpec
    h1: Fraction
    v: Fraction
    h0: Optional[Fraction] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "h1", to_scalar(self.h1))
        object.__setattr__(self, "v", to_scalar(self.v))
        if self.h0 is not None:
            object.__setattr__(self, "h0", to_scalar(self.h0))
        if self.h1 <= 0:
            raise ValueError("h1 must be positive")
        if self.v < 0:
            raise ValueError("capacity v must be non-negative")
        if isinstance(self.weight, Atom) and self.h0 is None:
            raise ValueError("atom supplier classes need h0")


@dataclass(frozen=True)
class DemanderClass:
    """Demanders sharing (eta0, eta1); ``eta0`` is ignored for uniform weights."""

    weight: WeightSpec
    eta1: Fraction
    eta0: Any = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "eta1", to_scalar(self.eta1))
        if self.eta1 <= 0:
            raise ValueError("eta1 must be positive")
        if isinstance(self.weight, Atom) and self.eta0 is None:
            raise ValueError("atom demander classes need eta0")


class MarketKind(abc.ABC):
    """Behaviour bundle mapping types to bids and mediator-side payoffs."""

    name: str = "abstract"
    supplier_actions: tuple[str, str] = ("act", "not act")
    demander_actions: tuple[str, str] = ("act", "not act")

    # supplier side
    @abc.abstractmethod
    def supplier_cutoff(self, cls: SupplierClass, h0: Optional[Fraction] = None) -> Fraction:
        """Lowest supply price at which contracting weakly beats no contract."""

    @abc.abstractmethod
    def supplier_volume(self, cls: SupplierClass) -> Fraction:
        """Price-independent optimal bid volume."""

    @abc.abstractmethod
    def supplier_payoff_poly(self, cls: SupplierClass) -> Poly:
        """Mediator-side payoff per unit of h1, as a polynomial in the supply price."""

    @abc.abstractmethod
    def supplier_utility(self, h0: Fraction, action: str, x: Fraction, rho: Fraction) -> float | Fraction:
        """Supplier utility per unit of h1 (``-inf`` for infeasible plans)."""

    # demander side
    @abc.abstractmethod
    def demander_cutoff(self, cls: DemanderClass, eta0: Any = None) -> Fraction:
        """Highest demand price at which contracting weakly beats no contract."""

    @abc.abstractmethod
    def demander_volume(self, cls: DemanderClass) -> Fraction:
        """Optimal bid volume."""

    @abc.abstractmethod
    def demander_revenue_pw(self, cls: DemanderClass) -> PiecewisePoly:
        """Mediator-side revenue per unit of eta1, piecewise in the demand price."""

    @abc.abstractmethod
    def demander_utility(self, eta0: Any, action: str, x: Fraction, r: Fraction) -> float | Fraction:
        """Expected demander utility per unit of eta1 (``-inf`` when infeasible)."""

    def supports_demand_segments(self) -> bool:
        return True

    def check_supplier(self, cls: SupplierClass) -> None:
        """Raise :class:`ConditionViolation` if the class has no well-defined bid."""

    def check_demander(self, cls: DemanderClass) -> None:
        """Raise :class:`ConditionViolation` if the class has no well-defined bid."""


@dataclass(frozen=True)
class PopulationSpec:
    """Both populations plus the market kind.

    ``demand_tail`` describes demander mass left out by truncation of a
    countable family; when present the listed masses may total less than 1.
    """

    suppliers: tuple[SupplierClass, ...]
    demanders: tuple[DemanderClass, ...]
    kind: MarketKind
    demand_tail: Optional[dict] = None
    supply_tail: Optional[dict] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "suppliers", tuple(self.suppliers))
        object.__setattr__(self, "demanders", tuple(self.demanders))

    @property
    def supply_mass(self) -> Fraction:
        return sum((c.weight.total for c in self.suppliers), Fraction(0))

    @property
    def demand_mass(self) -> Fraction:
        return sum((c.weight.total for c in self.demanders), Fraction(0))


def derive_supplier_strategy(cls: SupplierClass, kind: MarketKind) -> tuple[Fraction, Fraction]:
    """Dominant-strategy bid (cutoff price, volume) of an atom supplier class."""
    kind.check_supplier(cls)
    return kind.supplier_cutoff(cls), kind.supplier_volume(cls)


def derive_demander_strategy(cls: DemanderClass, kind: MarketKind) -> tuple[Fraction, Fraction]:
    """Dominant-strategy bid (cutoff price, volume) of an atom demander class."""
    kind.check_demander(cls)
    return kind.demander_cutoff(cls), kind.demander_volume(cls)


def supplier_unit_payoff(cls: SupplierClass, kind: MarketKind, rho: ScalarLike) -> Fraction:
    """Mediator-side payoff per unit of h1 at supply price ``rho``."""
    rho = to_scalar(rho)
    if isinstance(cls.weight, Atom) and rho < kind.supplier_cutoff(cls):
        raise DomainError("supply price below the class cutoff")
    return kind.supplier_payoff_poly(cls)(rho)


def demander_unit_revenue(cls: DemanderClass, kind: MarketKind, r: ScalarLike) -> Fraction:
    """Mediator-side revenue per unit of eta1 at demand price ``r``."""
    r = to_scalar(r)
    if isinstance(cls.weight, Atom) and r > kind.demander_cutoff(cls):
        raise DomainError("demand price above the class cutoff")
    return kind.demander_revenue_pw(cls)(r)


# ---------------------------------------------------------------------------
# condition report


@dataclass
class ConditionVerdict:
    condition: int
    passed: bool
    detail: str = ""


@dataclass
class ConditionReport:
    verdicts: list[ConditionVerdict] = field(default_factory=list)

    @property
    def well_behaved(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def failed(self) -> list[int]:
        return [v.condition for v in self.verdicts if not v.passed]

    def verdict(self, condition: int) -> ConditionVerdict:
        for v in self.verdicts:
            if v.condition == condition:
                return v
        raise KeyError(condition)

    def to_dict(self) -> dict:
        return {
            "well_behaved": self.well_behaved,
            "conditions": [
                {"condition": v.condition, "passed": v.passed, "detail": v.detail} for v in self.verdicts
            ],
        }


def _class_checks(spec: PopulationSpec, side: str, condition: int) -> ConditionVerdict:
    classes = spec.suppliers if side == "supply" else spec.demanders
    for i, cls in enumerate(classes):
        try:
            if side == "supply":
                spec.kind.check_supplier(cls)
            else:
                spec.kind.check_demander(cls)
                if isinstance(cls.weight, UniformSegment) and not spec.kind.supports_demand_segments():
                    raise ConditionViolation(condition, f"{spec.kind.name} demanders must be atoms")
        except ConditionViolation as exc:
            return ConditionVerdict(condition, False, f"{side} class {i}: {exc}")
    return ConditionVerdict(condition, True)


def _mass_check(spec: PopulationSpec, side: str, condition: int) -> ConditionVerdict:
    mass = spec.supply_mass if side == "supply" else spec.demand_mass
    tail = spec.supply_tail if side == "supply" else spec.demand_tail
    tail_mass = to_scalar(tail.get("mass", 0)) if tail else Fraction(0)
    if mass + tail_mass != 1:
        return ConditionVerdict(condition, False, f"{side} weights total {mass + tail_mass}, expected 1")
    return ConditionVerdict(condition, True, "finite mixture: expected volume is a finite sum")


def validate_well_behaved(spec: PopulationSpec) -> ConditionReport:
    """Per-condition verdicts for Conditions 1-11 and 13-15.

    Conditions on the aggregate curves are decided on every breakpoint and
    on each open piece between breakpoints, using the exact piecewise
    polynomial curves.
    """
    from . import curves  # local import: curves depends on this module

    report = ConditionReport()
    supplier_ok = _class_checks(spec, "supply", 1)
    report.verdicts.append(supplier_ok)
    report.verdicts.append(ConditionVerdict(2, supplier_ok.passed, "volume is price independent"))
    report.verdicts.append(_mass_check(spec, "supply", 3))
    demander_ok = _class_checks(spec, "demand", 4)
    report.verdicts.append(demander_ok)
    report.verdicts.append(ConditionVerdict(5, demander_ok.passed, "volume is price independent"))
    report.verdicts.append(_mass_check(spec, "demand", 6))
    report.verdicts.append(ConditionVerdict(7, supplier_ok.passed, "payoff depends only on the own contract"))
    report.verdicts.append(ConditionVerdict(8, demander_ok.passed, "payoff depends only on the own contract"))
    if not (supplier_ok.passed and demander_ok.passed):
        for c in (9, 10, 11, 13, 14, 15):
            report.verdicts.append(ConditionVerdict(c, False, "individual conditions failed"))
        return report
    built = curves.build_curves(spec)
    report.verdicts.extend(curves.check_curve_conditions(built))
    report.verdicts.sort(key=lambda v: v.condition)
    return report


# ---------------------------------------------------------------------------
# finite market sampling


@dataclass(frozen=True)
class FiniteSupplier:
    ident: int
    cls_index: int
    cutoff: Fraction
    volume: Fraction


@dataclass(frozen=True)
class FiniteDemander:
    ident: int
    cls_index: int
    cutoff: Fraction
    volume: Fraction


@dataclass(frozen=True)
class FiniteMarketInstance:
    """One finite draw of the market; volumes are divided by the side scale."""

    suppliers: tuple[FiniteSupplier, ...]
    demanders: tuple[FiniteDemander, ...]
    n_mediators: int
    supply_scale: int
    demand_scale: int


def _class_probabilities(classes: Sequence[Union[SupplierClass, DemanderClass]], tail: Optional[dict]) -> np.ndarray:
    masses = [float(c.weight.total) for c in classes]
    tail_mass = float(to_scalar(tail.get("mass", 0))) if tail else 0.0
    total = sum(masses) + tail_mass
    # tail draws are mapped onto the last listed class, which is the
    # truncation frontier of a countable family
    if tail_mass and masses:
        masses[-1] += tail_mass
    return np.asarray(masses) / total


def _draw(rng: np.random.Generator, classes, probs: np.ndarray, count: int):
    idx = rng.choice(len(classes), size=count, p=probs)
    u = rng.random(count)
    return idx, u


def sample_finite_market(
    spec: PopulationSpec, n_suppliers: int, n_mediators: int, n_demanders: int, seed: int
) -> FiniteMarketInstance:
    """Draw a finite market instance; deterministic given ``seed``."""
    if min(n_suppliers, n_mediators, n_demanders) < 1:
        raise ValueError("counts must be at least 1")
    kind = spec.kind
    rng_s = np.random.default_rng([seed, 0])
    rng_d = np.random.default_rng([seed, 1])

    suppliers = []
    if spec.suppliers:
        probs = _class_probabilities(spec.suppliers, spec.supply_tail)
        idx, u = _draw(rng_s, spec.suppliers, probs, n_suppliers)
        for i, (k, uu) in enumerate(zip(idx.tolist(), u.tolist())):
            cls = spec.suppliers[k]
            if isinstance(cls.weight, UniformSegment):
                h0 = cls.weight.lo + (cls.weight.hi - cls.weight.lo) * Fraction(uu)
                cutoff = kind.supplier_cutoff(cls, h0)
            else:
                cutoff = kind.supplier_cutoff(cls)
            suppliers.append(FiniteSupplier(i, k, cutoff, kind.supplier_volume(cls) / n_suppliers))

    demanders = []
    if spec.demanders:
        probs = _class_probabilities(spec.demanders, spec.demand_tail)
        idx, u = _draw(rng_d, spec.demanders, probs, n_demanders)
        for i, (k, uu) in enumerate(zip(idx.tolist(), u.tolist())):
            cls = spec.demanders[k]
            if isinstance(cls.weight, UniformSegment):
                eta0 = cls.weight.lo + (cls.weight.hi - cls.weight.lo) * Fraction(uu)
                cutoff = kind.demander_cutoff(cls, eta0)
            else:
                cutoff = kind.demander_cutoff(cls)
            demanders.append(FiniteDemander(i, k, cutoff, kind.demander_volume(cls) / n_demanders))

    return FiniteMarketInstance(tuple(suppliers), tuple(demanders), n_mediators, n_suppliers, n_demanders)
