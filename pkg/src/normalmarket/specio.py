"""Population spec JSON parsing with field-path diagnostics."""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Annotated, Any, Literal, Optional, Union

from pydantic import BaseModel, BeforeValidator, ConfigDict, ValidationError, model_validator

from .markets import CreditKind, ProjectDistribution, TradingKind, fixture
from .population import Atom, DemanderClass, PopulationSpec, SupplierClass, UniformSegment
from .scalar import fmt, to_scalar


def _rational(value: Any) -> Fraction:
    if isinstance(value, bool):
        raise ValueError("expected a rational number, got a boolean")
    try:
        return to_scalar(value)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a rational number: {value!r}") from exc


Rational = Annotated[Fraction, BeforeValidator(_rational)]


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", arbitrary_types_allowed=True)


class WeightModel(_Model):
    mass: Optional[Rational] = None
    lo: Optional[Rational] = None
    hi: Optional[Rational] = None
    density: Optional[Rational] = None
    lo_closed: bool = False
    hi_closed: bool = True

    @model_validator(mode="after")
    def _one_shape(self) -> "WeightModel":
        segment = (self.lo, self.hi, self.density)
        if self.mass is not None and any(x is not None for x in segment):
            raise ValueError("give either mass or lo/hi/density, not both")
        if self.mass is None and any(x is None for x in segment):
            raise ValueError("a uniform weight needs lo, hi and density")
        if self.mass is not None and self.mass < 0:
            raise ValueError("mass must be non-negative")
        if self.mass is None and not self.lo < self.hi:
            raise ValueError("uniform weight needs lo < hi")
        return self

    def build(self) -> Union[Atom, UniformSegment]:
        if self.mass is not None:
            return Atom(self.mass)
        return UniformSegment(self.lo, self.hi, self.density, self.lo_closed, self.hi_closed)


class SupplierModel(_Model):
    weight: WeightModel
    h1: Rational
    v: Rational
    h0: Optional[Rational] = None


class DemanderModel(_Model):
    weight: WeightModel
    eta1: Rational
    eta0: Optional[Rational] = None
    project: Optional[int] = None


class ProjectModel(_Model):
    atoms: list[tuple[Rational, Rational]]
    name: str = ""


class SpecModel(_Model):
    kind: Literal["trading", "credit"]
    suppliers: list[SupplierModel]
    demanders: list[DemanderModel]
    projects: list[ProjectModel] = []
    demand_tail: Optional[dict] = None
    supply_tail: Optional[dict] = None

    @model_validator(mode="after")
    def _projects_match(self) -> "SpecModel":
        if self.kind == "credit":
            for i, d in enumerate(self.demanders):
                if d.project is None or not 1 <= d.project <= len(self.projects):
                    raise ValueError(f"demanders.{i}.project must index projects (1-based)")
        return self


class SpecError(ValueError):
    """Malformed spec; ``issues`` holds ``(field path, message)`` pairs."""

    def __init__(self, issues: list[tuple[str, str]]) -> None:
        self.issues = issues
        super().__init__("; ".join(f"{path}: {msg}" for path, msg in issues))


def _path(loc: tuple) -> str:
    return ".".join(str(x) for x in loc) or "<root>"


def parse_spec(data: Any) -> PopulationSpec:
    """Build a :class:`PopulationSpec` from parsed JSON."""
    try:
        model = SpecModel.model_validate(data)
    except ValidationError as exc:
        raise SpecError([(_path(e["loc"]), e["msg"]) for e in exc.errors()]) from None
    try:
        return _build(model)
    except ValueError as exc:
        raise SpecError([("<root>", str(exc))]) from None


def _build(model: SpecModel) -> PopulationSpec:
    suppliers = tuple(SupplierClass(s.weight.build(), h1=s.h1, v=s.v, h0=s.h0) for s in model.suppliers)
    if model.kind == "trading":
        demanders = tuple(DemanderClass(d.weight.build(), eta1=d.eta1, eta0=d.eta0) for d in model.demanders)
        kind = TradingKind()
    else:
        projects = {
            i + 1: ProjectDistribution(tuple(p.atoms), name=p.name or f"X{i + 1}") for i, p in enumerate(model.projects)
        }
        demanders = tuple(
            DemanderClass(d.weight.build(), eta1=d.eta1, eta0=(d.eta0, d.project)) for d in model.demanders
        )
        kind = CreditKind(projects)
    return PopulationSpec(suppliers, demanders, kind, model.demand_tail, model.supply_tail)


def load_spec(source: str) -> tuple[PopulationSpec, str]:
    """Load ``fixture:<name>`` or a JSON file path; returns the spec and a label."""
    if source.startswith("fixture:"):
        name = source[len("fixture:"):]
        return fixture(name).spec, source
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SpecError([("<file>", f"cannot read {source}: {exc.strerror}")]) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError([("<file>", f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")]) from None
    return parse_spec(data), str(path)


def _weight_json(w: Union[Atom, UniformSegment]) -> dict:
    if isinstance(w, Atom):
        return {"mass": fmt(w.mass)}
    return {"lo": fmt(w.lo), "hi": fmt(w.hi), "density": fmt(w.density), "lo_closed": w.lo_closed, "hi_closed": w.hi_closed}


def spec_to_json(spec: PopulationSpec) -> dict:
    """Inverse of :func:`parse_spec` for the supported encodings."""
    out: dict[str, Any] = {"kind": spec.kind.name, "suppliers": [], "demanders": []}
    for s in spec.suppliers:
        row = {"weight": _weight_json(s.weight), "h1": fmt(s.h1), "v": fmt(s.v)}
        if s.h0 is not None:
            row["h0"] = fmt(s.h0)
        out["suppliers"].append(row)
    keys: list = []
    if isinstance(spec.kind, CreditKind):
        keys = list(spec.kind.projects)
        out["projects"] = [
            {"atoms": [[fmt(x), fmt(p)] for x, p in spec.kind.projects[k].atoms], "name": spec.kind.projects[k].name}
            for k in keys
        ]
    for d in spec.demanders:
        row = {"weight": _weight_json(d.weight), "eta1": fmt(d.eta1)}
        if isinstance(spec.kind, CreditKind):
            row["eta0"] = fmt(to_scalar(d.eta0[0]))
            row["project"] = keys.index(d.eta0[1]) + 1
        elif d.eta0 is not None:
            row["eta0"] = fmt(to_scalar(d.eta0))
        out["demanders"].append(row)
    for name in ("demand_tail", "supply_tail"):
        tail = getattr(spec, name)
        if tail:
            out[name] = {k: fmt(v) if isinstance(v, Fraction) else v for k, v in tail.items()}
    return out
