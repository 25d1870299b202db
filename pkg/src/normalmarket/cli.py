"""Command-line front end.

Exit codes: 0 success, 1 domain failure, 2 usage error.
"""

from __future__ import annotations

import datetime as _dt
import json
import os
import sys
from dataclasses import asdict, dataclass
from importlib import metadata
from pathlib import Path
from typing import Any, Optional

import click

from .graphs import build_graphs
from .markets import list_fixtures
from .mechanism import equilibrium_replay
from .population import ConditionViolation, DomainError, validate_well_behaved
from .solver import EquilibriumCandidate, classify, decimal_summary, find_equilibria, summary_line, verify_equilibrium
from .specio import SpecError, load_spec


@dataclass(frozen=True)
class RunManifest:
    command: str
    source: str
    seed: Optional[int]
    output_dir: Optional[str]
    tool_version: str
    timestamp: str

    @staticmethod
    def create(command: str, source: str, seed: Optional[int] = None, output_dir: Optional[str] = None) -> "RunManifest":
        # SOURCE_DATE_EPOCH pins the timestamp for reproducible builds
        epoch = os.environ.get("SOURCE_DATE_EPOCH")
        when = _dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc) if epoch else _dt.datetime.now(_dt.timezone.utc)
        return RunManifest(command, source, seed, output_dir, tool_version(), when.isoformat(timespec="seconds"))


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0.0.0+local"


def _dump(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write(out: Optional[str], name: str, text: str) -> None:
    if out is None:
        return
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    (path / name).write_text(text)


def _load(source: str):
    try:
        return load_spec(source)
    except SpecError as exc:
        for where, msg in exc.issues:
            click.echo(f"spec error at {where}: {msg}", err=True)
        raise SystemExit(2)
    except KeyError as exc:
        click.echo(f"error: {exc.args[0]}", err=True)
        raise SystemExit(2)


def _domain_guard(fn):
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (DomainError, ConditionViolation, NotImplementedError) as exc:
            click.echo(f"domain error: {exc}", err=True)
            raise SystemExit(1)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _seed(flag: int) -> int:
    env = os.environ.get("NM_SEED")
    if env is None:
        return flag
    try:
        return int(env)
    except ValueError:
        raise click.UsageError(f"NM_SEED must be an integer, got {env!r}")


@click.group()
@click.version_option(tool_version(), prog_name="normalmarket")
def main() -> None:
    """Competitive equilibria of normal markets."""


@main.command()
@click.argument("spec")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Directory for JSON outputs.")
@_domain_guard
def validate(spec: str, out: Optional[str]) -> None:
    """Check the well-behavedness conditions."""
    population, source = _load(spec)
    report = validate_well_behaved(population)
    doc = report.to_dict()
    click.echo(_dump(doc), nl=False)
    _write(out, "conditions.json", _dump(doc))
    _write(out, "manifest.json", _dump(asdict(RunManifest.create("validate", source, output_dir=out))))
    if not report.well_behaved:
        raise SystemExit(1)


@main.command()
@click.argument("spec")
@click.option("--json", "as_json", is_flag=True, help="Print the equilibrium set as JSON.")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Directory for JSON outputs.")
@_domain_guard
def solve(spec: str, as_json: bool, out: Optional[str]) -> None:
    """Find the competitive equilibria."""
    population, source = _load(spec)
    eqset = find_equilibria(population)
    doc = eqset.to_json()
    doc["classification"] = classify(eqset)
    doc["summary"] = summary_line(eqset)
    if as_json:
        click.echo(_dump(doc), nl=False)
    else:
        click.echo(summary_line(eqset))
        if eqset.candidates:
            click.echo(decimal_summary(eqset))
    _write(out, "equilibria.json", _dump(doc))
    _write(out, "manifest.json", _dump(asdict(RunManifest.create("solve", source, output_dir=out))))


@main.command()
@click.argument("spec")
@click.option("--out", type=click.Path(file_okay=False), required=True, help="Directory for CSV and JSON exports.")
@_domain_guard
def graph(spec: str, out: str) -> None:
    """Export curves, graphs and regions as plot data."""
    population, source = _load(spec)
    g = build_graphs(population)
    c = g.curves
    _write(out, "real_supply.csv", c.supply.to_csv())
    _write(out, "real_demand.csv", c.demand.to_csv())
    _write(out, "demand_revenue.csv", c.p_hat.to_csv())
    _write(out, "supply_cost_upper.csv", c.p_bar.to_csv())
    _write(out, "supply_cost_lower.csv", c.p_low.to_csv())
    _write(out, "graphs.json", _dump(g.to_json()))
    _write(out, "manifest.json", _dump(asdict(RunManifest.create("graph", source, output_dir=out))))
    click.echo(f"wrote plot data to {out}")


@main.command()
@click.argument("spec")
@click.option("--n", "n", type=click.IntRange(min=1), default=1000, show_default=True, help="Suppliers and demanders.")
@click.option("--mediators", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--reps", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True, help="Root seed; NM_SEED overrides it.")
@click.option("--mu-bar", "mu_bar", default="1/2", show_default=True, help="Capacity threshold in [0, 1].")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Directory for the report and traces.")
@_domain_guard
def simulate(spec: str, n: int, mediators: int, reps: int, seed: int, mu_bar: str, out: Optional[str]) -> None:
    """Replay the first equilibrium in the finite mechanism."""
    population, source = _load(spec)
    seed = _seed(seed)
    eqset = find_equilibria(population)
    if not eqset.candidates:
        click.echo("no equilibrium to replay", err=True)
        raise SystemExit(1)
    try:
        report = equilibrium_replay(population, eqset.candidates[0], (n, mediators, n), reps, seed, mu_bar)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    doc = report.to_json()
    click.echo(_dump(doc), nl=False)
    _write(out, "report.json", _dump(doc))
    for i, trace in enumerate(report.traces):
        _write(out, f"trace_{i:04d}.ndjson", trace)
    _write(out, "manifest.json", _dump(asdict(RunManifest.create("simulate", source, seed, out))))
    if not report.all_feasible:
        raise SystemExit(1)


@main.command()
@click.argument("spec")
@click.argument("candidate", type=click.Path(exists=True, dir_okay=False))
@_domain_guard
def verify(spec: str, candidate: str) -> None:
    """Check candidates against the equilibrium characterization.

    CANDIDATE is a single candidate object or the JSON written by ``solve``.
    """
    population, _ = _load(spec)
    try:
        data = json.loads(Path(candidate).read_text())
        rows = data["candidates"] if "candidates" in data else [data]
        cands = [EquilibriumCandidate.from_json(r) for r in rows]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        click.echo(f"candidate error: {exc}", err=True)
        raise SystemExit(2)
    failed = False
    for i, cand in enumerate(cands):
        verdict = verify_equilibrium(population, cand)
        click.echo(json.dumps({"candidate": i, **verdict.to_json()}, sort_keys=True))
        failed |= not verdict.passed
    if failed:
        raise SystemExit(1)


@main.command()
def fixtures() -> None:
    """List built-in examples and their expected outcomes."""
    for row in list_fixtures():
        click.echo(f"fixture:{row['name']}\t{row['expected']}\t[{row['provenance']}]")


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
