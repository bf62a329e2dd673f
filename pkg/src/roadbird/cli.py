"""``roadbird`` command line: single runs, seed batches and travel-time validation."""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from . import __version__
from .batch import RunResult, emit_reports, emit_run, execute, parse_batch_spec, run_batch
from .config import ConfigError, RunConfig, load_parameters, serialize_parameters
from .fleet import DEMAND_PRESETS
from .stats import compare, read_samples, write_report

PROFILE = click.option("--profile", type=click.Choice(sorted(DEMAND_PRESETS)), default=None,
                       help="Demand-rate preset bound to DemandType (overrides the file).")
RATE_SCOPE = click.option("--rate-scope", type=click.Choice(["node", "total"]), default=None,
                          help="Generation rate per generating node or for the whole network.")


def _overrides(cfg: RunConfig, **kw) -> RunConfig:
    changes = {k: v for k, v in kw.items() if v is not None}
    return cfg.replace(**changes) if changes else cfg


@click.group()
@click.version_option(__version__)
@click.option("-v", "--verbose", count=True, help="More logging (repeatable).")
def main(verbose: int):
    """Strip-based traffic simulation."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _fail(msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(2)


@main.command()
@click.option("--topology", help="Topology directory or bundled name (default from params).")
@click.option("--params", "params_file", type=click.Path(exists=True, dir_okay=False),
              help="key=value parameter file.")
@click.option("--seed", type=int)
@click.option("--duration", type=float, help="Simulated seconds.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--backend", type=click.Choice(["cython", "python"]), default=None)
@click.option("--audit/--no-audit", default=False, help="Check for overlaps after every step.")
@PROFILE
@RATE_SCOPE
def run(topology, params_file, seed, duration, out_dir, backend, audit, profile, rate_scope):
    """Run one seeded simulation and write its reports."""
    try:
        cfg = load_parameters(params_file) if params_file else RunConfig()
        cfg = _overrides(cfg, topology=topology, seed=seed, duration=duration, profile=profile,
                         rate_scope=rate_scope)
    except (ConfigError, OSError) as exc:
        _fail(str(exc))
    res: RunResult = execute(cfg, backend=backend, audit=audit)
    emit_run(res, out_dir)
    (Path(out_dir) / "params.txt").write_text(serialize_parameters(cfg), encoding="utf-8")
    if res.error:
        _fail(res.error.splitlines()[0])
    s = res.report.summary()
    click.echo(" ".join(f"{k}={'' if v is None else f'{v:.3f}'}" for k, v in s.items()))


@main.command()
@click.option("--spec", "spec_file", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Batch file: parameters plus Seeds and Sweep.* keys.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--events/--no-events", default=True, help="Write per-run event logs.")
@PROFILE
@RATE_SCOPE
def batch(spec_file, out_dir, workers, events, profile, rate_scope):
    """Run every sweep point for every seed and write seed-averaged comparisons."""
    try:
        spec = parse_batch_spec(Path(spec_file).read_text(encoding="utf-8"))
        base = _overrides(spec.base, profile=profile, rate_scope=rate_scope)
        spec = type(spec)(base, spec.seeds, spec.strip_widths, spec.demand_types, spec.mixes,
                          spec.pedestrian_modes)
    except (ConfigError, OSError) as exc:
        _fail(str(exc))
    results = run_batch(spec, workers=workers, record_events=events)
    emit_reports(results, out_dir)
    failed = [r for r in results if r.error]
    click.echo(f"{len(results)} sweep points x {len(spec.seeds)} seeds -> {out_dir}")
    if failed:
        _fail(f"{len(failed)} sweep point(s) failed; see error.txt files")


@main.command()
@click.option("--observed", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--simulated", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def validate(observed, simulated, out_dir):
    """Compare observed and simulated travel times per route/direction/vehicle/regime."""
    try:
        reports = compare(read_samples(observed, "observed"), read_samples(simulated, "simulated"))
    except (ValueError, OSError) as exc:
        _fail(str(exc))
    if not reports:
        _fail("no (route, direction, vehicle_type, regime) cell appears in both files")
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    write_report(Path(out_dir) / "validation.csv", reports)
    click.echo(f"{len(reports)} cells -> {Path(out_dir) / 'validation.csv'}")


if __name__ == "__main__":
    main()
