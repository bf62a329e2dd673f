"""Multi-seed runs over parameter sweeps, seed averaging and CSV output."""

from __future__ import annotations

import csv
import itertools
import logging
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

from .config import ConfigError, RunConfig, parse_bool, apply_pairs, parse_lines, resolve_topology
from .engine import Simulation
from .fleet import MIX_PRESETS
from .metrics import MetricsReport
from .network import RoadNetwork, build_network, load_topology

log = logging.getLogger(__name__)

METRICS = ("avg_link_speed_kmh", "avg_link_wait_s", "avg_link_flow_vph", "avg_vehicle_speed_kmh")
SWEEP_KEYS = ("Sweep.StripWidth", "Sweep.DemandType", "Sweep.Mix", "Sweep.PedestrianMode")


@lru_cache(maxsize=32)
def _network(topology: str, strip_width: float) -> RoadNetwork:
    return build_network(load_topology(resolve_topology(topology)), strip_width)


@dataclass
class RunResult:
    config: RunConfig
    report: MetricsReport | None = None
    counters: dict = field(default_factory=dict)
    events: str | None = None
    error: str | None = None

    @property
    def seed(self) -> int:
        return self.config.seed


def execute(cfg: RunConfig, record_events: bool = True, backend: str | None = None,
            audit: bool = False) -> RunResult:
    """One seeded simulation; failures are captured, not raised."""
    try:
        net = _network(cfg.topology, cfg.strip_width)
        sim = Simulation(net, cfg.fleet_mix(), cfg.rate, cfg.model_params(), seed=cfg.seed,
                         backend=backend, record_events=record_events)
        sim.run(cfg.duration, audit=audit)
        counters = dict(vars(sim.counters), active=sim.active)
        return RunResult(cfg, sim.report(), counters, sim.event_log() if record_events else None)
    except Exception as exc:  # recorded per run so one failure does not sink a batch
        log.error("run failed (seed %d): %s", cfg.seed, exc)
        return RunResult(cfg, error=f"{type(exc).__name__}: {exc}\n{traceback.format_exc()}")


# -- batch specs -------------------------------------------------------------

def _seeds(v: str) -> tuple[int, ...]:
    out: list[int] = []
    for part in v.split(","):
        part = part.strip()
        if "-" in part:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise ConfigError("Seeds must list at least one seed")
    return tuple(out)


def _mix(v: str) -> tuple[float, float, float]:
    v = v.strip()
    if v in MIX_PRESETS:
        return MIX_PRESETS[v]
    parts = v.split("/")
    if len(parts) != 3:
        raise ConfigError(f"mix {v!r}: expected a preset {sorted(MIX_PRESETS)} or slow/medium/fast")
    return tuple(float(p) for p in parts)  # type: ignore[return-value]


@dataclass(frozen=True)
class BatchSpec:
    base: RunConfig
    seeds: tuple[int, ...] = tuple(range(1, 11))
    strip_widths: tuple[float, ...] = ()
    demand_types: tuple[int, ...] = ()
    mixes: tuple[tuple[float, float, float], ...] = ()
    pedestrian_modes: tuple[bool, ...] = ()

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("a batch needs at least one seed")

    def points(self) -> list[RunConfig]:
        """Sweep points (seed left at the base value), in a fixed cross-product order."""
        b = self.base
        out = []
        for sw, dt, mix, ped in itertools.product(
                self.strip_widths or (b.strip_width,), self.demand_types or (b.demand_type,),
                self.mixes or ((b.slow, b.medium, b.fast),), self.pedestrian_modes or (b.pedestrian_mode,)):
            out.append(b.replace(strip_width=sw, demand_type=dt, slow=mix[0], medium=mix[1],
                                 fast=mix[2], pedestrian_mode=ped))
        return out


def parse_batch_spec(text: str, base: RunConfig | None = None) -> BatchSpec:
    """Parameter-file syntax plus ``Seeds`` (e.g. ``1-10``) and comma-separated
    ``Sweep.StripWidth``, ``Sweep.DemandType``, ``Sweep.Mix``, ``Sweep.PedestrianMode``."""
    cfg, extra = apply_pairs(parse_lines(text), base, extra_keys=("Seeds", "Sweep."))
    unknown = set(extra) - {"Seeds", *SWEEP_KEYS}
    if unknown:
        raise ConfigError(f"unknown sweep keys {sorted(unknown)}")

    def lst(key, conv):
        return tuple(conv(x.strip()) for x in extra[key].split(",") if x.strip()) if key in extra else ()

    try:
        return BatchSpec(
            base=cfg,
            seeds=_seeds(extra["Seeds"]) if "Seeds" in extra else (cfg.seed,),
            strip_widths=lst("Sweep.StripWidth", float),
            demand_types=lst("Sweep.DemandType", int),
            mixes=lst("Sweep.Mix", _mix),
            pedestrian_modes=lst("Sweep.PedestrianMode", parse_bool),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# -- running and averaging -----------------------------------------------------

@dataclass
class Average:
    mean: float | None
    n: int  # seeds with a value
    stderr: float | None


def average(values: list[float | None]) -> Average:
    """Arithmetic mean over non-null values, with the standard error of that mean."""
    xs = [v for v in values if v is not None]
    if not xs:
        return Average(None, 0, None)
    m = math.fsum(xs) / len(xs)
    if len(xs) < 2:
        return Average(m, len(xs), None)
    var = math.fsum((x - m) ** 2 for x in xs) / (len(xs) - 1)
    return Average(m, len(xs), math.sqrt(var / len(xs)))


@dataclass
class PointResult:
    config: RunConfig  # seed-independent description of the sweep point
    runs: list[RunResult]
    error: str | None = None

    @property
    def key(self) -> tuple:
        c = self.config
        return (c.strip_width, c.demand_level, c.mix_label, "on" if c.pedestrian_mode else "off")

    def averages(self) -> dict[str, Average]:
        if self.error:
            return {m: Average(None, 0, None) for m in METRICS}
        summaries = [r.report.summary() for r in self.runs]
        return {m: average([s[m] for s in summaries]) for m in METRICS}


def _execute_args(args):
    return execute(*args)


def run_batch(spec: BatchSpec, workers: int = 1, record_events: bool = True,
              backend: str | None = None) -> list[PointResult]:
    points = spec.points()
    jobs = [(p.replace(seed=s), record_events, backend) for p in points for s in spec.seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_execute_args, jobs))
    else:
        results = [_execute_args(j) for j in jobs]
    out = []
    k = len(spec.seeds)
    for i, p in enumerate(points):
        runs = results[i * k:(i + 1) * k]
        err = next((r.error for r in runs if r.error), None)
        out.append(PointResult(p, runs, err))
    return out


# -- CSV output ----------------------------------------------------------------

def _f(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_f(x) for x in row])


SUMMARY_FIELDS = ("seed", *METRICS, "n_vehicles", "n_completed", "generated", "exited", "active",
                  "blocked", "collisions", "pedestrians", "neg_discriminant")


def _summary_row(run: RunResult) -> list:
    s = run.report.summary()
    c = run.counters
    return [run.seed, *(s[m] for m in METRICS), run.report.n_vehicles, run.report.n_completed,
            c["generated"], c["exited"], c["active"], c["blocked"], c["collisions"], c["pedestrians"],
            c["neg_discriminant"]]


def emit_run(run: RunResult, out_dir: str | Path):
    """link_metrics.csv, vehicle_metrics.csv, summary.csv and events.log for one run."""
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    if run.error:
        (d / "error.txt").write_text(run.error, encoding="utf-8")
        return
    rep = run.report
    _write(d / "link_metrics.csv", ("link_id", "avg_speed_kmh", "avg_wait_s", "flow_vph", "n_crossings"),
           ([r.link_id, r.avg_speed_kmh, r.avg_wait_s, r.flow_vph, r.n_crossings] for r in rep.links))
    _write(d / "vehicle_metrics.csv",
           ("vehicle_id", "class", "distance_m", "travel_time_s", "speed_kmh", "completed"),
           ([v.vid, v.vclass, v.distance, v.travel_time,
             v.distance / v.travel_time * 3.6 if v.travel_time > 0 else None, int(v.completed)]
            for v in rep.vehicles))
    _write(d / "summary.csv", SUMMARY_FIELDS, [_summary_row(run)])
    if run.events is not None:
        (d / "events.log").write_text(run.events, encoding="utf-8")


def point_label(p: PointResult) -> str:
    sw, demand, mix, ped = p.key
    return f"sw{sw:g}_{demand}_{mix.replace('/', '-')}_ped{ped}"


def emit_reports(results: list[PointResult], out_dir: str | Path):
    """Per-run directories, a per-point summary with a seed-mean row, and
    ``comparison.csv`` sorted by sweep key then metric."""
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    rows = []
    for p in results:
        pdir = d / point_label(p)
        for run in p.runs:
            emit_run(run, pdir / f"seed_{run.seed}")
        avgs = p.averages()
        if p.error:
            (pdir / "error.txt").write_text(p.error, encoding="utf-8")
        else:
            seed_rows = [_summary_row(r) for r in p.runs]
            _write(pdir / "summary.csv", SUMMARY_FIELDS,
                   seed_rows + [["mean", *(avgs[m].mean for m in METRICS)] + [""] * (len(SUMMARY_FIELDS) - 5)])
        for m in METRICS:
            a = avgs[m]
            rows.append((*p.key, m, a.mean, a.n, a.stderr, p.error.splitlines()[0] if p.error else ""))
    rows.sort(key=lambda r: (r[0], ("low", "medium", "high").index(r[1]), r[2], r[3], r[4]))
    _write(d / "comparison.csv",
           ("strip_width", "demand", "mix", "pedestrian_mode", "metric", "mean", "n_seeds", "stderr", "error"),
           rows)
