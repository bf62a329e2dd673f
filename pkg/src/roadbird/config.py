"""``key=value`` parameter files and the run configuration they describe."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .engine import CF_MODELS, LC_MODELS, ModelParams
from .fleet import DEFAULT_CLASSES, DEMAND_PRESETS, LEVELS, MIX_PRESETS, FleetMix, load_class_table

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


def bundled_topologies() -> list[str]:
    root = resources.files("roadbird") / "data" / "topologies"
    return sorted(p.name for p in root.iterdir() if p.is_dir())


def resolve_topology(name_or_dir: str) -> Path:
    """A directory path, or the name of a bundled topology."""
    p = Path(name_or_dir)
    if p.is_dir():
        return p
    bundled = resources.files("roadbird") / "data" / "topologies" / name_or_dir
    if bundled.is_dir():
        return Path(str(bundled))
    raise ConfigError(f"topology {name_or_dir!r} is neither a directory nor one of {bundled_topologies()}")


@dataclass(frozen=True)
class RunConfig:
    topology: str = "dhaka-like"
    demand_type: int = 1
    slow: float = 55.0
    medium: float = 40.0
    fast: float = 5.0
    strip_width: float = 0.5
    pedestrian_mode: bool = False
    car_following: str = "hybrid"
    lane_changing: str = "gipps"
    gap_lambda: float = 1.0
    critical_gap: float = 0.5
    ghr_c: float = 15.0
    ghr_m: float = 1.0
    ghr_l: float = 2.0
    ghr_lag: int = 1
    proximity_factor: float = 2.0
    pedestrian_rate: float = 50.0
    pedestrian_speed: float = 1.4
    tau: float = 1.0
    entry_speed_fraction: float = 0.5
    length_margin: float = 0.0
    lc_margin: float = 0.0
    profile: str = "dhaka"
    rate_scope: str = "node"
    generation_rate: float | None = None  # veh/h; overrides DemandType when set
    class_table: str | None = None
    duration: float = 1800.0
    seed: int = 1

    def __post_init__(self):
        total = self.slow + self.medium + self.fast
        if any(not 0 <= s <= 100 for s in (self.slow, self.medium, self.fast)):
            raise ConfigError("vehicle shares must lie in [0, 100]")
        if not math.isclose(total, 100.0, abs_tol=1e-9):
            raise ConfigError(f"SlowVehicle + MediumVehicle + FastVehicle = {total:g}, expected 100")
        if not self.strip_width > 0:
            raise ConfigError("StripWidth must be positive")
        if not self.duration > 0:
            raise ConfigError("Duration must be positive")
        if self.demand_type not in (0, 1, 2):
            raise ConfigError("DemandType must be 0, 1 or 2")
        if self.profile not in DEMAND_PRESETS:
            raise ConfigError(f"Profile must be one of {sorted(DEMAND_PRESETS)}")
        if self.generation_rate is not None and not self.generation_rate > 0:
            raise ConfigError("GenerationRate must be positive")

    @property
    def rate(self) -> float:
        if self.generation_rate is not None:
            return self.generation_rate
        return DEMAND_PRESETS[self.profile][self.demand_type]

    @property
    def demand_level(self) -> str:
        return LEVELS[self.demand_type]

    @property
    def mix_label(self) -> str:
        shares_now = (self.slow, self.medium, self.fast)
        if MIX_PRESETS.get(self.profile) == shares_now:
            return self.profile
        for name, shares in MIX_PRESETS.items():
            if shares == shares_now:
                return name
        return f"{self.slow:g}/{self.medium:g}/{self.fast:g}"

    def fleet_mix(self) -> FleetMix:
        classes = load_class_table(self.class_table) if self.class_table else DEFAULT_CLASSES
        return FleetMix(self.slow, self.medium, self.fast, classes)

    def model_params(self) -> ModelParams:
        return ModelParams(
            tau=self.tau, car_following=self.car_following, lane_changing=self.lane_changing,
            gap_lambda=self.gap_lambda, critical_gap=self.critical_gap, ghr_c=self.ghr_c,
            ghr_m=self.ghr_m, ghr_l=self.ghr_l, ghr_lag=self.ghr_lag,
            proximity_factor=self.proximity_factor, lc_margin=self.lc_margin,
            length_margin=self.length_margin, entry_speed_fraction=self.entry_speed_fraction,
            pedestrian_mode=self.pedestrian_mode, pedestrian_rate=self.pedestrian_rate,
            pedestrian_speed=self.pedestrian_speed, rate_scope=self.rate_scope)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


def parse_bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("on", "true", "yes", "1"):
        return True
    if s in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"expected on/off, got {v!r}")


def _choice(options):
    def conv(v: str) -> str:
        s = v.strip().lower()
        if s not in options:
            raise ValueError(f"expected one of {sorted(options)}, got {v!r}")
        return s
    return conv


def _opt_float(v: str) -> float | None:
    return None if v.strip().lower() in ("", "none") else float(v)


def _opt_str(v: str) -> str | None:
    return None if v.strip().lower() in ("", "none") else v.strip()


def _fmt_bool(b: bool) -> str:
    return "on" if b else "off"


def _fmt_num(x) -> str:
    return "none" if x is None else (repr(x) if isinstance(x, float) else str(x))


# file key -> (field, parser, formatter)
KEYS: dict[str, tuple[str, object, object]] = {
    "Topology": ("topology", str.strip, str),
    "DemandType": ("demand_type", int, str),
    "SlowVehicle": ("slow", float, _fmt_num),
    "MediumVehicle": ("medium", float, _fmt_num),
    "FastVehicle": ("fast", float, _fmt_num),
    "StripWidth": ("strip_width", float, _fmt_num),
    "PedestrianMode": ("pedestrian_mode", parse_bool, _fmt_bool),
    "CarFollowingModel": ("car_following", _choice(CF_MODELS), str),
    "LaneChangingModel": ("lane_changing", _choice(LC_MODELS), str),
    "Lambda": ("gap_lambda", float, _fmt_num),
    "CriticalGapT": ("critical_gap", float, _fmt_num),
    "GhrC": ("ghr_c", float, _fmt_num),
    "GhrM": ("ghr_m", float, _fmt_num),
    "GhrL": ("ghr_l", float, _fmt_num),
    "GhrLag": ("ghr_lag", int, str),
    "ProximityFactor": ("proximity_factor", float, _fmt_num),
    "PedestrianRate": ("pedestrian_rate", float, _fmt_num),
    "PedestrianSpeed": ("pedestrian_speed", float, _fmt_num),
    "TimeStep": ("tau", float, _fmt_num),
    "EntrySpeedFraction": ("entry_speed_fraction", float, _fmt_num),
    "LengthMargin": ("length_margin", float, _fmt_num),
    "LaneChangeMargin": ("lc_margin", float, _fmt_num),
    "Profile": ("profile", _choice(DEMAND_PRESETS), str),
    "RateScope": ("rate_scope", _choice(("node", "total")), str),
    "GenerationRate": ("generation_rate", _opt_float, _fmt_num),
    "ClassTable": ("class_table", _opt_str, lambda v: "none" if v is None else v),
    "Duration": ("duration", float, _fmt_num),
    "Seed": ("seed", int, str),
}
FIELD_TO_KEY = {f: k for k, (f, _, _) in KEYS.items()}


def parse_lines(text: str) -> list[tuple[int, str, str]]:
    """``(line number, key, value)`` for each non-blank, non-comment line."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        k, v = line.split("=", 1)
        out.append((lineno, k.strip(), v.strip()))
    return out


def apply_pairs(pairs, base: RunConfig | None = None, extra_keys=()) -> tuple[RunConfig, dict[str, str]]:
    """Fold key/value pairs into ``base``. Keys listed in ``extra_keys`` are
    returned unparsed; other unknown keys are warned about and ignored."""
    changes = {}
    extra = {}
    for lineno, k, v in pairs:
        if k in extra_keys or any(k.startswith(p) for p in extra_keys if p.endswith(".")):
            extra[k] = v
            continue
        if k not in KEYS:
            log.warning("line %d: unknown parameter %r ignored", lineno, k)
            continue
        fname, conv, _ = KEYS[k]
        try:
            changes[fname] = conv(v)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: invalid value for {k}: {exc}") from None
    try:
        cfg = (base or RunConfig()).replace(**changes)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg, extra


def parse_parameters(text: str, base: RunConfig | None = None) -> RunConfig:
    return apply_pairs(parse_lines(text), base)[0]


def load_parameters(path: str | Path, base: RunConfig | None = None) -> RunConfig:
    return parse_parameters(Path(path).read_text(encoding="utf-8"), base)


def serialize_parameters(cfg: RunConfig) -> str:
    lines = []
    for k, (fname, _, fmt) in KEYS.items():
        lines.append(f"{k}={fmt(getattr(cfg, fname))}")
    return "\n".join(lines) + "\n"
