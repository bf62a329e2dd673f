"""Vehicle classes, fleet mixes and arrival generation."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CATEGORIES = ("slow", "medium", "fast")

# km/h bounds of each speed category
SPEED_BANDS = {"slow": (0.0, 15.0), "medium": (30.0, 50.0), "fast": (80.0, 120.0)}


@dataclass(frozen=True)
class VehicleClass:
    """Physical and behavioural envelope shared by all vehicles of one type.

    Brakings are negative (m/s^2); ``max_speed`` is km/h.
    """

    name: str
    category: str
    share: float  # percent within its category
    length: float
    width: float
    max_speed: float
    max_accel: float
    desired_braking: float
    expected_leader_braking: float

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"{self.name}: unknown category {self.category!r}")
        if not (self.length > 0 and self.width > 0):
            raise ValueError(f"{self.name}: dimensions must be positive")
        lo, hi = SPEED_BANDS[self.category]
        ok = 0 < self.max_speed <= hi if self.category == "slow" else lo <= self.max_speed <= hi
        if not ok:
            raise ValueError(f"{self.name}: max speed {self.max_speed} km/h outside {self.category} band")
        if self.max_accel <= 0:
            raise ValueError(f"{self.name}: max acceleration must be positive")
        if self.desired_braking >= 0 or self.expected_leader_braking >= 0:
            raise ValueError(f"{self.name}: brakings must be negative")
        if not 0 <= self.share <= 100:
            raise ValueError(f"{self.name}: share must be within [0, 100]")

    @property
    def desired_speed(self) -> float:
        """Desired speed in m/s."""
        return self.max_speed / 3.6


# Dimensions and kinematic envelopes are conventional defaults; only the
# modal shares come from observed Dhaka traffic. Variations split their
# type's share evenly.
DEFAULT_CLASSES: tuple[VehicleClass, ...] = (
    VehicleClass("bicycle", "slow", 9.0, 1.8, 0.6, 12.0, 0.8, -2.0, -2.0),
    VehicleClass("rickshaw", "slow", 89.0, 2.5, 1.2, 10.0, 0.6, -1.5, -1.5),
    VehicleClass("van", "slow", 2.0, 3.0, 1.4, 8.0, 0.5, -1.5, -1.5),
    VehicleClass("cng", "medium", 83.0, 2.7, 1.4, 40.0, 1.5, -3.0, -3.0),
    VehicleClass("bus_1", "medium", 7.5, 10.0, 2.5, 40.0, 1.0, -2.5, -3.0),
    VehicleClass("bus_2", "medium", 7.5, 12.0, 2.5, 35.0, 0.9, -2.5, -3.0),
    VehicleClass("truck_1", "medium", 1.0, 8.0, 2.4, 35.0, 0.9, -2.5, -3.0),
    VehicleClass("truck_2", "medium", 1.0, 10.0, 2.5, 30.0, 0.8, -2.5, -3.0),
    VehicleClass("motorbike", "fast", 88.0, 2.0, 0.8, 80.0, 2.5, -3.5, -3.0),
    VehicleClass("car_1", "fast", 4.0, 4.2, 1.7, 90.0, 2.0, -3.5, -3.0),
    VehicleClass("car_2", "fast", 4.0, 4.5, 1.8, 100.0, 2.0, -3.5, -3.0),
    VehicleClass("car_3", "fast", 4.0, 4.8, 1.9, 110.0, 2.2, -3.5, -3.0),
)


def load_class_table(path: str | Path) -> tuple[VehicleClass, ...]:
    """Read a CSV class table with the same columns as :class:`VehicleClass`."""
    text = Path(path).read_text(encoding="utf-8")
    return parse_class_table(text)


def parse_class_table(text: str) -> tuple[VehicleClass, ...]:
    rows = csv.DictReader(io.StringIO(text))
    out = []
    for row in rows:
        out.append(VehicleClass(
            name=row["name"], category=row["category"], share=float(row["share"]),
            length=float(row["length"]), width=float(row["width"]),
            max_speed=float(row["max_speed"]), max_accel=float(row["max_accel"]),
            desired_braking=float(row["desired_braking"]),
            expected_leader_braking=float(row["expected_leader_braking"]),
        ))
    return tuple(out)


def _cdf(shares) -> np.ndarray:
    if not shares:
        return np.zeros(0)
    cdf = np.cumsum(np.asarray(shares, dtype=float))
    if cdf[-1] > 0:
        cdf = cdf / cdf[-1]
        # exact 1.0 so that u < 1 can never fall past the last bucket
        cdf[-1] = 1.0
    return cdf


class FleetMix:
    """Category shares plus the modal shares of classes within each category.

    All shares are percentages; each group must sum to 100 (categories with a
    zero share may have any class table).
    """

    def __init__(self, slow: float, medium: float, fast: float,
                 classes: tuple[VehicleClass, ...] = DEFAULT_CLASSES):
        self.shares = {"slow": float(slow), "medium": float(medium), "fast": float(fast)}
        for cat, s in self.shares.items():
            if not 0 <= s <= 100:
                raise ValueError(f"{cat} share {s} outside [0, 100]")
        if not math.isclose(sum(self.shares.values()), 100.0, abs_tol=1e-9):
            raise ValueError(f"category shares sum to {sum(self.shares.values()):g}, not 100")
        self.classes = tuple(classes)
        self.by_category: dict[str, tuple[VehicleClass, ...]] = {
            cat: tuple(c for c in self.classes if c.category == cat) for cat in CATEGORIES
        }
        for cat in CATEGORIES:
            members = self.by_category[cat]
            if self.shares[cat] == 0:
                continue
            if not members:
                raise ValueError(f"no vehicle classes defined for {cat} vehicles")
            total = sum(c.share for c in members)
            if not math.isclose(total, 100.0, abs_tol=1e-9):
                raise ValueError(f"{cat} modal shares sum to {total:g}, not 100")

        self._cat_cdf = _cdf([self.shares[c] for c in CATEGORIES])
        self._cls_cdf = {cat: _cdf([c.share for c in self.by_category[cat]])
                         for cat in CATEGORIES}

    def probability(self, name: str) -> float:
        """Marginal probability that a generated vehicle has class ``name``."""
        for c in self.classes:
            if c.name == name:
                return self.shares[c.category] / 100.0 * c.share / 100.0
        raise KeyError(name)

    @staticmethod
    def _pick(cdf: np.ndarray, u: float) -> int:
        # side="right" never selects a zero-width bucket for u in [0, 1)
        return int(np.searchsorted(cdf, u, side="right"))

    def __repr__(self):
        s = self.shares
        return f"FleetMix(slow={s['slow']:g}, medium={s['medium']:g}, fast={s['fast']:g})"


def sample_class(mix: FleetMix, rng: np.random.Generator) -> VehicleClass:
    """Draw category by its share, then a class by modal share within it."""
    ci = mix._pick(mix._cat_cdf, rng.random())
    cat = CATEGORIES[ci]
    members = mix.by_category[cat]
    return members[mix._pick(mix._cls_cdf[cat], rng.random())]


def sample_classes(mix: FleetMix, rng: np.random.Generator, n: int) -> np.ndarray:
    """Vectorised :func:`sample_class`; returns indices into ``mix.classes``."""
    u = rng.random((n, 2))
    cat_idx = np.searchsorted(mix._cat_cdf, u[:, 0], side="right")
    out = np.empty(n, dtype=np.int64)
    index_of = {c.name: i for i, c in enumerate(mix.classes)}
    for ci, cat in enumerate(CATEGORIES):
        sel = cat_idx == ci
        if not sel.any():
            continue
        members = mix.by_category[cat]
        k = np.searchsorted(mix._cls_cdf[cat], u[sel, 1], side="right")
        lookup = np.array([index_of[m.name] for m in members])
        out[sel] = lookup[k]
    return out


MIX_PRESETS = {
    "dhaka": (55.0, 40.0, 5.0),
    "miami": (9.0, 75.0, 16.0),
    "riyadh": (9.0, 75.0, 16.0),
    "homogeneous": (0.0, 100.0, 0.0),
}

# vehicles/hour per generating node for DemandType 0, 1, 2
DEMAND_PRESETS = {
    "dhaka": (100.0, 400.0, 800.0),
    "miami": (500.0, 1000.0, 2000.0),
    "riyadh": (500.0, 1000.0, 2000.0),
}

LEVELS = ("low", "medium", "high")


@dataclass(frozen=True)
class DemandProfile:
    level: str
    rate: float  # vehicles/hour per generating node

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ValueError(f"unknown demand level {self.level!r}")
        if not self.rate > 0:
            raise ValueError("generation rate must be positive")

    @property
    def mean_headway(self) -> float:
        return 3600.0 / self.rate

    @classmethod
    def from_type(cls, demand_type: int, profile: str = "dhaka") -> "DemandProfile":
        rates = DEMAND_PRESETS[profile]
        return cls(LEVELS[demand_type], rates[demand_type])


def uniform_open0(rng: np.random.Generator) -> float:
    """Uniform draw on (0, 1]."""
    return 1.0 - rng.random()


def sample_headway(mean_headway: float, r: float) -> float:
    """Exponential headway by inversion: ``mean * -ln(r)`` with r in (0, 1]."""
    if not mean_headway > 0:
        raise ValueError("mean headway must be positive")
    if not 0 < r <= 1:
        raise ValueError(f"uniform variate {r} outside (0, 1]")
    return -mean_headway * math.log(r)


def generate_arrivals(profile: DemandProfile, horizon: float, rng: np.random.Generator) -> list[float]:
    """Arrival instants in [0, horizon) with exponential headways."""
    out: list[float] = []
    t = 0.0
    mu = profile.mean_headway
    while True:
        h = sample_headway(mu, uniform_open0(rng))
        t += h
        if t >= horizon:
            return out
        # a zero headway would repeat the previous instant
        if out and t <= out[-1]:
            continue
        out.append(t)


def occupied_strips(vehicle_width: float, strip_width: float) -> int:
    """Strips a vehicle overlaps laterally; never fewer than one."""
    if vehicle_width <= 0 or strip_width <= 0:
        raise ValueError("widths must be positive")
    return max(1, math.ceil(vehicle_width / strip_width - 1e-9))
