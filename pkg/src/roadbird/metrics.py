"""Link and vehicle performance metrics.

Speeds are reported in km/h, waiting times in seconds and flows in
vehicles/hour. Averages over an empty sample are ``None``, never zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

MS_TO_KMH = 3.6

# below this speed (m/s) a vehicle counts as waiting
WAIT_EPS = 0.1


@dataclass
class LinkMetrics:
    link_id: int
    length: float
    crossings: list[tuple[int, float]] = field(default_factory=list)  # (vehicle id, time to cross)
    waits: list[float] = field(default_factory=list)
    midpoint_count: int = 0

    def record_leave(self, vid: int, time_to_cross: float, waited: float):
        if not time_to_cross > 0:
            raise ValueError(f"link {self.link_id}: non-positive crossing time {time_to_cross}")
        self.crossings.append((vid, time_to_cross))
        self.waits.append(waited)


@dataclass
class VehicleRecord:
    vid: int
    vclass: str
    distance: float  # m
    travel_time: float  # s
    completed: bool


def avg_link_speed(link: LinkMetrics) -> float | None:
    """Arithmetic mean over crossings of length / time_to_cross, km/h."""
    if not link.crossings:
        return None
    return sum(link.length / t for _, t in link.crossings) / len(link.crossings) * MS_TO_KMH


def avg_link_waiting(link: LinkMetrics) -> float | None:
    if not link.waits:
        return None
    return sum(link.waits) / len(link.waits)


def link_flow_rate(link: LinkMetrics, horizon: float) -> float:
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    return link.midpoint_count * 3600.0 / horizon


def avg_vehicle_speed(records: list[VehicleRecord], include_active: bool = True) -> float | None:
    """Mean of per-vehicle distance / travel time, km/h.

    Vehicles still travelling at the horizon contribute their elapsed values
    unless ``include_active`` is false.
    """
    speeds = [r.distance / r.travel_time for r in records
              if r.travel_time > 0 and (include_active or r.completed)]
    if not speeds:
        return None
    return sum(speeds) / len(speeds) * MS_TO_KMH


@dataclass
class LinkRow:
    link_id: int
    avg_speed_kmh: float | None
    avg_wait_s: float | None
    flow_vph: float
    n_crossings: int


@dataclass
class MetricsReport:
    links: list[LinkRow]
    avg_vehicle_speed_kmh: float | None
    n_vehicles: int
    n_completed: int
    horizon: float
    vehicles: list[VehicleRecord] = field(default_factory=list)

    def _mean(self, attr: str) -> float | None:
        vals = [getattr(r, attr) for r in self.links if getattr(r, attr) is not None]
        if not vals:
            return None
        return sum(vals) / len(vals)

    @property
    def mean_link_speed(self) -> float | None:
        """Network figure: mean of per-link average speeds over links with crossings."""
        return self._mean("avg_speed_kmh")

    @property
    def mean_link_wait(self) -> float | None:
        return self._mean("avg_wait_s")

    @property
    def mean_link_flow(self) -> float | None:
        return self._mean("flow_vph")

    def summary(self) -> dict[str, float | None]:
        return {
            "avg_link_speed_kmh": self.mean_link_speed,
            "avg_link_wait_s": self.mean_link_wait,
            "avg_link_flow_vph": self.mean_link_flow,
            "avg_vehicle_speed_kmh": self.avg_vehicle_speed_kmh,
        }


def build_report(links: list[LinkMetrics], vehicles: list[VehicleRecord], horizon: float,
                 include_active: bool = True) -> MetricsReport:
    rows = [LinkRow(l.link_id, avg_link_speed(l), avg_link_waiting(l), link_flow_rate(l, horizon),
                    len(l.crossings)) for l in sorted(links, key=lambda l: l.link_id)]
    return MetricsReport(
        links=rows,
        avg_vehicle_speed_kmh=avg_vehicle_speed(vehicles, include_active),
        n_vehicles=len(vehicles),
        n_completed=sum(r.completed for r in vehicles),
        horizon=horizon,
        vehicles=list(vehicles),
    )
