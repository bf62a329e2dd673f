"""Strip-based simulation loop.

State is kept as struct-of-arrays indexed by slot so the per-step update can
run inside the kernel. Python handles the rare events: generation, link
transfers, pedestrians, metrics bookkeeping and the event log.

Event log records are ``<t> <EVENT> <fields...>`` with ``t`` the clock at the
start of the step:

    SPAWN     vid class path strip
    BLOCKED   node class path
    SHIFT     vid link dir strip
    TRANSFER  vid from_link to_link strip
    HOLD      vid link
    EXIT      vid link
    COLLISION link vid vid
    PED_SPAWN pid link pos strip
    PED_DONE  pid link
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import kernel as kernels
from .fleet import FleetMix, VehicleClass, occupied_strips, sample_class, sample_headway, uniform_open0
from .metrics import WAIT_EPS, LinkMetrics, MetricsReport, VehicleRecord, build_report
from .network import RoadNetwork

CF_MODELS = {"newtonian": 0, "gipps": 1, "hybrid": 2}
LC_MODELS = {"straightforward": 0, "gipps": 1, "ghr": 2}

KIND_FREE, KIND_VEHICLE, KIND_PED = 0, 1, 2


class SimulationError(RuntimeError):
    """Internal inconsistency; the message carries a diagnostic dump."""


@dataclass
class ModelParams:
    tau: float = 1.0
    car_following: str = "hybrid"
    lane_changing: str = "gipps"
    gap_lambda: float = 1.0  # 1/s
    critical_gap: float = 0.5  # s
    ghr_c: float = 15.0
    ghr_m: float = 1.0
    ghr_l: float = 2.0
    ghr_lag: int = 1  # steps
    proximity_factor: float = 2.0  # slower-leader proximity = factor * v * tau
    lc_margin: float = 0.0  # m added around the subject when checking a target strip
    length_margin: float = 0.0  # m added to physical length for the effective length
    entry_speed_fraction: float = 0.5
    pedestrian_mode: bool = False
    pedestrian_rate: float = 50.0  # crossings/hour/link
    pedestrian_speed: float = 1.4  # m/s
    rate_scope: str = "node"  # "node": rate per generating node; "total": split over nodes

    def __post_init__(self):
        if self.car_following not in CF_MODELS:
            raise ValueError(f"unknown car-following model {self.car_following!r}")
        if self.lane_changing not in LC_MODELS:
            raise ValueError(f"unknown lane-changing model {self.lane_changing!r}")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.gap_lambda > 0 or self.critical_gap < 0:
            raise ValueError("gap acceptance needs lambda > 0 and T >= 0")
        if not -2 <= self.ghr_m <= 2 or not -1 <= self.ghr_l <= 4:
            raise ValueError("GHR exponents outside m in [-2, 2], l in [-1, 4]")
        if self.ghr_lag < 1:
            raise ValueError("GHR lag must be at least one step")
        if self.rate_scope not in ("node", "total"):
            raise ValueError(f"unknown rate scope {self.rate_scope!r}")


@dataclass
class _Pending:
    t: float
    cls: int
    path: int
    u_lat: float


@dataclass
class _Vehicle:
    vid: int
    cls: int
    path: tuple[int, ...]  # link indices
    path_id: int
    leg: int
    spawn_t: float
    enter_t: float
    dist_done: float = 0.0


@dataclass
class _Pedestrian:
    pid: int
    slot: int
    link: int
    lateral: float
    from_left: bool
    pos: float


_I8 = ("kind", "last_shift", "shift_dir")
_I32 = ("link", "lo", "hi", "next_link", "hist_n", "order", "xfer_out", "shift_out")
_F64 = ("pos", "pos_prev", "length", "speed", "accel", "vd", "amax", "bdes", "bhat", "wait", "newspeed")


@dataclass
class Counters:
    generated: int = 0
    exited: int = 0
    collisions: int = 0
    blocked: int = 0
    pedestrians: int = 0
    neg_discriminant: int = 0
    ghr_singular: int = 0
    steps: int = 0


@dataclass
class StripOccupancy:
    """Per link, per strip: sorted ``(vehicle id, rear, front)`` intervals."""

    strips: dict[int, list[list[tuple[int, float, float]]]] = field(default_factory=dict)


class Simulation:
    """One seeded run over a network.

    Parameters
    ----------
    network : RoadNetwork
    mix : FleetMix
    rate : float or None
        Vehicles/hour per generating node (see ``ModelParams.rate_scope``);
        ``None`` disables random generation (use :meth:`schedule_arrival`).
    params : ModelParams
    seed : int
    backend : str, optional
        Kernel backend name; defaults to the compiled one when available.
    """

    def __init__(self, network: RoadNetwork, mix: FleetMix, rate: float | None,
                 params: ModelParams | None = None, seed: int = 1, backend: str | None = None,
                 record_events: bool = True):
        self.net = network
        self.mix = mix
        self.params = p = params or ModelParams()
        self.rng = np.random.default_rng(seed)
        self.seed = seed
        self.record_events = record_events
        self.events: list[str] = []
        self.counters = Counters()
        self.step_index = 0

        self.link_ids = sorted(network.links)
        self.link_index = {lid: k for k, lid in enumerate(self.link_ids)}
        nl = len(self.link_ids)
        self.link_len = np.array([network.links[l].length for l in self.link_ids], dtype=np.float64)
        self.link_ns = np.array([network.strips[l] for l in self.link_ids], dtype=np.int32)
        self.mid_count = np.zeros(nl, dtype=np.int64)
        self.seg_start = np.zeros(nl, dtype=np.int32)
        self.seg_end = np.zeros(nl, dtype=np.int32)

        self.classes: tuple[VehicleClass, ...] = mix.classes
        self.class_index = {c.name: k for k, c in enumerate(self.classes)}
        sw = network.strip_width
        self.class_span = [occupied_strips(c.width, sw) for c in self.classes]
        self.kmax = max(self.class_span)
        self._check_fit()

        self.path_links = {pid: tuple(self.link_index[l] for l in path.links)
                           for pid, path in network.paths.items()}
        self.gen_nodes = network.generating_nodes
        self.node_paths = {n: [p.id for p in network.paths_from(n)] for n in self.gen_nodes}

        if rate is not None:
            per_node = rate / len(self.gen_nodes) if p.rate_scope == "total" and self.gen_nodes else rate
            self.mean_headway = 3600.0 / per_node if per_node > 0 else None
        else:
            self.mean_headway = None
        self.pending: dict[int, deque[_Pending]] = {n: deque() for n in self.gen_nodes}
        self.next_arrival: dict[int, float] = {}
        if self.mean_headway is not None:
            for n in self.gen_nodes:
                self.next_arrival[n] = sample_headway(self.mean_headway, uniform_open0(self.rng))

        kmod = kernels.get(backend)
        self.backend = kmod.Kernel.backend
        self.kernel = kmod.Kernel(nl, p.ghr_lag)
        self.kernel.set_params(p.tau, CF_MODELS[p.car_following], LC_MODELS[p.lane_changing],
                               p.gap_lambda, p.critical_gap, p.ghr_c, p.ghr_m, p.ghr_l,
                               p.proximity_factor, WAIT_EPS, p.lc_margin,
                               max(c.length for c in self.classes) + p.length_margin)
        self.down_clear = np.zeros(nl * (self.kmax + 1), dtype=np.float64)
        self.down_speed = np.zeros(nl * (self.kmax + 1), dtype=np.float64)
        self.down_ok = np.zeros(nl * (self.kmax + 1), dtype=np.int8)
        self.kernel.bind_links(self.link_len, self.link_ns, self.mid_count, self.seg_start, self.seg_end,
                               self.down_clear, self.down_speed, self.down_ok, self.kmax)

        self.cap = 0
        self.arrays: dict[str, np.ndarray] = {}
        self._grow(256)
        self.n_order = 0
        self.free_slots: list[int] = []
        self.limbo: list[int] = []  # freed this step, still listed in the ordering until the next sort
        self.next_slot = 0

        self.vehicles: dict[int, _Vehicle] = {}  # slot -> info
        self.peds: list[_Pedestrian] = []
        self.next_vid = 1
        self.next_pid = 1
        self.link_metrics = [LinkMetrics(l, network.links[l].length) for l in self.link_ids]
        self.finished: list[VehicleRecord] = []
        self._u_dummy = np.zeros(0, dtype=np.float64)

    # -- setup helpers -------------------------------------------------------

    def _check_fit(self):
        for lid in self.link_ids:
            ns = self.net.strips[lid]
            for c, k in zip(self.classes, self.class_span):
                if k > ns and self.mix.shares[c.category] > 0 and c.share > 0:
                    raise ValueError(f"{c.name} ({k} strips) cannot fit on link {lid} ({ns} strips)")

    def _grow(self, cap: int):
        old = self.arrays
        H = self.params.ghr_lag
        new: dict[str, np.ndarray] = {}
        for name in _I8:
            new[name] = np.zeros(cap, dtype=np.int8)
        for name in _I32:
            new[name] = np.zeros(cap, dtype=np.int32)
        for name in _F64:
            new[name] = np.zeros(cap, dtype=np.float64)
        new["hist_dv"] = np.zeros(cap * H, dtype=np.float64)
        new["hist_dx"] = np.zeros(cap * H, dtype=np.float64)
        for name, arr in old.items():
            new[name][: arr.shape[0]] = arr
        self.arrays = new
        self.cap = cap
        self.kernel.bind(new)
        for name, arr in new.items():
            setattr(self, "_" + name, arr)

    def _alloc(self) -> int:
        if self.free_slots:
            return self.free_slots.pop()
        if self.next_slot == self.cap:
            self._grow(self.cap * 2)
        s = self.next_slot
        self.next_slot += 1
        return s

    def _release(self, slot: int):
        self._kind[slot] = KIND_FREE
        self.limbo.append(slot)

    def _flush_limbo(self):
        # reverse so pop() hands out the lowest freed slot first
        self.free_slots.extend(sorted(self.limbo, reverse=True))
        self.free_slots.sort(reverse=True)
        self.limbo.clear()

    def _log(self, text: str):
        if self.record_events:
            self.events.append(f"{self.clock:.3f} {text}")

    @property
    def clock(self) -> float:
        return self.step_index * self.params.tau

    # -- generation -----------------------------------------------------------

    def schedule_arrival(self, t: float, vclass: str, path_id: int, u_lat: float = 0.0):
        """Queue a scripted arrival at the origin of ``path_id``."""
        node = self.net.links[self.net.paths[path_id].links[0]].from_node
        self.pending.setdefault(node, deque()).append(_Pending(t, self.class_index[vclass], path_id, u_lat))
        if node not in self.gen_nodes:
            self.gen_nodes = sorted(set(self.gen_nodes) | {node})

    def _draw_arrivals(self, until: float):
        if self.mean_headway is None:
            return
        for n in self.gen_nodes:
            paths = self.node_paths.get(n)
            while self.next_arrival[n] < until:
                c = sample_class(self.mix, self.rng)
                pid = paths[int(self.rng.integers(len(paths)))]
                u_lat = float(self.rng.random())
                self.pending[n].append(_Pending(self.next_arrival[n], self.class_index[c.name], pid, u_lat))
                self.next_arrival[n] += sample_headway(self.mean_headway, uniform_open0(self.rng))

    def _try_spawn(self, arr: _Pending) -> bool:
        cls = self.classes[arr.cls]
        k = self.class_span[arr.cls]
        path = self.path_links[arr.path]
        first = path[0]
        ns = int(self.link_ns[first])
        prefer = min(int(arr.u_lat * (ns - k + 1)), ns - k)
        length = cls.length + self.params.length_margin
        lo = self.kernel.find_entry(first, 0.0, length, k, prefer)
        if lo < 0:
            return False
        s = self._alloc()
        self._kind[s] = KIND_VEHICLE
        self._link[s] = first
        self._pos[s] = 0.0
        self._pos_prev[s] = 0.0
        self._length[s] = length
        self._lo[s] = lo
        self._hi[s] = lo + k - 1
        self._vd[s] = cls.desired_speed
        self._speed[s] = self.params.entry_speed_fraction * cls.desired_speed
        self._accel[s] = 0.0
        self._amax[s] = cls.max_accel
        self._bdes[s] = cls.desired_braking
        self._bhat[s] = cls.expected_leader_braking
        self._next_link[s] = path[1] if len(path) > 1 else -1
        self._last_shift[s] = 0
        self._wait[s] = 0.0
        self._hist_n[s] = 0
        self._append_order(s)
        vid = self.next_vid
        self.next_vid += 1
        self.vehicles[s] = _Vehicle(vid, arr.cls, path, arr.path, 0, self.clock, self.clock)
        self.counters.generated += 1
        self._log(f"SPAWN {vid} {cls.name} {arr.path} {lo}")
        return True

    def _append_order(self, slot: int):
        if self.n_order == self.cap:
            self._grow(self.cap * 2)
        self._order[self.n_order] = slot
        self.n_order += 1

    def _generate(self):
        self._draw_arrivals(self.clock + self.params.tau)
        for n in self.gen_nodes:
            q = self.pending.get(n)
            while q and q[0].t < self.clock + self.params.tau:
                if not self._try_spawn(q[0]):
                    self.counters.blocked += 1
                    head = q[0]
                    self._log(f"BLOCKED {n} {self.classes[head.cls].name} {head.path}")
                    break
                q.popleft()

    # -- pedestrians ----------------------------------------------------------

    def pedestrian_step(self):
        """Advance crossing pedestrians one step, then spawn new ones."""
        p = self.params
        if not p.pedestrian_mode:
            return
        sw = self.net.strip_width
        keep = []
        for ped in self.peds:
            ped.lateral += p.pedestrian_speed * p.tau
            ns = int(self.link_ns[ped.link])
            if ped.lateral >= ns * sw:
                self._release(ped.slot)
                self._log(f"PED_DONE {ped.pid} {self.link_ids[ped.link]}")
                continue
            q = self._ped_strip(ped, ns, sw)
            self._lo[ped.slot] = q
            self._hi[ped.slot] = q
            keep.append(ped)
        self.peds = keep
        lam = p.pedestrian_rate * p.tau / 3600.0
        counts = self.rng.poisson(lam, size=len(self.link_ids))
        for li in range(len(self.link_ids)):
            for _ in range(int(counts[li])):
                pos = float(self.rng.random()) * float(self.link_len[li])
                from_left = bool(self.rng.random() < 0.5)
                s = self._alloc()
                ped = _Pedestrian(self.next_pid, s, li, 0.0, from_left, pos)
                self.next_pid += 1
                ns = int(self.link_ns[li])
                q = self._ped_strip(ped, ns, sw)
                self._kind[s] = KIND_PED
                self._link[s] = li
                self._pos[s] = pos
                self._pos_prev[s] = pos
                self._length[s] = 0.0
                self._speed[s] = 0.0
                self._lo[s] = q
                self._hi[s] = q
                self._append_order(s)
                self.peds.append(ped)
                self.counters.pedestrians += 1
                self._log(f"PED_SPAWN {ped.pid} {self.link_ids[li]} {pos:.3f} {q}")

    @staticmethod
    def _ped_strip(ped: _Pedestrian, ns: int, sw: float) -> int:
        q = min(int(ped.lateral / sw), ns - 1)
        return q if ped.from_left else ns - 1 - q

    # -- transfers ------------------------------------------------------------

    def node_transfer(self, slot: int) -> str:
        """Move a vehicle whose front reached its link end onward.

        Returns "exit", "transfer" or "hold".
        """
        info = self.vehicles[slot]
        tau = self.params.tau
        li = int(self._link[slot])
        L = float(self.link_len[li])
        p0 = float(self._pos_prev[slot])
        p1 = float(self._pos[slot])
        if p1 > p0:
            frac = min(1.0, max(0.0, (L - p0) / (p1 - p0)))
        else:
            frac = 1.0
        t_cross = self.clock + frac * tau
        if info.leg == len(info.path) - 1:
            self._leave_link(slot, info, li, t_cross)
            self.finished.append(VehicleRecord(info.vid, self.classes[info.cls].name,
                                               info.dist_done + L, t_cross - info.spawn_t, True))
            self._release(slot)
            del self.vehicles[slot]
            self.counters.exited += 1
            self._log(f"EXIT {info.vid} {self.link_ids[li]}")
            return "exit"
        nl = info.path[info.leg + 1]
        d = min(p1 - L, float(self.link_len[nl]))
        k = int(self._hi[slot] - self._lo[slot] + 1)
        lo = self.kernel.find_entry(nl, d, float(self._length[slot]), k, int(self._lo[slot]))
        if lo < 0:
            v1 = float(self._speed[slot])
            self._pos[slot] = L
            self._speed[slot] = 0.0
            self._accel[slot] = -v1 / tau
            if v1 >= WAIT_EPS:
                self._wait[slot] += tau
            self._log(f"HOLD {info.vid} {self.link_ids[li]}")
            return "hold"
        self._leave_link(slot, info, li, t_cross)
        info.leg += 1
        info.dist_done += L
        info.enter_t = t_cross
        self._link[slot] = nl
        self._pos[slot] = d
        self._pos_prev[slot] = d
        self._lo[slot] = lo
        self._hi[slot] = lo + k - 1
        self._wait[slot] = 0.0
        self._last_shift[slot] = 0
        self._next_link[slot] = info.path[info.leg + 1] if info.leg + 1 < len(info.path) else -1
        self._log(f"TRANSFER {info.vid} {self.link_ids[li]} {self.link_ids[nl]} {lo}")
        return "transfer"

    def _leave_link(self, slot: int, info: _Vehicle, li: int, t_cross: float):
        self.link_metrics[li].record_leave(info.vid, t_cross - info.enter_t, float(self._wait[slot]))

    # -- main loop ------------------------------------------------------------

    def step(self):
        p = self.params
        self._generate()
        self.pedestrian_step()

        k = self.kernel
        m = k.sort(self.n_order)
        self.n_order = m
        self._flush_limbo()
        if p.lane_changing == "straightforward":
            u = self._u_dummy
        else:
            u = self.rng.random(2 * m)
        nx, nsh = k.step(u)
        if self.record_events:
            for j in range(nsh):
                s = int(self._shift_out[j])
                self._log(f"SHIFT {self.vehicles[s].vid} {self.link_ids[self._link[s]]} "
                          f"{int(self._shift_dir[s])} {int(self._lo[s])}")
        for j in range(nx):
            self.node_transfer(int(self._xfer_out[j]))

        self.counters.neg_discriminant = int(k.neg_disc)
        self.counters.ghr_singular = int(k.ghr_singular)
        self.step_index += 1
        self.counters.steps = self.step_index
        if self.counters.generated != len(self.vehicles) + self.counters.exited:
            raise SimulationError(self._dump("vehicle conservation violated"))

    def run(self, duration: float, audit: bool = False, on_step=None):
        steps = int(round(duration / self.params.tau))
        for _ in range(steps):
            self.step()
            if audit:
                self.collision_audit()
            if on_step is not None:
                on_step(self)
        return self

    def collision_audit(self) -> list[tuple[int, int, int]]:
        """Vehicle pairs that share a strip and overlap longitudinally, as
        ``(link_id, vid_a, vid_b)``. Each pair is logged and counted."""
        # freed slots stay in limbo until the next step so auditing never changes slot reuse
        self.n_order = self.kernel.sort(self.n_order)
        pairs = []
        for li, a, b in self.kernel.audit():
            va, vb = self.vehicles[a].vid, self.vehicles[b].vid
            pairs.append((self.link_ids[li], min(va, vb), max(va, vb)))
        for lid, va, vb in pairs:
            self.counters.collisions += 1
            self._log(f"COLLISION {lid} {va} {vb}")
        return pairs

    # -- inspection -----------------------------------------------------------

    @property
    def active(self) -> int:
        return len(self.vehicles)

    def vehicle_state(self) -> list[dict]:
        """Snapshot of active vehicles ordered by vehicle id."""
        out = []
        for s, info in self.vehicles.items():
            out.append(dict(vid=info.vid, vclass=self.classes[info.cls].name,
                            link=self.link_ids[int(self._link[s])], pos=float(self._pos[s]),
                            rear=float(self._pos[s] - self._length[s]),
                            lo=int(self._lo[s]), hi=int(self._hi[s]), speed=float(self._speed[s]),
                            accel=float(self._accel[s]), wait=float(self._wait[s]),
                            distance=info.dist_done + float(self._pos[s])))
        return sorted(out, key=lambda r: r["vid"])

    def strip_occupancy(self) -> StripOccupancy:
        """Rebuild the per-strip occupancy view from vehicle state."""
        occ = StripOccupancy({lid: [[] for _ in range(int(self.link_ns[k]))]
                              for k, lid in enumerate(self.link_ids)})
        for v in self.vehicle_state():
            for q in range(v["lo"], v["hi"] + 1):
                occ.strips[v["link"]][q].append((v["vid"], v["rear"], v["pos"]))
        for lanes in occ.strips.values():
            for lane in lanes:
                lane.sort(key=lambda r: (r[1], r[0]))
        return occ

    def lateral_shift(self, vid: int, direction: int) -> bool:
        """Shift one vehicle a strip left (-1) or right (+1) if the target strip
        is clear over its extent; returns whether it moved."""
        slot = next(s for s, v in self.vehicles.items() if v.vid == vid)
        li = int(self._link[slot])
        lo, hi = int(self._lo[slot]), int(self._hi[slot])
        q = lo - 1 if direction < 0 else hi + 1
        if q < 0 or q >= int(self.link_ns[li]):
            return False
        front = float(self._pos[slot]) + self.params.lc_margin
        rear = float(self._pos[slot] - self._length[slot]) - self.params.lc_margin
        for s in range(self.next_slot):
            if s == slot or self._kind[s] == KIND_FREE or self._link[s] != li:
                continue
            if self._lo[s] <= q <= self._hi[s]:
                ps = float(self._pos[s])
                if ps - float(self._length[s]) < front and rear < ps:
                    return False
        self._lo[slot] = lo + direction
        self._hi[slot] = hi + direction
        self._log(f"SHIFT {vid} {self.link_ids[li]} {direction} {lo + direction}")
        return True

    def place_vehicle(self, vclass: str, path_id: int, pos: float, lo: int, speed: float,
                      leg: int = 0) -> int:
        """Insert a vehicle directly (test and scenario setup); returns its id."""
        cls = self.classes[self.class_index[vclass]]
        k = self.class_span[self.class_index[vclass]]
        path = self.path_links[path_id]
        s = self._alloc()
        self._kind[s] = KIND_VEHICLE
        self._link[s] = path[leg]
        self._pos[s] = pos
        self._pos_prev[s] = pos
        self._length[s] = cls.length + self.params.length_margin
        self._lo[s] = lo
        self._hi[s] = lo + k - 1
        self._vd[s] = cls.desired_speed
        self._speed[s] = speed
        self._accel[s] = 0.0
        self._amax[s] = cls.max_accel
        self._bdes[s] = cls.desired_braking
        self._bhat[s] = cls.expected_leader_braking
        self._next_link[s] = path[leg + 1] if leg + 1 < len(path) else -1
        self._last_shift[s] = 0
        self._wait[s] = 0.0
        self._hist_n[s] = 0
        self._append_order(s)
        vid = self.next_vid
        self.next_vid += 1
        self.vehicles[s] = _Vehicle(vid, self.class_index[vclass], path, path_id, leg, self.clock, self.clock)
        self.counters.generated += 1
        self._log(f"SPAWN {vid} {cls.name} {path_id} {lo}")
        return vid

    def place_pedestrian(self, link_id: int, pos: float, strip: int) -> int:
        """Insert a pedestrian that stays put until the next pedestrian step."""
        li = self.link_index[link_id]
        s = self._alloc()
        ns = int(self.link_ns[li])
        ped = _Pedestrian(self.next_pid, s, li, strip * self.net.strip_width, True, pos)
        self.next_pid += 1
        self._kind[s] = KIND_PED
        self._link[s] = li
        self._pos[s] = pos
        self._pos_prev[s] = pos
        self._length[s] = 0.0
        self._speed[s] = 0.0
        self._lo[s] = min(strip, ns - 1)
        self._hi[s] = min(strip, ns - 1)
        self._append_order(s)
        self.peds.append(ped)
        return ped.pid

    def _dump(self, reason: str) -> str:
        lines = [f"{reason} at t={self.clock} (seed {self.seed})",
                 f"counters: {self.counters}"]
        for v in self.vehicle_state()[:50]:
            lines.append(f"  {v}")
        return "\n".join(lines)

    # -- results --------------------------------------------------------------

    def report(self, include_active: bool = True) -> MetricsReport:
        for k, lm in enumerate(self.link_metrics):
            lm.midpoint_count = int(self.mid_count[k])
        records = list(self.finished)
        now = self.clock
        for s, info in sorted(self.vehicles.items(), key=lambda kv: kv[1].vid):
            records.append(VehicleRecord(info.vid, self.classes[info.cls].name,
                                         info.dist_done + float(self._pos[s]), now - info.spawn_t, False))
        records.sort(key=lambda r: r.vid)
        return build_report(self.link_metrics, records, now, include_active)

    def event_log(self) -> str:
        return "".join(e + "\n" for e in self.events)
