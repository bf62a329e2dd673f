"""Discretionary lateral moves: desire, feasibility and gap acceptance.

Value-level mirror of the decision logic inside the simulation kernel.
Sides are tried left first (``-1``, towards strip 0), then right.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from . import kernel as _kernels

log = logging.getLogger(__name__)

_k = _kernels.default


class Shift(IntEnum):
    LEFT = -1
    STAY = 0
    RIGHT = 1


@dataclass(frozen=True)
class Neighbour:
    """A vehicle on the target strips: gap in m (bumper to bumper), speed in m/s.

    ``desired_speed`` and the Gipps rates are only needed for a follower,
    whose braking is checked.
    """

    gap: float
    speed: float
    desired_speed: float = 0.0
    max_accel: float = 1.0
    desired_braking: float = -3.0
    leader_braking: float = -3.0


@dataclass(frozen=True)
class SideContext:
    free: bool  # target strips clear over the subject's extent
    lead: Neighbour | None = None
    lag: Neighbour | None = None


@dataclass(frozen=True)
class LaneContext:
    speed: float  # subject speed, m/s
    desired_speed: float
    leader_gap: float = math.inf  # current leader, m
    leader_speed: float = 0.0
    achievable_speed: float | None = None  # this step's car-following speed
    left: SideContext = field(default_factory=lambda: SideContext(False))
    right: SideContext = field(default_factory=lambda: SideContext(False))

    def side(self, d: Shift) -> SideContext:
        return self.left if d == Shift.LEFT else self.right


@dataclass(frozen=True)
class GapAcceptanceParams:
    lam: float = 1.0  # 1/s
    critical_gap: float = 0.5  # s

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.critical_gap < 0:
            raise ValueError("critical gap must be non-negative")


@dataclass(frozen=True)
class GhrParams:
    c: float = 15.0
    m: float = 1.0
    l: float = 2.0
    lag: int = 1  # steps

    def __post_init__(self):
        if not -2 <= self.m <= 2:
            raise ValueError("m outside [-2, 2]")
        if not -1 <= self.l <= 4:
            raise ValueError("l outside [-1, 4]")
        if self.lag < 1:
            raise ValueError("lag must be at least one step")


def desire_to_change(ctx: LaneContext, tau: float = 1.0, proximity_factor: float = 2.0,
                     eps: float = 0.1) -> bool:
    """Blocked, or a slower leader within ``proximity_factor * v * tau``."""
    if math.isinf(ctx.leader_gap):
        return False
    if ctx.achievable_speed is not None and ctx.achievable_speed < eps:
        return True
    return ctx.leader_speed < ctx.speed and ctx.leader_gap < proximity_factor * ctx.speed * tau


def straightforward_change(ctx: LaneContext) -> Shift:
    for d in (Shift.LEFT, Shift.RIGHT):
        if ctx.side(d).free:
            return d
    return Shift.STAY


def implied_braking(v_prev: float, v_now: float) -> float:
    """Speed drop over one step (positive when slowing)."""
    return v_prev - v_now


def gap_time(gap: float, speed: float) -> float:
    """gap / speed; a stopped subject sees an infinite gap time if the gap is open."""
    if speed <= 0:
        log.debug("gap time with zero subject speed (gap %.3f m)", gap)
    return _k.gap_time(gap, speed)


def gap_probability(t: float, p: GapAcceptanceParams) -> float:
    return _k.gap_probability(t, p.lam, p.critical_gap)


def joint_gap_probability(p_lead: float, p_lag: float) -> float:
    return p_lead * p_lag


def _gipps(v, vd, a, b, bhat, tau, dx, vl):
    return _k.gipps_speed(v, vd, a, b, bhat, tau, dx, vl)[0]


def feasible(ctx: LaneContext, side: SideContext, gipps, tau: float = 1.0) -> bool:
    """Neither the subject nor the target follower must brake harder than its own limit.

    ``gipps`` is the subject's :class:`~roadbird.carfollow.GippsParams`.
    """
    lead = side.lead
    dx, vl = (lead.gap, lead.speed) if lead is not None else (math.inf, 0.0)
    v_new = _gipps(ctx.speed, ctx.desired_speed, gipps.max_accel, gipps.desired_braking,
                   gipps.leader_braking, tau, dx, vl)
    if not implied_braking(ctx.speed, v_new) < -gipps.desired_braking * tau:
        return False
    lag = side.lag
    if lag is not None:
        vf_new = _gipps(lag.speed, lag.desired_speed, lag.max_accel, lag.desired_braking,
                        lag.leader_braking, tau, lag.gap, ctx.speed)
        if not implied_braking(lag.speed, vf_new) < -lag.desired_braking * tau:
            return False
    return True


def acceptance_probability(ctx: LaneContext, side: SideContext, gap: GapAcceptanceParams) -> float:
    """Joint lead/lag acceptance; a missing neighbour accepts with certainty."""
    p_lead = 1.0 if side.lead is None else gap_probability(gap_time(side.lead.gap, ctx.speed), gap)
    p_lag = 1.0 if side.lag is None else gap_probability(gap_time(side.lag.gap, ctx.speed), gap)
    return joint_gap_probability(p_lead, p_lag)


def gipps_change(ctx: LaneContext, gipps, gap: GapAcceptanceParams, rng: np.random.Generator,
                 tau: float = 1.0) -> Shift:
    """Feasibility gate, then one Bernoulli draw per feasible side."""
    for d in (Shift.LEFT, Shift.RIGHT):
        side = ctx.side(d)
        if not side.free or not feasible(ctx, side, gipps, tau):
            continue
        if rng.random() < acceptance_probability(ctx, side, gap):
            return d
    return Shift.STAY


def ghr_acceleration(speed: float, dv: float, dx: float, p: GhrParams) -> float:
    """Stimulus-response score c v^m dv / dx^l from lagged relative speed and gap.

    Only its sign is used (as a desire trigger).
    """
    if not dx > 0:
        raise ValueError("lagged gap must be positive")
    return _k.ghr_accel(speed, dv, dx, p.c, p.m, p.l)


class GhrHistory:
    """Ring of (relative speed, gap) samples; ``lagged()`` is the sample ``lag`` steps back."""

    def __init__(self, lag: int = 1):
        self.lag = lag
        self._buf: deque[tuple[float, float]] = deque(maxlen=lag)

    def push(self, dv: float, dx: float):
        self._buf.append((dv, dx))

    @property
    def warm(self) -> bool:
        return len(self._buf) == self.lag

    def lagged(self) -> tuple[float, float] | None:
        return self._buf[0] if self.warm else None


def ghr_change(ctx: LaneContext, history: GhrHistory, ghr: GhrParams, gipps,
               gap: GapAcceptanceParams, rng: np.random.Generator, tau: float = 1.0) -> Shift:
    sample = history.lagged()
    if sample is None:
        return Shift.STAY
    dv, dx = sample
    if math.isinf(dx):
        return Shift.STAY
    try:
        a = ghr_acceleration(ctx.speed, dv, dx, ghr)
    except ValueError:
        log.warning("GHR trigger singular (lagged gap %.3f m); staying", dx)
        return Shift.STAY
    if not a < 0:
        return Shift.STAY
    return gipps_change(ctx, gipps, gap, rng, tau)
