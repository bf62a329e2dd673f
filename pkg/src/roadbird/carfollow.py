"""Longitudinal car-following rules.

Thin value-level API over the scalar functions the simulation kernel uses,
so the engine and these helpers can never disagree.

Gipps form used::

    v_acc = v + 2.5 a tau (1 - v/vd) sqrt(0.025 + v/vd)
    v_brk = b tau + sqrt(b^2 tau^2 - b (2 dx - v tau - vl^2 / b_hat))
    v'    = clamp(min(v_acc, v_brk), 0, vd)

where ``dx`` is the bumper gap to the leader's rear.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from . import kernel as _kernels

log = logging.getLogger(__name__)

_k = _kernels.default


@dataclass(frozen=True)
class FollowState:
    """Subject and leader kinematics for one decision.

    ``leader_pos`` is the leader's front bumper; pass ``math.inf`` when
    there is no leader.
    """

    pos: float  # m, subject front bumper
    speed: float  # m/s
    accel: float  # m/s², used as the acceleration rate by the Newtonian rule
    desired_speed: float  # m/s
    leader_pos: float = math.inf
    leader_speed: float = 0.0
    leader_length: float = 0.0  # effective length
    tau: float = 1.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.speed < 0 or self.leader_speed < 0:
            raise ValueError("speeds must be non-negative")
        if not self.desired_speed > 0:
            raise ValueError("desired speed must be positive")


@dataclass(frozen=True)
class GippsParams:
    max_accel: float  # a_n > 0
    desired_braking: float  # b_n < 0
    leader_braking: float  # b_hat < 0
    tau: float = 1.0

    def __post_init__(self):
        if not self.max_accel > 0:
            raise ValueError("max_accel must be positive")
        if not (self.desired_braking < 0 and self.leader_braking < 0):
            raise ValueError("braking rates must be negative")
        if not self.tau > 0:
            raise ValueError("tau must be positive")


def safe_gap(state: FollowState) -> float:
    """Bumper-to-bumper gap; negative when the two overlap."""
    return state.leader_pos - state.leader_length - state.pos


def newtonian_speed(state: FollowState) -> float:
    return _k.newtonian_speed(state.speed, state.desired_speed, state.accel, state.tau, safe_gap(state))


def gipps_speed(state: FollowState, p: GippsParams) -> float:
    v, ok = _k.gipps_speed(state.speed, state.desired_speed, p.max_accel, p.desired_braking,
                           p.leader_braking, p.tau, safe_gap(state), state.leader_speed)
    if not ok:
        log.warning("negative braking discriminant (gap %.3f m); emergency stop", safe_gap(state))
    return v


def hybrid_speed(state: FollowState, p: GippsParams) -> float:
    """Gipps speed, replaced by gap/tau whenever it would reach the leader's rear."""
    v, ok = _k.hybrid_speed(state.speed, state.desired_speed, p.max_accel, p.desired_braking,
                            p.leader_braking, p.tau, safe_gap(state), state.leader_speed)
    if not ok:
        log.warning("negative braking discriminant (gap %.3f m); emergency stop", safe_gap(state))
    return v


MODELS = {
    "newtonian": lambda s, p: newtonian_speed(s),
    "gipps": gipps_speed,
    "hybrid": hybrid_speed,
}


def advance(state: FollowState, new_speed: float) -> tuple[float, float]:
    """New position and acceleration after one step at ``new_speed``.

    Acceleration is the model rate ``state.accel`` when speeding up and the
    realised speed change per step otherwise.
    """
    if new_speed < 0:
        raise ValueError("new_speed must be non-negative")
    pos = state.pos + new_speed * state.tau
    if new_speed > state.speed:
        return pos, state.accel
    return pos, (new_speed - state.speed) / state.tau
