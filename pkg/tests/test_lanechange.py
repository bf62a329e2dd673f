import logging
import math

import numpy as np
import pytest

from roadbird import kernel
from roadbird.carfollow import GippsParams
from roadbird.lanechange import (GapAcceptanceParams, GhrHistory, GhrParams, LaneContext, Neighbour, Shift,
                                 SideContext, acceptance_probability, desire_to_change, feasible,
                                 gap_probability, gap_time, ghr_acceleration, ghr_change, gipps_change,
                                 implied_braking, joint_gap_probability, straightforward_change)

from conftest import BACKENDS
from oracles import gipps as gipps_oracle

G = GippsParams(1.5, -3.0, -3.0)


class FixedDraw:
    """Stands in for a Generator; returns a fixed uniform."""

    def __init__(self, u):
        self.u = u
        self.calls = 0

    def random(self):
        self.calls += 1
        return self.u


def ctx(**kw):
    base = dict(speed=10.0, desired_speed=15.0, leader_gap=8.0, leader_speed=4.0)
    base.update(kw)
    return LaneContext(**base)


# -- desire -----------------------------------------------------------------------

def test_desire_examples():
    assert desire_to_change(ctx(achievable_speed=0.0, leader_speed=0.0, speed=0.0, leader_gap=0.5))
    assert not desire_to_change(ctx(leader_gap=math.inf))
    assert not desire_to_change(ctx(leader_gap=30.0, leader_speed=12.0))
    # slower leader inside 2 v tau = 20 m, and outside it
    assert desire_to_change(ctx(leader_gap=19.0, leader_speed=9.0))
    assert not desire_to_change(ctx(leader_gap=21.0, leader_speed=9.0))
    assert desire_to_change(ctx(leader_gap=21.0, leader_speed=9.0), proximity_factor=3.0)


# -- straightforward ----------------------------------------------------------------

@pytest.mark.parametrize("left,right,expect", [
    (True, True, Shift.LEFT), (False, True, Shift.RIGHT), (True, False, Shift.LEFT), (False, False, Shift.STAY)])
def test_straightforward_side_choice(left, right, expect):
    c = ctx(left=SideContext(left), right=SideContext(right))
    assert straightforward_change(c) is expect


# -- braking and gap acceptance ---------------------------------------------------------

def test_implied_braking_examples():
    assert implied_braking(12, 12) == 0
    assert implied_braking(12, 9) == 3


@pytest.mark.parametrize("backend", BACKENDS)
def test_implied_braking_hypothetical_leader(backend):
    k = kernel.get(backend)
    # subject at 12 m/s behind a hypothetical leader 9 m ahead doing 3 m/s
    v_new, ok = k.gipps_speed(12.0, 15.0, 1.5, -3.0, -3.0, 1.0, 9.0, 3.0)
    want = 12.0 - gipps_oracle(12.0, 15.0, 1.5, -3.0, -3.0, 1.0, 9.0, 3.0)
    assert ok and implied_braking(12.0, v_new) == pytest.approx(want, rel=1e-12)


def test_gap_probability_examples():
    p = GapAcceptanceParams(lam=0.5, critical_gap=1.0)
    assert gap_probability(1.0, p) == 0.0
    assert gap_probability(3.0, p) == pytest.approx(1 - math.exp(-1), abs=1e-12)
    assert round(gap_probability(3.0, p), 4) == 0.6321
    assert gap_probability(0.4, p) == 0.0


def test_gap_probability_monotone_and_continuous():
    rng = np.random.default_rng(3)
    for _ in range(500):
        lam, T = rng.uniform(0.05, 5), rng.uniform(0, 3)
        t1, t2 = sorted(rng.uniform(0, 10, 2))
        p = GapAcceptanceParams(lam, T)
        assert gap_probability(t1, p) <= gap_probability(t2, p)
        assert gap_probability(t2, p) <= gap_probability(t2, GapAcceptanceParams(lam * 2, T))
        assert 0.0 <= gap_probability(t2, p) <= 1.0  # 1 - exp(-x) saturates in floating point
        assert gap_probability(T + 1e-12, p) < 1e-10


def test_gap_time_for_stopped_subject():
    p = GapAcceptanceParams()
    assert math.isinf(gap_time(5.0, 0.0))
    assert gap_probability(gap_time(5.0, 0.0), p) == 1.0
    assert gap_probability(gap_time(0.0, 0.0), p) == 0.0
    assert gap_time(20.0, 10.0) == 2.0


def test_joint_probability_examples():
    assert joint_gap_probability(0.5, 0.5) == 0.25
    assert joint_gap_probability(0.0, 0.9) == 0.0
    a = 1 - math.exp(-1)
    b = 1 - math.exp(-2)
    assert round(joint_gap_probability(round(a, 4), round(b, 4)), 4) == 0.5466


# -- gipps_change ----------------------------------------------------------------------

def _side_with_half_chance(speed=10.0, lam=1.0, T=0.5):
    gap = speed * (T + math.log(2) / lam)  # each of lead and lag accepted with p = 0.5
    lead = Neighbour(gap, speed)
    lag = Neighbour(gap, speed, desired_speed=15.0, max_accel=1.5, desired_braking=-3.0, leader_braking=-3.0)
    return SideContext(True, lead, lag)


def test_infeasible_when_follower_overbrakes():
    # follower 1 m behind doing 15 m/s while subject does 5 m/s
    lag = Neighbour(1.0, 15.0, 20.0, 1.5, -3.0, -3.0)
    side = SideContext(True, None, lag)
    c = ctx(speed=5.0, left=side)
    assert not feasible(c, side, G)
    draw = FixedDraw(0.0)
    assert gipps_change(c, G, GapAcceptanceParams(), draw) is Shift.STAY
    assert draw.calls == 0


def test_infeasible_when_subject_overbrakes():
    side = SideContext(True, Neighbour(0.5, 0.0), None)
    c = ctx(speed=12.0, left=side)
    assert not feasible(c, side, G)


def test_feasible_certain_accept_shifts():
    side = SideContext(True)
    c = ctx(left=side)
    assert acceptance_probability(c, side, GapAcceptanceParams()) == 1.0
    assert gipps_change(c, G, GapAcceptanceParams(), FixedDraw(0.999999)) is Shift.LEFT


def test_left_evaluated_before_right():
    side = _side_with_half_chance()
    c = ctx(left=side, right=side)
    draws = iter([0.9, 0.1])

    class Seq:
        def random(self):
            return next(draws)

    assert gipps_change(c, G, GapAcceptanceParams(), Seq()) is Shift.RIGHT


def test_monte_carlo_quarter():
    side = _side_with_half_chance()
    c = ctx(left=side)
    gap = GapAcceptanceParams(1.0, 0.5)
    assert acceptance_probability(c, side, gap) == pytest.approx(0.25, abs=1e-12)
    rng = np.random.default_rng(11)
    n = 100_000
    hits = sum(gipps_change(c, G, gap, rng) is Shift.LEFT for _ in range(n))
    assert abs(hits / n - 0.25) < 0.01


def test_large_lambda_reduces_to_feasibility_gate():
    side = SideContext(True, Neighbour(30.0, 10.0), Neighbour(30.0, 10.0, 15.0, 1.5, -3.0, -3.0))
    c = ctx(left=side)
    rng = np.random.default_rng(5)
    gap = GapAcceptanceParams(lam=1e6, critical_gap=0.5)
    assert all(gipps_change(c, G, gap, rng) is Shift.LEFT for _ in range(1000))


# -- GHR --------------------------------------------------------------------------------

def test_ghr_examples():
    p = GhrParams(15, 1, 2)
    assert ghr_acceleration(10, 0.0, 20, p) == 0.0
    assert ghr_acceleration(10, -2.0, 20, p) == pytest.approx(-0.75, abs=1e-12)
    assert ghr_acceleration(10, 1.0, 20, p) > 0
    with pytest.raises(ValueError):
        ghr_acceleration(10, -1.0, 0.0, p)


@pytest.mark.parametrize("backend", BACKENDS)
def test_ghr_sign_follows_relative_speed(backend):
    k = kernel.get(backend)
    rng = np.random.default_rng(17)
    for _ in range(10_000):
        c, m, l = rng.uniform(0.01, 50), rng.uniform(-2, 2), rng.uniform(0, 4)
        v, dv, dx = rng.uniform(0.01, 40), rng.uniform(-20, 20), rng.uniform(0.01, 300)
        a = k.ghr_accel(v, dv, dx, c, m, l)
        assert np.sign(a) == np.sign(dv)


def test_ghr_change_paths(caplog):
    p = GhrParams(15, 1, 2, lag=2)
    c = ctx(left=SideContext(True))
    h = GhrHistory(lag=2)
    h.push(-2.0, 20.0)
    assert not h.warm
    assert ghr_change(c, h, p, G, GapAcceptanceParams(), FixedDraw(0.0)) is Shift.STAY
    h.push(0.0, 20.0)
    assert h.lagged() == (-2.0, 20.0)
    assert ghr_change(c, h, p, G, GapAcceptanceParams(), FixedDraw(0.0)) is Shift.LEFT

    h1 = GhrHistory(1)
    h1.push(0.0, 20.0)
    assert ghr_change(c, h1, GhrParams(), G, GapAcceptanceParams(), FixedDraw(0.0)) is Shift.STAY
    h1.push(-1.0, 0.0)
    with caplog.at_level(logging.WARNING):
        assert ghr_change(c, h1, GhrParams(), G, GapAcceptanceParams(), FixedDraw(0.0)) is Shift.STAY
    assert "singular" in caplog.text
    h1.push(-1.0, math.inf)
    assert ghr_change(c, h1, GhrParams(), G, GapAcceptanceParams(), FixedDraw(0.0)) is Shift.STAY

    # negative trigger but no feasible side
    blocked = ctx(left=SideContext(False), right=SideContext(False))
    h1.push(-2.0, 20.0)
    assert ghr_change(blocked, h1, GhrParams(), G, GapAcceptanceParams(), FixedDraw(0.0)) is Shift.STAY


@pytest.mark.parametrize("kw", [dict(m=3), dict(l=5), dict(lag=0)])
def test_ghr_params_validation(kw):
    with pytest.raises(ValueError):
        GhrParams(**kw)


@pytest.mark.parametrize("kw", [dict(lam=0), dict(critical_gap=-1)])
def test_gap_params_validation(kw):
    with pytest.raises(ValueError):
        GapAcceptanceParams(**kw)
