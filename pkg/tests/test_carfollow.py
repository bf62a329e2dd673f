import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roadbird import kernel
from roadbird.carfollow import (FollowState, GippsParams, advance, gipps_speed, hybrid_speed,
                                newtonian_speed, safe_gap)

from conftest import BACKENDS
from oracles import gipps as gipps_oracle


def state(pos=80.0, speed=10.0, vd=20.0, leader_pos=math.inf, leader_speed=0.0, leader_len=0.0, a=2.0, tau=1.0):
    return FollowState(pos, speed, a, vd, leader_pos, leader_speed, leader_len, tau)


P = GippsParams(1.7, -3.4, -3.0)


@pytest.mark.parametrize("leader_pos,expect", [(100.0, 15.0), (85.0, 0.0), (83.0, -2.0)])
def test_safe_gap(leader_pos, expect):
    assert safe_gap(state(leader_pos=leader_pos, leader_len=5.0)) == expect


def test_newtonian_examples():
    assert newtonian_speed(state(speed=10, a=2, vd=20, leader_pos=130, leader_len=0)) == 12.0
    assert newtonian_speed(state(pos=0, speed=15, leader_pos=10)) == 10.0
    assert newtonian_speed(state(pos=0, speed=15, leader_pos=0)) == 0.0


def test_gipps_free_flow_fixed_point():
    assert gipps_speed(state(speed=16.0, vd=16.0), P) == pytest.approx(16.0)


def test_gipps_standstill():
    assert gipps_speed(state(pos=0, speed=0.0, leader_pos=0.0, leader_speed=0.0), P) == 0.0


def test_gipps_golden_against_oracle():
    s = state(pos=0.0, speed=10.0, vd=16.67, leader_pos=20.0, leader_speed=8.0)
    got = gipps_speed(s, GippsParams(1.7, -3.4, -3.0))
    want = gipps_oracle(10.0, 16.67, 1.7, -3.4, -3.0, 1.0, 20.0, 8.0)
    assert got == pytest.approx(want, rel=1e-12)
    assert got == pytest.approx(10.2416, abs=1e-4)  # hand check: braking term binds


def test_gipps_negative_radicand_stops_and_logs(caplog):
    s = state(pos=0.0, speed=25.0, vd=30.0, leader_pos=-3.0, leader_speed=0.0)
    with caplog.at_level(logging.WARNING):
        assert gipps_speed(s, P) == 0.0
    assert "discriminant" in caplog.text


def test_hybrid_examples():
    far = state(pos=0.0, speed=11.0, vd=30.0, leader_pos=1e6, leader_speed=30.0)
    g = gipps_speed(far, GippsParams(0.5, -3.0, -3.0))
    assert hybrid_speed(far, GippsParams(0.5, -3.0, -3.0)) == g
    near = state(pos=0.0, speed=12.0, vd=30.0, leader_pos=5.0, leader_speed=12.0)
    assert gipps_speed(near, P) > 5.0
    assert hybrid_speed(near, P) == 5.0
    assert hybrid_speed(state(pos=0.0, speed=3.0, leader_pos=0.0), P) == 0.0


def test_advance_examples():
    assert advance(state(pos=80, speed=11, a=2.0), 12.0) == (92.0, 2.0)
    assert advance(state(pos=80, speed=0), 0.0)[0] == 80.0
    assert advance(state(speed=10), 8.0) == (88.0, -2.0)
    with pytest.raises(ValueError):
        advance(state(), -1.0)


@pytest.mark.parametrize("backend", BACKENDS)
def test_gipps_matches_oracle_on_random_draws(backend):
    k = kernel.get(backend)
    rng = np.random.default_rng(2024)
    checked = 0
    for _ in range(1000):
        vd = rng.uniform(2, 34)
        v = rng.uniform(0, vd)
        a = rng.uniform(0.3, 3)
        b = -rng.uniform(1, 5)
        bhat = -rng.uniform(1, 5)
        dx = rng.uniform(0, 120)
        vl = rng.uniform(0, 34)
        got, ok = k.gipps_speed(v, vd, a, b, bhat, 1.0, dx, vl)
        want = gipps_oracle(v, vd, a, b, bhat, 1.0, dx, vl)
        if want is None:
            assert (got, ok) == (0.0, 0)
            continue
        assert ok == 1
        assert got == pytest.approx(want, rel=1e-9, abs=1e-12)
        checked += 1
    assert checked > 900


def _drive(rule, steps, seed):
    """Subject follows a leader whose speed jumps at random; returns the minimum gap seen."""
    rng = np.random.default_rng(seed)
    lx, lv, llen = 30.0, 5.0, 4.5
    x, v = 0.0, 8.0
    vd = 15.0
    min_gap = math.inf
    for _ in range(steps):
        s = FollowState(x, v, 2.0, vd, lx, lv, llen, 1.0)
        nv = rule(s)
        assert 0.0 <= nv <= vd
        x, _ = advance(s, nv)
        v = nv
        # leader moves on from its start-of-step position
        lv = float(rng.choice([0.0, rng.uniform(0, 20)]))
        lx += lv
        min_gap = min(min_gap, lx - llen - x)
        assert nv >= 0 and x >= s.pos
    return min_gap


@pytest.mark.parametrize("name", ["newtonian", "hybrid"])
def test_no_overlap_under_random_leaders(name):
    rule = newtonian_speed if name == "newtonian" else (lambda s: hybrid_speed(s, P))
    assert _drive(rule, 10_000, seed=7) >= 0.0


def test_gipps_alone_can_overlap():
    # fast leader 5 m ahead: Gipps trusts its speed and covers more than the gap
    s = FollowState(0.0, 20.0, 2.0, 25.0, 9.0, 20.0, 4.0, 1.0)
    nv = gipps_speed(s, GippsParams(2.0, -3.0, -3.0))
    assert s.pos + nv * s.tau > s.leader_pos - s.leader_length


@settings(max_examples=300, deadline=None)
@given(v=st.floats(0, 40), vd=st.floats(1, 40), dx=st.floats(-5, 500), vl=st.floats(0, 40),
       a=st.floats(0.1, 4), b=st.floats(-6, -0.5), bhat=st.floats(-6, -0.5))
def test_speeds_within_bounds(v, vd, dx, vl, a, b, bhat):
    v = min(v, vd)
    s = FollowState(0.0, v, a, vd, dx, vl, 0.0, 1.0)
    p = GippsParams(a, b, bhat)
    for out in (newtonian_speed(s), gipps_speed(s, p), hybrid_speed(s, p)):
        assert 0.0 <= out <= vd
    if dx >= 0:
        assert hybrid_speed(s, p) * s.tau <= dx + 1e-12
        assert newtonian_speed(s) * s.tau <= dx + 1e-12
