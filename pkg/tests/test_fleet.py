import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats as sps

from roadbird.fleet import (DEFAULT_CLASSES, DEMAND_PRESETS, MIX_PRESETS, DemandProfile, FleetMix,
                            VehicleClass, generate_arrivals, occupied_strips, parse_class_table,
                            sample_class, sample_classes, sample_headway, uniform_open0)


def test_headway_examples():
    assert sample_headway(36, 1.0) == 0.0
    assert sample_headway(36, math.exp(-1)) == pytest.approx(36.0, rel=1e-15)
    assert sample_headway(36, 0.5) == pytest.approx(24.953, abs=5e-4)
    assert sample_headway(36, 0.5) == pytest.approx(36 * math.log(2), rel=1e-15)


@pytest.mark.parametrize("r", [0.0, -0.1, 1.0000001])
def test_headway_rejects_uniform_outside_open_interval(r):
    with pytest.raises(ValueError):
        sample_headway(36, r)


def test_uniform_open0_excludes_zero():
    class Stuck:
        def random(self):
            return 0.0
    assert uniform_open0(Stuck()) == 1.0


def test_headway_distribution_against_reference():
    rng = np.random.default_rng(11)
    x = np.array([sample_headway(36.0, uniform_open0(rng)) for _ in range(100_000)])
    assert abs(x.mean() - 36.0) / 36.0 < 0.01
    ref = np.random.default_rng(12345).exponential(36.0, 100_000)  # independent generator and method
    assert sps.ks_2samp(x, ref).pvalue > 0.05


def test_rickshaw_probability_from_table():
    mix = FleetMix(*MIX_PRESETS["dhaka"])
    assert mix.probability("rickshaw") == pytest.approx(0.4895, abs=1e-12)


def test_homogeneous_mix_draws_only_medium():
    mix = FleetMix(*MIX_PRESETS["homogeneous"])
    rng = np.random.default_rng(3)
    assert {sample_class(mix, rng).category for _ in range(5000)} == {"medium"}


def test_miami_fast_share_monte_carlo():
    mix = FleetMix(*MIX_PRESETS["miami"])
    idx = sample_classes(mix, np.random.default_rng(5), 1_000_000)
    fast = np.array([c.category == "fast" for c in mix.classes])
    assert abs(fast[idx].mean() - 0.16) <= 0.003


def test_vectorised_sampler_matches_scalar_sequence():
    mix = FleetMix(*MIX_PRESETS["dhaka"])
    rng = np.random.default_rng(9)
    scalar = [mix.classes.index(sample_class(mix, rng)) for _ in range(2000)]
    vec = sample_classes(mix, np.random.default_rng(9), 2000).tolist()
    assert scalar == vec


def test_mix_validation():
    with pytest.raises(ValueError, match="sum to 95"):
        FleetMix(50, 40, 5)
    bad = tuple(c if c.name != "van" else VehicleClass("van", "slow", 3.0, 3, 1.4, 8, 0.5, -1.5, -1.5)
                for c in DEFAULT_CLASSES)
    with pytest.raises(ValueError, match="slow modal shares"):
        FleetMix(55, 40, 5, bad)
    # a category with zero share needs no classes
    FleetMix(0, 100, 0, tuple(c for c in DEFAULT_CLASSES if c.category == "medium"))


@pytest.mark.parametrize("cat,speed", [("slow", 16), ("medium", 29), ("medium", 51), ("fast", 79), ("fast", 121)])
def test_speed_bands(cat, speed):
    with pytest.raises(ValueError, match="band"):
        VehicleClass("x", cat, 100, 3, 1, speed, 1, -2, -2)


def test_class_table_csv():
    text = ("name,category,share,length,width,max_speed,max_accel,desired_braking,expected_leader_braking\n"
            "cart,slow,100,3,1.5,6,0.4,-1,-1\n")
    (c,) = parse_class_table(text)
    assert c.name == "cart" and c.desired_speed == pytest.approx(6 / 3.6)


def test_arrivals_poisson_count():
    prof = DemandProfile("low", 100.0)
    rng = np.random.default_rng(21)
    counts = [len(generate_arrivals(prof, 1800.0, rng)) for _ in range(1000)]
    assert abs(np.mean(counts) - 50.0) / 50.0 < 0.05


def test_arrivals_strictly_increasing_and_bounded():
    rng = np.random.default_rng(2)
    t = generate_arrivals(DemandProfile("high", 800.0), 1800.0, rng)
    assert all(b > a for a, b in zip(t, t[1:])) and t[-1] < 1800.0 and t[0] >= 0


def test_arrivals_zero_horizon():
    assert generate_arrivals(DemandProfile("low", 100.0), 0.0, np.random.default_rng(1)) == []


def test_demand_presets():
    assert DemandProfile.from_type(2, "dhaka").mean_headway == pytest.approx(4.5)
    assert DEMAND_PRESETS["dhaka"] == (100.0, 400.0, 800.0)
    assert DEMAND_PRESETS["riyadh"] == (500.0, 1000.0, 2000.0)
    with pytest.raises(ValueError):
        DemandProfile("low", 0.0)


@pytest.mark.parametrize("vw,sw,n", [(1.8, 2.5, 1), (1.8, 0.5, 4), (0.5, 0.5, 1), (2.5, 2.5, 1), (2.5, 0.5, 5)])
def test_occupied_strips_examples(vw, sw, n):
    assert occupied_strips(vw, sw) == n


@given(st.floats(0.1, 3.0), st.floats(0.1, 3.0), st.floats(0.1, 3.0))
def test_occupied_strips_properties(vw, s1, s2):
    lo, hi = sorted((s1, s2))
    assert occupied_strips(vw, lo) >= occupied_strips(vw, hi) >= 1
    assert occupied_strips(vw, lo) * lo >= vw - 1e-6
