import csv
import logging

import pytest
from click.testing import CliRunner
from hypothesis import given, settings
from hypothesis import strategies as st

from roadbird.batch import average, emit_reports, parse_batch_spec, run_batch
from roadbird.cli import main
from roadbird.config import (KEYS, ConfigError, RunConfig, bundled_topologies, parse_parameters, resolve_topology,
                             serialize_parameters)


# -- parameter files -------------------------------------------------------------------

def test_parse_demand_and_modes():
    cfg = parse_parameters("DemandType=2\nStripWidth=0.5\nPedestrianMode=on")
    assert cfg.demand_level == "high" and cfg.strip_width == 0.5 and cfg.pedestrian_mode
    assert cfg.rate == 800.0


def test_parse_dhaka_mix():
    cfg = parse_parameters("SlowVehicle=55\nMediumVehicle=40\nFastVehicle=5")
    assert (cfg.slow, cfg.medium, cfg.fast) == (55.0, 40.0, 5.0)
    assert cfg.mix_label == "dhaka"
    assert cfg.fleet_mix().probability("rickshaw") == pytest.approx(0.4895)


def test_shares_must_sum_to_100():
    with pytest.raises(ConfigError, match="95"):
        parse_parameters("SlowVehicle=50\nMediumVehicle=40\nFastVehicle=5")


def test_unknown_key_warns(caplog):
    with caplog.at_level(logging.WARNING):
        cfg = parse_parameters("# comment\nDemandType=0\nColour=blue  # trailing\n")
    assert "Colour" in caplog.text and "line 3" in caplog.text
    assert cfg.demand_type == 0


@pytest.mark.parametrize("text,key", [("StripWidth=wide", "StripWidth"), ("PedestrianMode=maybe", "PedestrianMode"),
                                      ("CarFollowingModel=idm", "CarFollowingModel"), ("DemandType=1.5", "DemandType")])
def test_invalid_value_names_key(text, key):
    with pytest.raises(ConfigError, match=key):
        parse_parameters(text)


@pytest.mark.parametrize("text", ["StripWidth=0", "Duration=-5", "DemandType=3", "junk line"])
def test_invalid_configs(text):
    with pytest.raises(ConfigError):
        parse_parameters(text)


def test_profiles_bind_rates():
    assert parse_parameters("Profile=riyadh\nDemandType=2").rate == 2000.0
    assert parse_parameters("Profile=miami\nDemandType=0").rate == 500.0
    assert parse_parameters("GenerationRate=123\nDemandType=0").rate == 123.0


def test_round_trip_is_idempotent():
    cfg = parse_parameters("DemandType=2\nStripWidth=2.5\nPedestrianMode=on\nLambda=0.7\nSeed=4\n")
    text = serialize_parameters(cfg)
    assert parse_parameters(text) == cfg
    assert serialize_parameters(parse_parameters(text)) == text
    assert {line.split("=")[0] for line in text.splitlines()} == set(KEYS)


@settings(max_examples=50, deadline=None)
@given(sw=st.floats(0.05, 5.0), slow=st.integers(0, 100), dt=st.integers(0, 2), ped=st.booleans(),
       lam=st.floats(0.01, 10.0), seed=st.integers(0, 10**6))
def test_round_trip_property(sw, slow, dt, ped, lam, seed):
    cfg = RunConfig(strip_width=sw, slow=float(slow), medium=float(100 - slow), fast=0.0, demand_type=dt,
                    pedestrian_mode=ped, gap_lambda=lam, seed=seed)
    text = serialize_parameters(cfg)
    assert parse_parameters(text) == cfg
    assert serialize_parameters(parse_parameters(text)) == text


def test_bundled_topologies():
    assert {"dhaka-like", "medium", "riyadh-like"} <= set(bundled_topologies())
    assert resolve_topology("dhaka-like").is_dir()
    with pytest.raises(ConfigError):
        resolve_topology("atlantis")


# -- batches ---------------------------------------------------------------------------

def test_batch_spec_cross_product():
    spec = parse_batch_spec("Seeds=1-3,7\nSweep.StripWidth=0.5,2.5\nSweep.DemandType=0,2\n"
                            "Sweep.Mix=dhaka,homogeneous\nSweep.PedestrianMode=on\n")
    assert spec.seeds == (1, 2, 3, 7)
    pts = spec.points()
    assert len(pts) == 8
    assert {(p.strip_width, p.demand_type, p.medium) for p in pts} == {
        (sw, dt, m) for sw in (0.5, 2.5) for dt in (0, 2) for m in (40.0, 100.0)}
    assert all(p.pedestrian_mode for p in pts)


def test_batch_spec_errors():
    with pytest.raises(ConfigError):
        parse_batch_spec("Seeds=\n")
    with pytest.raises(ConfigError):
        parse_batch_spec("Sweep.Colour=red\n")
    with pytest.raises(ConfigError):
        parse_batch_spec("Sweep.Mix=1/2\n")


def test_average_excludes_nulls():
    a = average([10.0, None, 20.0])
    assert (a.mean, a.n) == (15.0, 2)
    assert a.stderr == pytest.approx(5.0)
    assert average([None]).mean is None
    single = average([4.0])
    assert (single.mean, single.stderr) == (4.0, None)


def test_single_seed_average_equals_run():
    spec = parse_batch_spec("Seeds=3\nDuration=300\nDemandType=2\n")
    (point,) = run_batch(spec, record_events=False)
    run = point.runs[0].report.summary()
    avgs = point.averages()
    assert all(avgs[k].mean == run[k] for k in run)


def test_failed_point_recorded_others_proceed(tmp_path):
    spec = parse_batch_spec("Seeds=1\nDuration=60\nSweep.StripWidth=0.5,50\n")
    results = run_batch(spec, record_events=False)
    assert results[0].error is None and results[1].error is not None
    emit_reports(results, tmp_path)
    rows = list(csv.DictReader(open(tmp_path / "comparison.csv")))
    bad = [r for r in rows if r["strip_width"] == "50.0"]
    assert len(bad) == 4 and all(r["mean"] == "" and r["error"] for r in bad)


# -- command line -------------------------------------------------------------------------

def test_cli_run_reproducible(tmp_path):
    params = tmp_path / "p.txt"
    params.write_text("DemandType=2\nPedestrianMode=on\nDuration=300\n")
    runner = CliRunner()
    outs = []
    for k in range(2):
        out = tmp_path / f"out{k}"
        res = runner.invoke(main, ["run", "--params", str(params), "--seed", "5", "--out", str(out)])
        assert res.exit_code == 0, res.output
        assert "avg_link_speed_kmh=" in res.output
        outs.append(out)
    for name in ("link_metrics.csv", "vehicle_metrics.csv", "summary.csv", "events.log", "params.txt"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    assert "Seed=5" in (outs[0] / "params.txt").read_text()


def test_cli_run_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("SlowVehicle=50\n")
    res = CliRunner().invoke(main, ["run", "--params", str(bad), "--out", str(tmp_path / "o")])
    assert res.exit_code != 0 and "100" in res.output
    res = CliRunner().invoke(main, ["run", "--topology", "atlantis", "--out", str(tmp_path / "o")])
    assert res.exit_code != 0


def test_cli_empty_run_writes_empty_fields(tmp_path):
    out = tmp_path / "o"
    res = CliRunner().invoke(main, ["run", "--duration", "3", "--out", str(out)])
    assert res.exit_code == 0, res.output
    rows = list(csv.DictReader(open(out / "link_metrics.csv")))
    assert rows and all(r["avg_speed_kmh"] == "" and r["avg_wait_s"] == "" for r in rows)
    assert all(r["flow_vph"] == "0.0" for r in rows)


def test_cli_batch(tmp_path):
    spec = tmp_path / "spec.txt"
    spec.write_text("Seeds=1-2\nDuration=120\nSweep.StripWidth=2.5,0.5\n")
    runner = CliRunner()
    res1 = runner.invoke(main, ["batch", "--spec", str(spec), "--out", str(tmp_path / "a")])
    res2 = runner.invoke(main, ["batch", "--spec", str(spec), "--out", str(tmp_path / "b"), "--workers", "2"])
    assert res1.exit_code == 0 and res2.exit_code == 0, res1.output + res2.output
    a = (tmp_path / "a" / "comparison.csv").read_text()
    assert a == (tmp_path / "b" / "comparison.csv").read_text()
    rows = list(csv.DictReader(a.splitlines()))
    assert len(rows) == 8  # two points x four metrics
    assert [r["strip_width"] for r in rows] == ["0.5"] * 4 + ["2.5"] * 4
    assert [r["metric"] for r in rows[:4]] == sorted(r["metric"] for r in rows[:4])
    assert all(r["n_seeds"] in ("2", "0", "1") for r in rows)
    point_dir = tmp_path / "a" / "sw0.5_medium_dhaka_pedoff"
    summary = list(csv.reader(open(point_dir / "summary.csv")))
    assert [r[0] for r in summary[1:]] == ["1", "2", "mean"]
    assert (point_dir / "seed_1" / "events.log").exists()


def test_cli_validate(tmp_path):
    obs = tmp_path / "obs.csv"
    sim = tmp_path / "sim.csv"
    obs.write_text("route,direction,vehicle_type,regime,value_min\n"
                   "A,N,car,low,10\nA,N,car,low,12\nA,N,car,low,11\nA,N,car,high,20\nA,N,car,high,24\n")
    sim.write_text("route,direction,vehicle_type,regime,value_min\n"
                   "A,N,car,low,11\nA,N,car,low,13\nA,N,car,high,22\nA,N,car,high,21\nB,S,bus,low,5\n")
    out = tmp_path / "v"
    res = CliRunner().invoke(main, ["validate", "--observed", str(obs), "--simulated", str(sim), "--out", str(out)])
    assert res.exit_code == 0, res.output
    rows = list(csv.DictReader(open(out / "validation.csv")))
    assert [(r["route"], r["regime"]) for r in rows] == [("A", "low"), ("A", "high")]
    assert float(rows[0]["ME"]) == pytest.approx(1.0)  # sim mean 12 vs obs 10, 12, 11


def test_cli_validate_no_overlap(tmp_path):
    f = tmp_path / "x.csv"
    f.write_text("route,direction,vehicle_type,regime,value_min\nA,N,car,low,10\n")
    g = tmp_path / "y.csv"
    g.write_text("route,direction,vehicle_type,regime,value_min\nB,N,car,low,10\n")
    res = CliRunner().invoke(main, ["validate", "--observed", str(f), "--simulated", str(g), "--out", str(tmp_path)])
    assert res.exit_code == 2
