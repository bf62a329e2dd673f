"""Compare the compiled and pure-Python simulation kernels.

Runs the same seeded dhaka-like scenario on each available backend, checks
that the event logs agree, and reports wall time per simulated step.

    python3 benchmarks/bench_kernel.py --duration 300 --demand 2
"""

import argparse
import time

import numpy as np

from roadbird import kernel
from roadbird.config import RunConfig, resolve_topology
from roadbird.engine import Simulation
from roadbird.network import build_network, load_topology


def simulate(cfg: RunConfig, backend: str) -> tuple[float, str, int]:
    net = build_network(load_topology(resolve_topology(cfg.topology)), cfg.strip_width)
    sim = Simulation(net, cfg.fleet_mix(), cfg.rate, cfg.model_params(), seed=cfg.seed, backend=backend)
    t0 = time.perf_counter()
    sim.run(cfg.duration)
    return time.perf_counter() - t0, sim.event_log(), sim.counters.generated


def scalar_gipps(backend: str, n: int) -> float:
    k = kernel.get(backend)
    rng = np.random.default_rng(0)
    args = rng.uniform([0, 10, 0.5, -5, -5, 0, 0], [10, 30, 3, -1, -1, 80, 30], size=(n, 7)).tolist()
    t0 = time.perf_counter()
    for v, vd, a, b, bh, dx, vl in args:
        k.gipps_speed(v, vd, a, b, bh, 1.0, dx, vl)
    return time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--duration", type=float, default=300.0)
    ap.add_argument("--demand", type=int, default=2, choices=(0, 1, 2))
    ap.add_argument("--strip-width", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--scalar-calls", type=int, default=200_000)
    args = ap.parse_args()

    cfg = RunConfig(demand_type=args.demand, strip_width=args.strip_width, pedestrian_mode=True,
                    duration=args.duration, seed=args.seed)
    backends = kernel.available()
    print(f"backends: {', '.join(backends)}; {cfg.duration:g} s at {cfg.demand_level} demand, "
          f"strip {cfg.strip_width:g} m")
    logs = {}
    times = {}
    for b in backends:
        dt, log, gen = simulate(cfg, b)
        logs[b], times[b] = log, dt
        steps = int(round(cfg.duration / cfg.tau))
        print(f"  {b:8s} run    {dt:8.3f} s  ({dt / steps * 1e3:.3f} ms/step, {gen} vehicles)")
    for b in backends:
        dt = scalar_gipps(b, args.scalar_calls)
        print(f"  {b:8s} gipps  {dt:8.3f} s  ({dt / args.scalar_calls * 1e9:.0f} ns/call)")
    if len(backends) > 1:
        same = len({logs[b] for b in backends}) == 1
        print(f"event logs identical: {same}")
        print(f"run speed-up: {times['python'] / times['cython']:.1f}x")


if __name__ == "__main__":
    main()
