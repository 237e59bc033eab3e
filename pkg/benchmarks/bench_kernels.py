"""Compare the compiled and numpy Monte Carlo kernels.

Runs the follower system of the scalar toy and the stacked closed loop of
its leader variant with both backends on the same increments, checks that
the per-path costs agree and prints paths per second.

    python3 benchmarks/bench_kernels.py --paths 20000
"""
import argparse
import time

import numpy as np

from elephantlq.adjoint import solve_eta1
from elephantlq.config import ToyScenario
from elephantlq.feedback import follower_gains
from elephantlq.gamma_lambda import ThetaPolicy
from elephantlq.kernels import available_backends
from elephantlq.pipeline import solve_leader
from elephantlq.riccati import solve_riccati
from elephantlq.simulate import closed_loop_system, follower_system, run_systems


def systems(dt):
    toy = ToyScenario()
    co = toy.build(dt)
    ric = solve_riccati(co)
    eta = solve_eta1(co, ric, 1.0)
    follower = follower_system(co, follower_gains(co, ric), eta, 1.0)
    lco = toy.leader_mode().build(dt)
    lead = solve_leader(lco, ThetaPolicy("full"))
    closed = closed_loop_system(lco, lead.blocks, lead.gains())
    return {"follower (1 state)": follower, "closed loop (2 states)": closed}


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--paths", type=int, default=20000)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=42)
    args = p.parse_args()
    backends = available_backends()
    print(f"backends: {', '.join(backends)}; {args.paths} paths, dt={args.dt:g}")
    for name, sysm in systems(args.dt).items():
        out = {}
        for be in backends:
            t0 = time.perf_counter()
            (res,), _ = run_systems([sysm], args.paths, args.seed, backend=be)
            el = time.perf_counter() - t0
            out[be] = (res, el)
            print(f"  {name:24s} {be:9s} {el:7.2f} s  {args.paths / el:10.0f} paths/s")
        if len(out) == 2:
            a, b = out["compiled"][0].costs, out["python"][0].costs
            gap = float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))
            speed = out["python"][1] / out["compiled"][1]
            print(f"  {'':24s} speed-up {speed:.1f}x, max relative cost gap {gap:.2e}")


if __name__ == "__main__":
    main()
