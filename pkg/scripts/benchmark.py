"""Compare the compiled and pure-Python DEM force kernels.

Builds a dense synthetic bed (square lattice with slight overlap, bonds
everywhere, randomized velocities), evaluates the full force pass with
both backends, checks they agree, and reports timings.

Usage: python scripts/benchmark.py [--n-side 30] [--repeats 20]
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from granufrac import kernels
from granufrac.config import SimulationConfig, with_overrides
from granufrac.dem import DemEngine, WallSet


def build_engine(n_side: int, backend) -> DemEngine:
    cfg = SimulationConfig()
    r = cfg.particle_radius
    spacing = 1.98 * r          # 1% overlap: every neighbor is in contact
    xs = spacing * (0.5 + np.arange(n_side))
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    pos = np.column_stack((gx.ravel(), gy.ravel(),
                           np.full(n_side * n_side, r)))
    extent = (spacing * n_side, spacing * n_side, 2.0 * r)
    cfg = with_overrides(cfg, domain_extent=extent)
    engine = DemEngine(cfg, pos, walls=WallSet(extent), backend=backend)
    rng = np.random.default_rng(12345)
    engine.vel[:] = 0.01 * rng.standard_normal(engine.pos.shape)
    engine.omega[:] = 0.1 * rng.standard_normal(engine.pos.shape)
    engine.bond_touching(tolerance=0.05)
    return engine


def time_backend(engine: DemEngine, dt: float, repeats: int) -> float:
    engine.compute_forces(dt)                   # warm up, build neighbor list
    start = time.perf_counter()
    for _ in range(repeats):
        engine.compute_forces(dt)
    return (time.perf_counter() - start) / repeats


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-side", type=int, default=30,
                    help="particles per lattice side (default 30)")
    ap.add_argument("--repeats", type=int, default=20)
    args = ap.parse_args(argv)

    dt = 1.0e-5
    results = {}
    for name in ("python", "cython"):
        try:
            backend = kernels.get_backend(name)
        except ImportError as exc:
            print(f"{name:8s}  unavailable ({exc})")
            continue
        engine = build_engine(args.n_side, backend)
        elapsed = time_backend(engine, dt, args.repeats)
        results[name] = (elapsed, engine.force.copy())
        rate = engine.n / elapsed
        print(f"{name:8s}  {elapsed * 1e3:8.2f} ms/call  "
              f"{rate / 1e6:6.2f} Mparticle/s  (n={engine.n})")

    if len(results) == 2:
        fp, fc = results["python"][1], results["cython"][1]
        scale = np.abs(fp).max()
        err = np.abs(fp - fc).max() / scale if scale else 0.0
        speedup = results["python"][0] / results["cython"][0]
        print(f"speedup   {speedup:6.2f}x   max relative force "
              f"difference {err:.3e}")
        if err > 1.0e-10:
            print("FAIL: backends disagree beyond 1e-10", file=sys.stderr)
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
