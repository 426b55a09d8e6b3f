"""Light statistics of particles in the mixed raceway for several wheel speeds.

    python scripts/lagrangian_stats.py --omegas 0.5 0.85 1.0 -o mixing_runs
"""
from __future__ import annotations

import argparse
from dataclasses import replace
from pathlib import Path

import numpy as np

from raceway2d.config import load_config
from raceway2d.scenarios import run_particles, run_simulation


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--omegas", type=float, nargs="+", default=[0.5, 0.75, 0.85, 1.0])
    p.add_argument("--spin", type=float, default=0.0, help="seconds before tracking starts")
    p.add_argument("--track", type=float, default=3600.0, help="tracking window, seconds")
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output", default="mixing_runs")
    args = p.parse_args()
    for om in args.omegas:
        cfg = load_config("raceway-mixing")
        cfg.wheel = replace(cfg.wheel, omega=om)
        cfg.run = replace(cfg.run, duration=args.spin + args.track)
        cfg.output = replace(cfg.output, snapshot_start=args.spin)
        cfg.particles = replace(cfg.particles, seed=args.seed)
        out = Path(args.output) / f"omega{om}"
        run_simulation(cfg, out)
        stats, _ = run_particles(cfg, out / "snapshots", out / "particles")
        print(f"omega {om}: mean high fraction {np.mean(stats.fraction_high):.3f}, "
              f"never high {stats.never_high}, mean switches {np.mean(stats.switches):.2f}",
              flush=True)


if __name__ == "__main__":
    main()
