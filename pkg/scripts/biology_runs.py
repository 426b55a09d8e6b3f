"""Run the six 20-day biology presets and compare final biomass with reference values.

    python scripts/biology_runs.py [--cells 100 --layers 10] [-o outdir]
"""
from __future__ import annotations

import argparse
import time
from dataclasses import replace

from raceway2d.config import load_config
from raceway2d.scenarios import run_simulation

REFERENCE_C1 = {1: 60.0, 2: 74.0, 3: 79.0, 4: 103.0, 5: 100.0, 6: 129.0}


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--cells", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("-o", "--output")
    args = p.parse_args()
    print(f"{'simu':>4} {'C1':>8} {'ref':>6} {'dev':>7} {'C3':>7} {'q':>6} {'time':>6}")
    for n, ref in REFERENCE_C1.items():
        cfg = load_config(f"raceway-bio-simu{n}")
        cfg.grid = replace(cfg.grid, cells=args.cells or cfg.grid.cells,
                           layers=args.layers or cfg.grid.layers)
        t = time.time()
        res = run_simulation(cfg, f"{args.output}/simu{n}" if args.output else None)
        s = res.summary
        print(f"{n:>4} {s['final_C1']:8.1f} {ref:6.0f} {s['final_C1'] / ref - 1:+7.1%} "
              f"{s['final_C3']:7.3f} {s['final_q']:6.3f} {time.time() - t:5.0f}s", flush=True)


if __name__ == "__main__":
    main()
