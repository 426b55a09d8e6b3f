"""Analytic steady state: solver error at one resolution and horizontal self-convergence.

    python scripts/analytic_channel.py                    # 300 x 20, 500 s, order 1
    python scripts/analytic_channel.py --study --layers 5 # 100/200/400 cells, both orders
"""
from __future__ import annotations

import argparse
from dataclasses import replace

import numpy as np

from raceway2d.config import load_config
from raceway2d.scenarios import run_simulation


def configured(cells, layers, order, duration):
    cfg = load_config("analytic-channel")
    cfg.grid = replace(cfg.grid, cells=cells, layers=layers)
    cfg.scheme = replace(cfg.scheme, order=order)
    cfg.run = replace(cfg.run, duration=duration)
    return cfg


def study(layers, duration, cells=(100, 200, 400)):
    for order in (1, 2):
        us = [run_simulation(configured(I, layers, order, duration)).state.u for I in cells]
        diffs = [np.sqrt(np.mean((us[k] - us[k + 1].reshape(layers, -1, 2).mean(-1)) ** 2))
                 for k in range(len(cells) - 1)]
        orders = np.log2(np.array(diffs[:-1]) / np.array(diffs[1:]))
        print(f"order {order}: successive differences {np.array2string(np.array(diffs), precision=3)}"
              f" observed order {np.array2string(orders, precision=2)}", flush=True)


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--cells", type=int, default=300)
    p.add_argument("--layers", type=int, default=20)
    p.add_argument("--order", type=int, default=1, choices=(1, 2))
    p.add_argument("--duration", type=float, default=500.0)
    p.add_argument("--study", action="store_true")
    args = p.parse_args()
    if args.study:
        study(args.layers, min(args.duration, 300.0))
        return
    res = run_simulation(configured(args.cells, args.layers, args.order, args.duration))
    for k, v in res.summary.items():
        print(f"{k}: {v:.6g}")


if __name__ == "__main__":
    main()
