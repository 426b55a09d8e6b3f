"""Asymptotic far-field speed of the raceway versus wheel speed, and calibration of F.

    python scripts/calibrate_wheel.py                      # report speeds for the default F
    python scripts/calibrate_wheel.py --target 0.48 --fit  # secant search on F at omega = 0.85
"""
from __future__ import annotations

import argparse
import time

from raceway2d.config import load_config
from raceway2d.scenarios import far_field_speed


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--config", default="raceway-mixing")
    p.add_argument("--omegas", type=float, nargs="+", default=[0.5, 0.75, 0.85, 1.0])
    p.add_argument("--magnitude", type=float)
    p.add_argument("--spin", type=float, default=300.0)
    p.add_argument("--average", type=float, default=600.0)
    p.add_argument("--fit", action="store_true")
    p.add_argument("--target", type=float, default=0.48)
    args = p.parse_args()
    cfg = load_config(args.config)
    F = args.magnitude or cfg.wheel.magnitude
    if args.fit:
        # speed grows roughly linearly with F under linear bed friction
        for it in range(4):
            s, _ = far_field_speed(cfg, 0.85, F, args.spin, args.average)
            print(f"F = {F:.1f}: speed {s:.4f} m/s", flush=True)
            if abs(s - args.target) < 0.005:
                break
            F *= args.target / s
        print(f"calibrated F = {F:.1f}")
        return
    for om in args.omegas:
        t = time.time()
        s, samples = far_field_speed(cfg, om, F, args.spin, args.average)
        print(f"omega = {om:.3f} rad/s: mean speed {s:.4f} m/s "
              f"(min {samples.min():.3f}, max {samples.max():.3f}) [{time.time() - t:.0f} s]",
              flush=True)


if __name__ == "__main__":
    main()
