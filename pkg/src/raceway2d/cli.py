"""Command line entry point: run, validate-analytic, particles, stats."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .analytic import AnalyticBreakdown, layer_discharges, residual_orders, solve_surface_profile, surface_profile_ode
from .config import ConfigError, load_config
from .kinetic import SolverFailure
from .lagrangian import light_exposure_stats
from .scenarios import analytic_case, run_particles, run_simulation

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2


def _overrides(cfg, args):
    if getattr(args, "duration", None) is not None:
        cfg.run = replace(cfg.run, duration=args.duration)
    if getattr(args, "order", None) is not None:
        cfg.scheme = replace(cfg.scheme, order=args.order)
    if getattr(args, "omega", None) is not None:
        cfg.wheel = replace(cfg.wheel, omega=args.omega)
    if getattr(args, "seed", None) is not None:
        cfg.particles = replace(cfg.particles, seed=args.seed)
    return cfg


def cmd_run(args) -> int:
    cfg = _overrides(load_config(args.config), args)
    out = Path(args.output or cfg.output.directory)
    result = run_simulation(cfg, out)
    _print_summary(result.summary)
    print(f"outputs written to {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    case = analytic_case(cfg)
    x = np.linspace(0.0, cfg.grid.length, 401)
    try:
        prof = solve_surface_profile(case, x)
    except AnalyticBreakdown as exc:
        print(f"analytic case breaks down: {exc}")
        return EXIT_CONFIG
    ode = surface_profile_ode(case, x)
    q = layer_discharges(case, prof.H[0], np.linspace(0, 1, cfg.grid.layers + 1))
    print(f"surface height range: [{prof.H.min():.6f}, {prof.H.max():.6f}] m")
    print(f"root-find vs ODE max difference: {np.max(np.abs(prof.H - ode)):.3e} m")
    print(f"inflow discharge sum: {float(q.sum())!r} (alpha = {float(case.alpha)!r})")
    ok = True
    for key, (orders, norms) in residual_orders(case).items():
        good = bool(np.all(orders >= 1.8) or np.all(norms < 1e-12))
        ok &= good
        print(f"residual {key}: norms {np.array2string(norms, precision=3)} "
              f"orders {np.array2string(orders, precision=2)} {'ok' if good else 'FAIL'}")
    if args.run:
        res = run_simulation(_overrides(cfg, args), args.output)
        _print_summary(res.summary)
    return EXIT_OK if ok else EXIT_SOLVER


def cmd_particles(args) -> int:
    cfg = _overrides(load_config(args.config), args)
    out = Path(args.output or Path(args.snapshots).parent / "particles")
    stats, parts = run_particles(cfg, args.snapshots, out)
    _print_stats(stats)
    print(f"clamped positions: {parts.clamped}")
    print(f"traces written to {out}")
    return EXIT_OK


def cmd_stats(args) -> int:
    times, light, I0 = io.read_traces(args.trace_dir)
    stats = light_exposure_stats(light, I0, args.threshold)
    _print_stats(stats)
    return EXIT_OK


def _print_summary(summary):
    for k, v in summary.items():
        print(f"{k}: {float(v)!r}" if isinstance(v, (float, np.floating)) else f"{k}: {v}")


def _print_stats(stats):
    if not stats.defined:
        print("no daylight samples: statistics undefined")
        return
    print(f"particles: {stats.fraction_high.size}")
    print(f"mean high-light fraction: {np.mean(stats.fraction_high):.4f}")
    print(f"never highly lit: {stats.never_high}")
    print(f"mean low->high switches: {np.mean(stats.switches):.2f}")
    print("histogram (5% classes): " + " ".join(str(int(c)) for c in stats.histogram))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="raceway2d", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="YAML config file or preset name")
        sp.add_argument("--duration", type=float)
        sp.add_argument("--order", type=int, choices=(1, 2))
        sp.add_argument("--omega", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("-o", "--output")

    r = sub.add_parser("run", help="run a scenario")
    common(r)
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate-analytic", help="check the analytic steady state")
    common(v)
    v.add_argument("--run", action="store_true", help="also run the solver and report errors")
    v.set_defaults(func=cmd_validate)
    pt = sub.add_parser("particles", help="track particles through stored snapshots")
    common(pt)
    pt.add_argument("snapshots")
    pt.set_defaults(func=cmd_particles)
    s = sub.add_parser("stats", help="light statistics from particle traces")
    s.add_argument("trace_dir")
    s.add_argument("--threshold", type=float, default=0.5)
    s.set_defaults(func=cmd_stats)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ConfigError, AnalyticBreakdown) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
