"""Assemble solvers from a :class:`RunConfig` and drive complete runs."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import io
from .analytic import (AnalyticCase, layer_discharges, layer_mean_tracer, layer_reaction,
                       solve_surface_profile)
from .biology import SECONDS_PER_DAY, light_column, surface_light
from .config import RunConfig, dump_config
from .geometry import GridSpec, build_grid, gaussian_two_bump_bed
from .kinetic import BoundaryCondition, MultilayerSolver, SolverConfig
from .lagrangian import (ExposureStats, SnapshotSeries, advect_particles, light_exposure_stats,
                         seed_particles)
from .state import HydroState, density_of_tracer
from .transport import balance_transport, measure_transport, run_biology, spin_up

log = logging.getLogger(__name__)


def make_grid(cfg: RunConfig) -> GridSpec:
    topo = gaussian_two_bump_bed if cfg.grid.topography == "two_bump" else None
    return build_grid(cfg.grid.length, cfg.grid.cells, cfg.grid.layers,
                      cfg.grid.fractions, topo)


def analytic_case(cfg: RunConfig) -> AnalyticCase:
    a = cfg.analytic
    return AnalyticCase(alpha=a.alpha, beta=a.beta, H_ref=a.H_ref, x_ref=a.x_ref,
                        x_min=0.0, x_max=cfg.grid.length, g=cfg.physics.g)


@dataclass
class AnalyticSetup:
    case: AnalyticCase
    H: np.ndarray
    dHdx: np.ndarray
    H_in: float
    H_out: float
    u_ref: np.ndarray
    T_ref: np.ndarray
    reaction: np.ndarray


def analytic_setup(cfg: RunConfig, grid: GridSpec) -> AnalyticSetup:
    case = analytic_case(cfg)
    prof = solve_surface_profile(case, grid.cell_centers)
    ends = solve_surface_profile(case, [0.0, cfg.grid.length])
    cum = grid.cumulative_fractions
    h = grid.layer_fractions[:, None] * prof.H[None, :]
    return AnalyticSetup(case, prof.H, prof.dHdx, float(ends.H[0]), float(ends.H[1]),
                         layer_discharges(case, prof.H, cum) / h,
                         layer_mean_tracer(prof.H, cum),
                         layer_reaction(case, prof.H, prof.dHdx, cum))


def initial_state(cfg: RunConfig, grid: GridSpec, setup: AnalyticSetup | None = None) -> HydroState:
    N, I = grid.n_layers, grid.n_cells
    ini = cfg.initial
    if setup is not None:
        # at rest with a flat surface at the outflow level
        H = grid.topography[-1] + setup.H_out - grid.topography
        state = HydroState.at_rest(N, H, t=cfg.run.start_time)
        state.T = layer_mean_tracer(H, grid.cumulative_fractions)
        return state
    H = np.full(I, ini.H)
    C = None
    if cfg.biology_enabled:
        C2 = ini.C2 if ini.C2 is not None else ini.C1 * (ini.q0 if ini.q0 is not None else 0.0)
        C = np.array([ini.C1, C2, ini.C3])
    state = HydroState.at_rest(N, H, T=ini.T, C=C, t=cfg.run.start_time)
    u = np.asarray(ini.u, dtype=float)
    state.u = np.broadcast_to(u.reshape(-1, 1) if u.ndim else u, (N, I)).copy()
    return state


def make_solver(cfg: RunConfig, grid: GridSpec, setup: AnalyticSetup | None = None
                ) -> MultilayerSolver:
    sc = cfg.scheme
    config = SolverConfig(order=sc.order, cfl=sc.cfl, dt_max=sc.dt_max,
                          bio_stride=sc.bio_stride, biology=cfg.biology_enabled)
    if setup is None:
        left = BoundaryCondition(cfg.boundary.left) if cfg.boundary.left == "periodic" else None
        right = BoundaryCondition(cfg.boundary.right) if cfg.boundary.right == "periodic" else None
        if left is None or right is None:
            left, right = _open_boundaries(cfg, grid)
        return MultilayerSolver(grid, cfg.physics, cfg.wheel, cfg.biology, left, right, config)
    cum = grid.cumulative_fractions
    q_in = layer_discharges(setup.case, setup.H_in, cum)
    left = BoundaryCondition("imposed_discharge", discharge=q_in,
                             tracer=layer_mean_tracer(setup.H_in, cum))
    right = BoundaryCondition("imposed_height", height=setup.H_out)
    reaction = setup.reaction

    def source(t, h, T):
        return h * reaction * T

    return MultilayerSolver(grid, cfg.physics, cfg.wheel, cfg.biology, left, right, config,
                            tracer_source=source)


def _open_boundaries(cfg, grid):
    sides = []
    for kind in (cfg.boundary.left, cfg.boundary.right):
        if kind == "imposed_height":
            sides.append(BoundaryCondition(kind, height=cfg.initial.H))
        else:
            q = np.asarray(cfg.initial.u, dtype=float) * cfg.initial.H * grid.layer_fractions
            sides.append(BoundaryCondition(kind, discharge=q))
    return sides


# ---- diagnostics -----------------------------------------------------------
def column_light(cfg: RunConfig, grid: GridSpec, state: HydroState):
    h = grid.layer_fractions[:, None] * state.H[None, :]
    I0 = float(surface_light(state.t / SECONDS_PER_DAY, cfg.biology.I0_max))
    if cfg.biology_enabled and state.C.shape[0] >= 3:
        C2, gamma = state.C[1], cfg.biology.gamma
    else:
        C2, gamma = np.full_like(h, cfg.light.C2), cfg.light.gamma
    return light_column(C2, h, I0, gamma, cfg.biology.a, cfg.biology.b), I0


def domain_means(grid: GridSpec, state: HydroState, C=None):
    h = grid.layer_fractions[:, None] * state.H[None, :]
    vol = h * grid.dx[None, :]
    total = vol.sum()
    C = state.C if C is None else C
    mean_H = float(np.sum(state.H * grid.dx) / np.sum(grid.dx))
    speed = float(np.sum(vol * state.u) / total)
    if C.shape[0] >= 3:
        m = [float(np.sum(vol * C[k]) / total) for k in range(3)]
        q = m[1] / m[0] if m[0] > 0 else 0.0
    else:
        m, q = [0.0, 0.0, 0.0], 0.0
    return [state.t, mean_H, speed, *m, q]


def write_state_snapshot(cfg, grid, state, directory, C=None):
    C = state.C if C is None else C
    light, I0 = column_light(cfg, grid, replace(state, C=C))
    io.write_snapshot(Path(directory) / io.snapshot_filename(state.t), state.t,
                      grid.cell_centers, grid.topography, state.H, grid.layer_fractions,
                      state.u, state.w, state.T, density_of_tracer(state.T, cfg.physics),
                      C, light, I0)


def far_field_speed(cfg: RunConfig, omega: float, magnitude: float | None = None,
                    spin: float = 300.0, average: float = 600.0, x_window=(12.0, 18.0), sample_every: float = 1.0):
    """Time-averaged cross-section mean speed away from the wheel."""
    wheel = replace(cfg.wheel, omega=omega, enabled=True,
                    magnitude=cfg.wheel.magnitude if magnitude is None else magnitude)
    cfg = replace(cfg, wheel=wheel, biology_enabled=False)
    grid = make_grid(cfg)
    solver = make_solver(cfg, grid)
    state = initial_state(cfg, grid)
    far = (grid.cell_centers >= x_window[0]) & (grid.cell_centers <= x_window[1])
    frac = grid.layer_fractions[:, None]
    samples = []
    t0 = state.t
    next_sample = t0 + spin
    while state.t < t0 + spin + average - 1e-9:
        state, _ = solver.step(state, dt_cap=max(next_sample - state.t, 1e-9)
                               if state.t < next_sample else None)
        if state.t >= next_sample - 1e-9:
            q = (frac * state.H[None, :] * state.u).sum(axis=0)
            samples.append(np.mean(q[far] / state.H[far]))
            next_sample += sample_every
    samples = np.array(samples)
    return float(samples.mean()), samples


@dataclass
class RunResult:
    state: HydroState
    output_dir: Path | None
    summary: dict = field(default_factory=dict)


def run_simulation(cfg: RunConfig, output_dir=None) -> RunResult:
    """Run a configured scenario, writing outputs when ``output_dir`` is given."""
    grid = make_grid(cfg)
    setup = analytic_setup(cfg, grid) if cfg.scenario == "analytic" else None
    solver = make_solver(cfg, grid, setup)
    state = initial_state(cfg, grid, setup)
    out = None
    if output_dir is not None:
        out = Path(output_dir)
        (out / "snapshots").mkdir(parents=True, exist_ok=True)
        dump_config(cfg, out / "resolved_config.yaml")
    if cfg.run.method == "transport_operator":
        result = _run_long(cfg, grid, solver, state, out)
    else:
        result = _run_direct(cfg, grid, solver, state, out)
    if setup is not None:
        s = result.state
        result.summary["error_u"] = float(np.linalg.norm(s.u - setup.u_ref)
                                          / np.linalg.norm(setup.u_ref))
        result.summary["error_T"] = float(np.linalg.norm(s.T - setup.T_ref)
                                          / np.linalg.norm(setup.T_ref))
        result.summary["error_H_max"] = float(np.max(np.abs(s.H - setup.H)))
    return result


def _run_direct(cfg, grid, solver, state, out) -> RunResult:
    t_end = state.t + cfg.run.duration
    snaps = out / "snapshots" if out is not None else None
    writer = io.TimeSeriesWriter(out / "timeseries.csv") if out is not None else None
    next_ts = state.t
    next_snap = state.t + cfg.output.snapshot_start
    interval = cfg.output.snapshot_interval

    def emit(s, force=False):
        nonlocal next_ts, next_snap
        if writer is not None and (s.t >= next_ts - 1e-9 or force):
            writer.write(domain_means(grid, s))
            next_ts += cfg.output.timeseries_interval
            while next_ts <= s.t:
                next_ts += cfg.output.timeseries_interval
        if snaps is not None and interval > 0 and s.t >= next_snap - 1e-9:
            write_state_snapshot(cfg, grid, s, snaps)
            next_snap += interval
            while next_snap <= s.t:
                next_snap += interval

    emit(state)
    if snaps is not None and interval <= 0:
        write_state_snapshot(cfg, grid, state, snaps)

    def callback(s, info):
        emit(s)

    try:
        while state.t < t_end - 1e-12:
            cap = t_end - state.t
            if snaps is not None and interval > 0:
                cap = min(cap, max(next_snap - state.t, 1e-9))
            state, info = solver.step(state, dt_cap=cap)
            callback(state, info)
    finally:
        if writer is not None:
            if cfg.run.duration > 0:
                writer.write(domain_means(grid, state))
            writer.close()
    if snaps is not None and interval <= 0 and cfg.run.duration > 0:
        write_state_snapshot(cfg, grid, state, snaps)
    summary = {"steps": solver.steps, "final_time": state.t,
               "mean_speed": domain_means(grid, state)[2]}
    return RunResult(state, out, summary)


# transport operators depend only on the hydrodynamics, so runs that differ in
# their biology (the still/agitated preset pairs) share one measurement
_OPERATORS: dict = {}


def _hydro_key(cfg: RunConfig) -> str:
    ini = cfg.initial
    return repr((cfg.grid, cfg.physics, cfg.wheel, cfg.scheme, cfg.boundary, ini.H, ini.u,
                 ini.T, cfg.run.start_time, cfg.run.long_run.spin_up,
                 cfg.run.long_run.window_periods, cfg.run.long_run.reaction_dt))


def _transport_operator(cfg, grid, solver, state):
    """(A, window, state after spin-up) for the transport-operator method."""
    lr = cfg.run.long_run
    key = _hydro_key(cfg)
    if key in _OPERATORS:
        return _OPERATORS[key]
    if cfg.wheel.enabled or np.any(state.u != 0):
        state = spin_up(solver, state, lr.spin_up)
        period = cfg.wheel.period if cfg.wheel.enabled else lr.reaction_dt
        window = lr.window_periods * period
        A, _ = measure_transport(solver, state, window)
    else:
        window = lr.window_periods * lr.reaction_dt
        A = np.eye(grid.n_cells * grid.n_layers)
    h = grid.layer_fractions[:, None] * state.H[None, :]
    A = balance_transport(A, h * grid.dx[None, :])
    hydro = replace(state, C=np.zeros((0,) + h.shape))
    _OPERATORS[key] = (A, window, hydro)
    return _OPERATORS[key]


def _run_long(cfg, grid, solver, state, out) -> RunResult:
    lr = cfg.run.long_run
    bio_C = state.C.copy()
    A, window, state = _transport_operator(cfg, grid, solver, state)
    h = grid.layer_fractions[:, None] * state.H[None, :]
    hydro_row = domain_means(grid, state, np.zeros((0,) + h.shape))
    t0 = cfg.run.start_time
    res = run_biology(A, bio_C, h, cfg.run.duration, window, cfg.biology, lr.reaction_dt,
                      t0=t0, record_every=cfg.output.timeseries_interval)
    if out is not None:
        with io.TimeSeriesWriter(out / "timeseries.csv") as w:
            for t, m in zip(res.times, res.mean_C):
                q = m[1] / m[0] if m[0] > 0 else 0.0
                w.write([t, hydro_row[1], hydro_row[2], *m, q])
        final = replace(state, t=float(res.times[-1]), C=res.C)
        write_state_snapshot(cfg, grid, final, out / "snapshots")
    m = res.mean_C[-1]
    summary = {"final_C1": float(m[0]), "final_C2": float(m[1]), "final_C3": float(m[2]),
               "final_q": float(m[1] / m[0]) if m[0] > 0 else 0.0,
               "mean_speed": hydro_row[2], "window": window}
    return RunResult(replace(state, C=res.C, t=float(res.times[-1])), out, summary)


def run_particles(cfg: RunConfig, snapshot_dir, output_dir=None) -> tuple[ExposureStats, object]:
    """Track particles through stored snapshots and summarise their light history."""
    grid = make_grid(cfg)
    series = SnapshotSeries(io.load_snapshots(snapshot_dir))
    pc = cfg.particles
    periodic = cfg.boundary.left == "periodic"
    first = series.snapshots[0]
    parts = seed_particles(grid, first.H, pc.x0, pc.count, pc.seed)
    dt = min(pc.dt, float(np.min(np.diff(series.times)))) if len(series.times) > 1 else pc.dt
    advect_particles(parts, series, grid, dt, periodic=periodic, record_every=pc.record_every)
    times, x, z, light, I0 = parts.traces()
    stats = light_exposure_stats(light, I0, pc.threshold)
    if output_dir is not None:
        out = Path(output_dir)
        io.write_traces(out / "traces", times, x, z, light, I0)
        io.write_stats(out / "stats.csv", stats)
    return stats, parts
