"""Transport operators for multi-day biology runs.

Hydrodynamic time steps are a fraction of a second while the biology evolves
over days.  Once the flow has settled into its forced periodic regime, the
transport of a passive concentration over a window of whole wheel periods
is a fixed linear map.  It is measured once by pushing one unit tracer per
(layer, cell) through the real solver, then applied repeatedly and
alternated with reaction substeps.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .biology import BioParams, light_column, react, surface_light, SECONDS_PER_DAY
from .kinetic import MultilayerSolver, SolverConfig
from .state import HydroState

log = logging.getLogger(__name__)


def measure_transport(solver: MultilayerSolver, state: HydroState, window: float):
    """Concentration map over ``window`` seconds starting from ``state``.

    Returns ``(A, end_state)`` with ``A[j, k]`` the concentration in
    layer-cell j at the end for a unit concentration in k at the start
    (flattened in (layer, cell) order).
    """
    N, I = state.u.shape
    n = N * I
    probe = state.copy()
    probe.C = np.eye(n).reshape(n, N, I)
    cfg = solver.config
    solver.config = replace(cfg, biology=False, reconstruct_w=False)
    try:
        end = solver.run(probe, state.t + window)
    finally:
        solver.config = cfg
    A = end.C.reshape(n, n).T.copy()
    end.C = state.C.copy()
    return A, end


def balance_transport(A, volumes, iterations: int = 500, tol: float = 1e-14):
    """Rescale A so constants stay constant and volume-weighted totals are kept.

    Alternating row/column scaling (Sinkhorn) towards A 1 = 1 and
    v^T A = v^T for the reference volumes v.
    """
    A = np.array(A, dtype=float)
    v = np.asarray(volumes, dtype=float).ravel()
    for _ in range(iterations):
        rows = A.sum(axis=1)
        A /= rows[:, None]
        cols = (v @ A) / v
        A /= cols[None, :]
        if max(abs(rows - 1).max(), abs(cols - 1).max()) < tol:
            break
    return A


@dataclass
class LongRunResult:
    times: np.ndarray        # seconds
    mean_C: np.ndarray       # (T, 3) volume-weighted means
    C: np.ndarray            # final (3, N, I)
    h: np.ndarray            # reference thicknesses (N, I)


def run_biology(A, C0, h, duration: float, window: float, bio: BioParams,
                reaction_dt: float, t0: float = 0.0, record_every: float = 3600.0,
                callback=None) -> LongRunResult:
    """Alternate the transport map over each window with reaction substeps."""
    C = np.array(C0, dtype=float)
    K, N, I = C.shape
    vol = h.ravel()
    total = vol.sum()
    n_sub = max(1, int(np.ceil(window / reaction_dt)))
    dt_r = window / n_sub
    times = [t0]
    means = [(C.reshape(K, -1) @ vol) / total]
    t = t0
    next_record = t0 + record_every
    n_windows = int(round(duration / window))
    for _ in range(n_windows):
        flat = C.reshape(K, -1)
        C = (flat @ A.T).reshape(K, N, I)
        for _ in range(n_sub):
            I0 = surface_light(t / SECONDS_PER_DAY, bio.I0_max)
            light = light_column(C[1], h, I0, bio.gamma, bio.a, bio.b)
            C = react(C, light, dt_r, bio)
            t += dt_r
        if t >= next_record - 1e-9:
            times.append(t)
            means.append((C.reshape(K, -1) @ vol) / total)
            next_record += record_every
            if callback is not None:
                callback(t, C)
    return LongRunResult(np.array(times), np.array(means), C, h)


def spin_up(solver: MultilayerSolver, state: HydroState, duration: float) -> HydroState:
    """Run the hydrodynamics alone until the forced regime is established."""
    cfg = solver.config
    solver.config = replace(cfg, biology=False)
    probe = state.copy()
    probe.C = np.zeros((0,) + state.u.shape)
    try:
        end = solver.run(probe, state.t + duration)
    finally:
        solver.config = cfg
    end.C = state.C.copy()
    return end
