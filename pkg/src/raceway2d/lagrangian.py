"""Offline particle tracking through stored velocity snapshots and light statistics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import GridSpec


@dataclass
class Snapshot:
    """Fields at one instant: H (I,), u, w, light (N, I) and the surface light I0."""

    t: float
    H: np.ndarray
    u: np.ndarray
    w: np.ndarray
    light: np.ndarray | None = None
    I0: float = 0.0


@dataclass
class ParticleSet:
    x: np.ndarray
    z: np.ndarray
    times: list = field(default_factory=list)
    x_trace: list = field(default_factory=list)
    z_trace: list = field(default_factory=list)
    light_trace: list = field(default_factory=list)
    I0_trace: list = field(default_factory=list)
    clamped: int = 0

    @property
    def size(self) -> int:
        return self.x.size

    def record(self, t, light, I0):
        self.times.append(float(t))
        self.x_trace.append(self.x.copy())
        self.z_trace.append(self.z.copy())
        self.light_trace.append(np.asarray(light, dtype=float).copy())
        self.I0_trace.append(float(I0))

    def traces(self):
        """(times (T,), x (T, P), z (T, P), light (T, P), I0 (T,))."""
        return (np.array(self.times), np.array(self.x_trace), np.array(self.z_trace),
                np.array(self.light_trace), np.array(self.I0_trace))


def seed_particles(grid: GridSpec, H, x0: float, n: int, seed: int | None = None) -> ParticleSet:
    """Particles spread over the depth at abscissa x0.

    Without a seed the depths are evenly spaced cell-centred fractions of the
    column; with a seed they are drawn uniformly.
    """
    zb, Hx = _column_at(grid, np.asarray(H, dtype=float), np.full(n, float(x0)), periodic=False)
    if seed is None:
        frac = (np.arange(n) + 0.5) / n
    else:
        frac = np.sort(np.random.default_rng(seed).uniform(0.0, 1.0, n))
    return ParticleSet(np.full(n, float(x0)), zb + frac * Hx)


def _bracket(grid: GridSpec, x, periodic: bool):
    """Left neighbour index, right index and linear weight of x between cell centres."""
    xc = grid.cell_centers
    I = xc.size
    dx = grid.dx[0]
    if periodic:
        s = (np.mod(x, grid.domain_length) - xc[0]) / dx
        i0 = np.floor(s).astype(int)
        theta = s - i0
        return np.mod(i0, I), np.mod(i0 + 1, I), theta
    s = np.clip((x - xc[0]) / dx, 0.0, I - 1.0)
    i0 = np.minimum(np.floor(s).astype(int), I - 2)
    return i0, i0 + 1, s - i0


def _column_at(grid, H, x, periodic):
    i0, i1, th = _bracket(grid, x, periodic)
    zb = (1 - th) * grid.topography[i0] + th * grid.topography[i1]
    Hx = (1 - th) * H[i0] + th * H[i1]
    return zb, Hx


def _layer_index(grid, s):
    cum = grid.cumulative_fractions
    return np.clip(np.searchsorted(cum, s, side="right") - 1, 0, grid.n_layers - 1)


def sample_velocity(snap: Snapshot, grid: GridSpec, x, z, periodic: bool = False):
    """(u, w) linear in x between cell centres, constant within each layer."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    i0, i1, th = _bracket(grid, x, periodic)
    zb = (1 - th) * grid.topography[i0] + th * grid.topography[i1]
    Hx = (1 - th) * snap.H[i0] + th * snap.H[i1]
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(Hx > 0, (z - zb) / np.where(Hx > 0, Hx, 1.0), 0.0)
    a = _layer_index(grid, s)
    u = (1 - th) * snap.u[a, i0] + th * snap.u[a, i1]
    w = (1 - th) * snap.w[a, i0] + th * snap.w[a, i1]
    return u, w


def perceived_light(snap: Snapshot, grid: GridSpec, x, z, periodic: bool = False):
    """Stored per-layer light of the cell and layer holding each particle."""
    x = np.asarray(x, dtype=float)
    if periodic:
        i = np.mod(np.floor(np.mod(x, grid.domain_length) / grid.dx[0]).astype(int),
                   grid.n_cells)
    else:
        i = np.clip(np.searchsorted(grid.cell_faces, x, side="right") - 1, 0, grid.n_cells - 1)
    H = snap.H[i]
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(H > 0, (z - grid.topography[i]) / np.where(H > 0, H, 1.0), 0.0)
    return snap.light[_layer_index(grid, s), i]


class SnapshotSeries:
    """Time-ordered snapshots with linear interpolation in time."""

    def __init__(self, snapshots):
        self.snapshots = sorted(snapshots, key=lambda s: s.t)
        if not self.snapshots:
            raise ValueError("no snapshots")
        self.times = np.array([s.t for s in self.snapshots])

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def _pair(self, t):
        k = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0,
                        len(self.times) - 1))
        if k == len(self.times) - 1:
            return self.snapshots[k], self.snapshots[k], 0.0
        a, b = self.snapshots[k], self.snapshots[k + 1]
        return a, b, float(np.clip((t - a.t) / (b.t - a.t), 0.0, 1.0))

    def velocity(self, grid, x, z, t, periodic=False):
        a, b, th = self._pair(t)
        ua, wa = sample_velocity(a, grid, x, z, periodic)
        if th == 0.0:
            return ua, wa
        ub, wb = sample_velocity(b, grid, x, z, periodic)
        return (1 - th) * ua + th * ub, (1 - th) * wa + th * wb

    def height(self, t):
        a, b, th = self._pair(t)
        return (1 - th) * a.H + th * b.H

    def nearest(self, t) -> Snapshot:
        return self.snapshots[int(np.argmin(np.abs(self.times - t)))]


def _clamp(grid, H, x, z, periodic):
    if periodic:
        x = np.mod(x, grid.domain_length)
        n_out = 0
    else:
        lo, hi = grid.cell_faces[0], grid.cell_faces[-1]
        n_out = int(np.count_nonzero((x < lo) | (x > hi)))
        x = np.clip(x, lo, hi)
    zb, Hx = _column_at(grid, H, x, periodic)
    out = (z < zb) | (z > zb + Hx)
    return x, np.clip(z, zb, zb + Hx), n_out + int(np.count_nonzero(out))


def advect_particles(particles: ParticleSet, series: SnapshotSeries, grid: GridSpec,
                     dt: float, t_start: float | None = None, t_end: float | None = None,
                     periodic: bool = False, record_every: int = 1) -> ParticleSet:
    """Explicit midpoint integration of dM/dt = v(M, t) between two times."""
    t = series.t_start if t_start is None else t_start
    t1 = series.t_end if t_end is None else t_end
    if dt <= 0:
        raise ValueError("dt must be positive")
    spacing = np.diff(series.times)
    if spacing.size and dt > spacing.min() * (1 + 1e-9):
        raise ValueError("particle step exceeds the snapshot spacing")
    x, z = particles.x.copy(), particles.z.copy()
    k = 0

    def record(tt):
        if series.snapshots[0].light is not None:
            snap = series.nearest(tt)
            particles.x, particles.z = x, z
            particles.record(tt, perceived_light(snap, grid, x, z, periodic), snap.I0)

    record(t)
    while t < t1 - 1e-12:
        h = min(dt, t1 - t)
        u1, w1 = series.velocity(grid, x, z, t, periodic)
        xm, zm, _ = _clamp(grid, series.height(t + 0.5 * h), x + 0.5 * h * u1,
                           z + 0.5 * h * w1, periodic)
        u2, w2 = series.velocity(grid, xm, zm, t + 0.5 * h, periodic)
        x, z, n = _clamp(grid, series.height(t + h), x + h * u2, z + h * w2, periodic)
        particles.clamped += n
        t += h
        k += 1
        if k % record_every == 0:
            record(t)
    particles.x, particles.z = x, z
    return particles


@dataclass
class ExposureStats:
    fraction_high: np.ndarray   # per particle, NaN when no daylight sample
    switches: np.ndarray        # low -> high transitions per particle
    histogram: np.ndarray       # particle counts per 5% class of fraction_high
    defined: bool

    @property
    def never_high(self) -> int:
        return int(np.count_nonzero(self.fraction_high == 0.0))


def light_exposure_stats(light, I0, threshold_fraction: float = 0.5,
                         class_width: float = 0.05) -> ExposureStats:
    """High-light statistics from traces ``light`` (T, P) and surface light ``I0`` (T,)."""
    light = np.asarray(light, dtype=float)
    I0 = np.asarray(I0, dtype=float)
    if light.ndim == 1:
        light = light[:, None]
    n_classes = int(round(1.0 / class_width))
    day = I0 > 0
    P = light.shape[1]
    if not np.any(day):
        return ExposureStats(np.full(P, np.nan), np.zeros(P, dtype=int),
                             np.zeros(n_classes, dtype=int), False)
    high = light[day] > threshold_fraction * I0[day, None]
    frac = high.mean(axis=0)
    switches = np.count_nonzero(high[1:] & ~high[:-1], axis=0)
    # classes [0, 5%), [5%, 10%) ... with 100% in the last class
    idx = np.minimum((frac / class_width + 1e-12).astype(int), n_classes - 1)
    hist = np.bincount(idx, minlength=n_classes)
    return ExposureStats(frac, switches, hist, True)
