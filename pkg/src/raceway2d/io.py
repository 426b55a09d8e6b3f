"""CSV writers and readers for snapshots, time series and particle traces."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .lagrangian import Snapshot

SNAPSHOT_COLUMNS = ("t", "cell", "layer", "x", "z", "H", "u", "w", "T", "rho",
                    "C1", "C2", "C3", "I", "I0")
TIMESERIES_COLUMNS = ("t", "mean_H", "mean_speed", "mean_C1", "mean_C2", "mean_C3", "mean_q")
TRACE_COLUMNS = ("t", "x", "z", "I", "I0")


def _fmt(v) -> str:
    """Shortest repr that round-trips exactly."""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def snapshot_filename(t: float) -> str:
    return f"snapshot_t{t:013.4f}.csv"


def write_snapshot(path, t: float, x, zb, H, fractions, u, w, T, rho, C, light, I0: float):
    """One row per (cell, layer); C is (K, N, I) with K in {0, 3}."""
    N, I = u.shape
    cum = np.concatenate(([0.0], np.cumsum(fractions)))
    zmid = zb[None, :] + 0.5 * (cum[1:] + cum[:-1])[:, None] * H[None, :]
    Cs = C if C.shape[0] >= 3 else np.zeros((3, N, I))
    light = np.zeros((N, I)) if light is None else light
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(SNAPSHOT_COLUMNS)
        for i in range(I):
            for a in range(N):
                out.writerow([_fmt(t), i, a, _fmt(x[i]), _fmt(zmid[a, i]), _fmt(H[i]),
                              _fmt(u[a, i]), _fmt(w[a, i]), _fmt(T[a, i]), _fmt(rho[a, i]),
                              _fmt(Cs[0, a, i]), _fmt(Cs[1, a, i]), _fmt(Cs[2, a, i]),
                              _fmt(light[a, i]), _fmt(I0)])


def read_snapshot(path) -> dict:
    """Arrays keyed by column name, per-layer fields shaped (N, I)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in r] for r in reader]
    if tuple(header) != SNAPSHOT_COLUMNS:
        raise ValueError(f"{path}: unexpected header {header}")
    data = np.array(rows)
    cell = data[:, 1].astype(int)
    layer = data[:, 2].astype(int)
    I, N = cell.max() + 1, layer.max() + 1
    out = {"t": float(data[0, 0]), "x": np.zeros(I), "H": np.zeros(I), "I0": float(data[0, 14])}
    out["x"][cell] = data[:, 3]
    out["H"][cell] = data[:, 5]
    for k, name in enumerate(SNAPSHOT_COLUMNS):
        if name in ("t", "cell", "layer", "x", "H", "I0"):
            continue
        arr = np.zeros((N, I))
        arr[layer, cell] = data[:, k]
        out[name] = arr
    return out


def load_snapshots(directory) -> list[Snapshot]:
    files = sorted(Path(directory).glob("snapshot_t*.csv"))
    if not files:
        raise FileNotFoundError(f"no snapshot files in {directory}")
    snaps = []
    for f in files:
        d = read_snapshot(f)
        snaps.append(Snapshot(d["t"], d["H"], d["u"], d["w"], d["I"], d["I0"]))
    return snaps


class TimeSeriesWriter:
    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "w", newline="")
        self._out = csv.writer(self._fh)
        self._out.writerow(TIMESERIES_COLUMNS)

    def write(self, row):
        self._out.writerow([_fmt(v) for v in row])

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_timeseries(path) -> dict:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {name: data[:, k] for k, name in enumerate(TIMESERIES_COLUMNS)}


def write_traces(directory, times, x, z, light, I0):
    """One CSV per particle: particle_0000.csv ..."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for p in range(x.shape[1]):
        with open(directory / f"particle_{p:04d}.csv", "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(TRACE_COLUMNS)
            for k in range(times.size):
                out.writerow([_fmt(times[k]), _fmt(x[k, p]), _fmt(z[k, p]),
                              _fmt(light[k, p]), _fmt(I0[k])])


def read_traces(directory):
    """(times (T,), light (T, P), I0 (T,)) from particle trace files."""
    files = sorted(Path(directory).glob("particle_*.csv"))
    if not files:
        raise FileNotFoundError(f"no particle traces in {directory}")
    cols = [np.loadtxt(f, delimiter=",", skiprows=1, ndmin=2) for f in files]
    times = cols[0][:, 0]
    light = np.stack([c[:, 3] for c in cols], axis=1)
    return times, light, cols[0][:, 4]


def write_stats(path, stats):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(("particle", "fraction_high", "switches"))
        for p, (f, s) in enumerate(zip(stats.fraction_high, stats.switches)):
            out.writerow((p, _fmt(f), int(s)))
    hist_path = Path(path).with_name("histogram.csv")
    with open(hist_path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(("class_low", "class_high", "count"))
        n = stats.histogram.size
        for k, c in enumerate(stats.histogram):
            out.writerow((_fmt(k / n), _fmt((k + 1) / n), int(c)))
