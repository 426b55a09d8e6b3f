"""Horizontal mesh, bed topography and the sigma-like layer decomposition."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

FRACTION_TOL = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """1D cell mesh with bed elevation and fixed layer fractions.

    Arrays are read-only; a grid can be shared between solvers.
    """

    domain_length: float
    cell_centers: np.ndarray
    cell_widths: np.ndarray
    topography: np.ndarray
    layer_fractions: np.ndarray

    def __post_init__(self):
        for name in ("cell_centers", "cell_widths", "topography", "layer_fractions"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        l = self.layer_fractions
        if l.ndim != 1 or l.size < 1 or np.any(l <= 0):
            raise ValueError("layer fractions must be a non-empty vector of positive values")
        if abs(l.sum() - 1.0) > FRACTION_TOL:
            raise ValueError(f"layer fractions sum to {l.sum()!r}, expected 1")
        if np.any(self.cell_widths <= 0):
            raise ValueError("cell widths must be positive")
        if np.any(np.diff(self.cell_centers) <= 0):
            raise ValueError("cell centers must be strictly increasing")
        if not np.all(np.isfinite(self.topography)):
            raise ValueError("topography must be finite")

    @property
    def n_cells(self) -> int:
        return self.cell_centers.size

    @property
    def n_layers(self) -> int:
        return self.layer_fractions.size

    @property
    def dx(self) -> np.ndarray:
        return self.cell_widths

    @property
    def cumulative_fractions(self) -> np.ndarray:
        """Fraction of the column below each interface, shape (N+1,)."""
        return np.concatenate(([0.0], np.cumsum(self.layer_fractions)))

    @property
    def cell_faces(self) -> np.ndarray:
        return np.concatenate(([self.cell_centers[0] - 0.5 * self.cell_widths[0]],
                               self.cell_centers + 0.5 * self.cell_widths))


@dataclass(frozen=True)
class LayerGeometry:
    """Interface elevations (N+1, I) and layer thicknesses (N, I)."""

    interfaces: np.ndarray
    thicknesses: np.ndarray

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.interfaces[1:] + self.interfaces[:-1])


def uniform_fractions(n_layers: int) -> np.ndarray:
    return np.full(n_layers, 1.0 / n_layers)


def build_grid(domain_length: float, n_cells: int, n_layers: int,
               layer_fractions: Sequence[float] | None = None,
               topography_function: Callable[[np.ndarray], np.ndarray] | None = None) -> GridSpec:
    """Uniform mesh on [0, domain_length] with the bed sampled at cell centers."""
    if n_cells < 2:
        raise ValueError("need at least two cells")
    if n_layers < 1:
        raise ValueError("need at least one layer")
    if domain_length <= 0:
        raise ValueError("domain length must be positive")
    if layer_fractions is None:
        fractions = uniform_fractions(n_layers)
    else:
        fractions = np.asarray(layer_fractions, dtype=float)
        if fractions.size != n_layers:
            raise ValueError(f"got {fractions.size} layer fractions for {n_layers} layers")
    dx = domain_length / n_cells
    centers = (np.arange(n_cells) + 0.5) * dx
    if topography_function is None:
        zb = np.zeros(n_cells)
    else:
        zb = np.asarray(topography_function(centers), dtype=float) * np.ones(n_cells)
    return GridSpec(domain_length, centers, np.full(n_cells, dx), zb, fractions)


def layer_geometry(grid: GridSpec, H) -> LayerGeometry:
    """Interfaces z_{a+1/2} = z_b + H * sum_{j<=a} l_j and thicknesses l_a H."""
    H = np.asarray(H, dtype=float)
    cum = grid.cumulative_fractions
    interfaces = grid.topography[None, :] + cum[:, None] * H[None, :]
    # top interface is the free surface, written explicitly so it is exact
    interfaces[-1] = grid.topography + H
    thicknesses = grid.layer_fractions[:, None] * H[None, :]
    return LayerGeometry(interfaces, thicknesses)


def gaussian_two_bump_bed(x):
    """Bed of the analytic channel case: a 0.2 m bump at x=8 and a 0.4 m trough at x=12."""
    x = np.asarray(x, dtype=float)
    return 0.2 * np.exp(-(x - 8.0) ** 2) - 0.4 * np.exp(-(x - 12.0) ** 2)


def gaussian_two_bump_slope(x):
    x = np.asarray(x, dtype=float)
    return (-0.4 * (x - 8.0) * np.exp(-(x - 8.0) ** 2)
            + 0.8 * (x - 12.0) * np.exp(-(x - 12.0) ** 2))
