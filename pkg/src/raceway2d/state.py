"""Hydrodynamic state, equation of state and column diagnostics (pressure, w)."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class PhysParams:
    g: float = 9.81
    rho0: float = 1000.0
    T0: float = 4.0
    alpha_T: float = 6.63e-6
    viscosity: float = 0.0        # mu, vertical and horizontal, m^2/s
    friction: float = 0.0         # kappa, Navier wall law, m/s
    tracer_diffusivity: float = 0.0  # mu_T, m^2/s
    bio_diffusivity: float = 0.0     # mu_C for the biological scalars, m^2/s
    horizontal_diffusion: bool = True

    def __post_init__(self):
        if self.g <= 0 or self.rho0 <= 0:
            raise ValueError("g and rho0 must be positive")
        for name in ("viscosity", "friction", "tracer_diffusivity", "bio_diffusivity"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass
class HydroState:
    """Water height per cell and per-(layer, cell) fields.

    ``C`` stacks the transported biological scalars (C1, C2, C3 when biology
    is active) with shape (K, N, I); K may be zero.
    """

    H: np.ndarray
    u: np.ndarray
    T: np.ndarray
    C: np.ndarray
    t: float = 0.0
    w: np.ndarray | None = None

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.T = np.asarray(self.T, dtype=float)
        self.C = np.asarray(self.C, dtype=float)
        if self.C.ndim == 2:
            self.C = self.C[None]
        if self.w is None:
            self.w = np.zeros_like(self.u)

    @property
    def n_layers(self) -> int:
        return self.u.shape[0]

    @property
    def n_cells(self) -> int:
        return self.H.size

    def copy(self) -> "HydroState":
        return replace(self, H=self.H.copy(), u=self.u.copy(), T=self.T.copy(),
                       C=self.C.copy(), w=self.w.copy())

    @classmethod
    def at_rest(cls, n_layers: int, H, T=0.0, C=None, t: float = 0.0) -> "HydroState":
        H = np.asarray(H, dtype=float)
        shape = (n_layers, H.size)
        if C is None:
            C = np.zeros((0,) + shape)
        else:
            C = np.broadcast_to(np.asarray(C, dtype=float)[:, None, None]
                                if np.ndim(C) == 1 else C, (len(C),) + shape).copy()
        return cls(H=H.copy(), u=np.zeros(shape), T=np.full(shape, 1.0) * T,
                   C=C, t=t)


def density_of_tracer(T, phys: PhysParams = PhysParams()):
    """rho = rho0 (1 - alpha_T (T - T0)^2)."""
    T = np.asarray(T, dtype=float)
    return phys.rho0 * (1.0 - phys.alpha_T * (T - phys.T0) ** 2)


def pressure_profile(rho, h, g: float = 9.81, force_above=None, force_double=None):
    """Layer-mean and interface pressures of hydrostatic columns.

    ``rho`` and ``h`` have shape (N, ...) with layer 0 at the bed.
    ``force_above[a]`` is the integral of F_z from interface a (0..N) up to
    the free surface, ``force_double[a]`` the nested integral over layer a.
    Returns ``(p_layer, p_interface)`` with shapes (N, ...) and (N+1, ...).
    """
    rho = np.asarray(rho, dtype=float)
    h = np.asarray(h, dtype=float)
    weight = rho * h
    # sum over layers strictly above each interface, interface N -> 0
    above = np.zeros((weight.shape[0] + 1,) + weight.shape[1:])
    above[:-1] = np.cumsum(weight[::-1], axis=0)[::-1]
    p_int = g * above
    p_mid = g * (0.5 * weight + above[1:])
    if force_above is not None:
        p_int = p_int - force_above
    if force_double is not None:
        with np.errstate(divide="ignore", invalid="ignore"):
            corr = np.where(h > 0, force_double / np.where(h > 0, h, 1.0), 0.0)
        p_mid = p_mid - corr
    return p_mid, p_int


def reconstruct_vertical_velocity(interfaces_old, interfaces_new, dt, mass_flux,
                                  exchange, dx, periodic: bool = False,
                                  dry_tol: float = 1e-8):
    """Layer vertical velocities from the z-weighted continuity relation.

    Parameters are per-column arrays: ``interfaces_*`` (N+1, I) before and
    after the step, ``mass_flux`` (N, I+1) layer mass fluxes at the x-faces
    used during the step, ``exchange`` (N+1, I) the interface mass exchange
    G, ``dx`` (I,).  The horizontal flux of (z_{a+1/2}^2 - z_{a-1/2}^2)/2 * u
    is the layer mass flux times the face-averaged layer mid-height.
    """
    zo = np.asarray(interfaces_old)
    zn = np.asarray(interfaces_new)
    h_new = zn[1:] - zn[:-1]
    zbar_o = 0.5 * (zo[1:] + zo[:-1])
    zbar_n = 0.5 * (zn[1:] + zn[:-1])
    q_old = (zo[1:] - zo[:-1]) * zbar_o
    q_new = h_new * zbar_n
    ddt = (q_new - q_old) / dt if dt > 0 else np.zeros_like(q_new)

    # face values of zbar, one-sided at the outer faces
    zf = np.empty((zbar_n.shape[0], zbar_n.shape[1] + 1))
    zf[:, 1:-1] = 0.5 * (zbar_n[:, 1:] + zbar_n[:, :-1])
    if periodic:
        zf[:, 0] = zf[:, -1] = 0.5 * (zbar_n[:, 0] + zbar_n[:, -1])
    else:
        zf[:, 0] = zbar_n[:, 0]
        zf[:, -1] = zbar_n[:, -1]
    flux = np.asarray(mass_flux) * zf
    ddx = (flux[:, 1:] - flux[:, :-1]) / np.asarray(dx)[None, :]

    zG = zn * np.asarray(exchange)
    rhs = ddt + ddx - (zG[1:] - zG[:-1])
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(h_new > dry_tol, rhs / np.where(h_new > dry_tol, h_new, 1.0), 0.0)
    return w
