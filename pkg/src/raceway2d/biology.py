"""Droop growth with photoinhibition and light attenuation by chlorophyll.

Concentrations are stacked as ``C = (C1, C2, C3)``: carbon biomass (gC/m^3),
particulate nitrogen (gN/m^3) and dissolved nitrate (gN/m^3).  Rates are
expressed per day and converted to per second by :func:`reaction_rates`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SECONDS_PER_DAY = 86400.0


@dataclass(frozen=True)
class BioParams:
    mu_max: float = 1.7          # day^-1
    Q0: float = 0.05             # gN/gC, subsistence quota
    Ql: float = 0.25             # gN/gC, quota stopping uptake
    K_iI: float = 295.0          # photoinhibition constant
    K_sI: float = 70.0           # light half-saturation
    uptake_max: float = 0.073    # gN/gC/day
    K3: float = 0.0012           # nitrate half-saturation, gN/m^3
    respiration: float = 0.0081  # day^-1
    I0_max: float = 500.0
    gamma_star: float | None = 0.25  # gChl/gN; None -> use gamma_of_Istar(I_star)
    k_Istar: float = 100.0
    I_star: float = 0.0
    a: float = 16.2              # m^2/gChl
    b: float = 0.087             # m^-1

    def __post_init__(self):
        for name in ("mu_max", "Q0", "Ql", "K_iI", "K_sI", "uptake_max", "K3",
                     "respiration", "I0_max", "k_Istar", "I_star", "a", "b"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0 < self.Q0 < self.Ql:
            raise ValueError("need 0 < Q0 < Ql")
        if self.gamma_star is not None and self.gamma_star < 0:
            raise ValueError("gamma_star must be non-negative")
        if self.K_iI == 0 and self.mu_max > 0:
            raise ValueError("K_iI must be positive")

    @property
    def gamma(self) -> float:
        if self.gamma_star is not None:
            return self.gamma_star
        return gamma_of_Istar(self.I_star, self.k_Istar)


def surface_light(t_days, I0_max: float = 500.0):
    """Daily light cycle, zero at night; t in days."""
    return I0_max * np.maximum(0.0, np.sin(2.0 * np.pi * np.asarray(t_days, dtype=float)))


def gamma_of_Istar(I_star, k: float):
    return k / (np.asarray(I_star, dtype=float) + k)


def attenuation_depth(C2, h, gamma: float, a: float, b: float):
    """Optical depth at layer midpoints, layer 0 at the bed, measured from the surface."""
    C2 = np.asarray(C2, dtype=float)
    h = np.asarray(h, dtype=float)
    k = (a * gamma * C2 + b) * h
    above = np.zeros_like(k)
    above[:-1] = np.cumsum(k[::-1], axis=0)[::-1][1:]
    return above + 0.5 * k


def light_column(C2, h, I0, gamma: float = 0.25, a: float = 16.2, b: float = 0.087):
    """Per-layer irradiance I0 exp(-psi) evaluated at layer midpoints."""
    return np.asarray(I0, dtype=float) * np.exp(-attenuation_depth(C2, h, gamma, a, b))


def light_response(I, p: BioParams):
    I = np.asarray(I, dtype=float)
    return I / (I + p.K_sI + I * I / p.K_iI)


def growth_rate(q, I, p: BioParams = BioParams()):
    """mu(q, I) in day^-1; negative below the subsistence quota."""
    q = np.asarray(q, dtype=float)
    if np.any(q <= 0):
        raise ValueError("quota must be positive")
    return p.mu_max * light_response(I, p) * (1.0 - p.Q0 / q)


def uptake_rate(C3, q, p: BioParams = BioParams()):
    """lambda(C3, q) in gN/gC/day, zero once q exceeds Ql."""
    C3 = np.asarray(C3, dtype=float)
    q = np.asarray(q, dtype=float)
    sat = np.where(C3 > 0, C3 / (np.maximum(C3, 0.0) + p.K3), 0.0)
    return p.uptake_max * sat * np.maximum(0.0, 1.0 - q / p.Ql)


def _quota(C1, C2):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(C1 > 0, C2 / np.where(C1 > 0, C1, 1.0), 0.0)


def reaction_rates(C1, C2, C3, I, p: BioParams = BioParams()):
    """(dC1/dt, dC2/dt, dC3/dt) per second.  Cells without biomass do not react."""
    C1 = np.asarray(C1, dtype=float)
    C2 = np.asarray(C2, dtype=float)
    C3 = np.asarray(C3, dtype=float)
    alive = (C1 > 0) & (C2 > 0)
    q = np.where(alive, _quota(C1, C2), 1.0)
    mu = np.where(alive, growth_rate(q, I, p), 0.0)
    lam = np.where(alive, uptake_rate(C3, q, p), 0.0)
    R = p.respiration
    scale = 1.0 / SECONDS_PER_DAY
    d1 = np.where(alive, (mu - R) * C1, 0.0) * scale
    d2 = np.where(alive, lam * C1 - R * C2, 0.0) * scale
    d3 = np.where(alive, -lam * C1, 0.0) * scale
    return d1, d2, d3


def react(C, I, dt: float, p: BioParams = BioParams()):
    """Reaction step on a stacked (3, ...) array with rates frozen over ``dt``.

    Biomass is multiplied by exp(dt (mu - R)); near-empty quotas make mu
    very negative and an Euler update would turn C1 negative.  Uptake is capped by the available nitrate so C3 cannot go negative when
    the step is long compared to the depletion time; the same amount is moved
    to C2, keeping the nitrogen budget exact.
    """
    C = np.asarray(C, dtype=float)
    d1, d2, d3 = reaction_rates(C[0], C[1], C[2], I, p)
    uptake = np.minimum(-d3 * dt, np.maximum(C[2], 0.0))
    out = np.empty_like(C)
    growth = d1 / np.where(C[0] > 0, C[0], 1.0)
    out[0] = C[0] * np.exp(dt * growth)
    resp = p.respiration / SECONDS_PER_DAY * C[1]
    out[1] = C[1] + uptake - dt * resp
    out[2] = C[2] - uptake
    return out


def react_column(C, h, t_seconds: float, dt: float, p: BioParams = BioParams()):
    """Light-aware reaction step for (3, N, I) concentrations and (N, I) thicknesses."""
    I0 = surface_light(t_seconds / SECONDS_PER_DAY, p.I0_max)
    I = light_column(C[1], h, I0, p.gamma, p.a, p.b)
    return react(C, I, dt, p), I
