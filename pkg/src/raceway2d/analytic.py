"""Steady free-surface Euler flow over a bed, with a tracer in advection/reaction balance.

With zeta = z - z_b the distance to the bed, the stream function
``psi = alpha sin(beta zeta) / sin(beta H)`` gives a divergence-free field
that follows the bed and the surface.  The surface is found from the
invariant ``g (z_b + H) + alpha^2 beta^2 / (2 sin^2(beta H))`` which is
constant along x for hydrostatic steady flow.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .geometry import gaussian_two_bump_bed, gaussian_two_bump_slope


class AnalyticBreakdown(ValueError):
    """The steady profile has no root on the chosen branch somewhere in x."""

    def __init__(self, interval):
        self.interval = interval
        super().__init__(
            "no steady surface on this branch for x in "
            f"[{interval[0]:.6g}, {interval[1]:.6g}]; flow is choked there")


@dataclass(frozen=True)
class AnalyticCase:
    alpha: float = 0.4
    beta: float = 1.5
    H_ref: float = 0.5
    x_ref: float = 8.0
    x_min: float = 0.0
    x_max: float = 20.0
    g: float = 9.81
    bed: Callable = field(default=gaussian_two_bump_bed, compare=False)
    bed_slope: Callable = field(default=gaussian_two_bump_slope, compare=False)

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0 or self.H_ref <= 0:
            raise ValueError("alpha, beta and H_ref must be positive")
        if not 0 < self.beta * self.H_ref < np.pi:
            raise ValueError("beta * H_ref must lie in (0, pi)")
        if not self.x_min <= self.x_ref <= self.x_max:
            raise ValueError("reference point outside the domain")

    def invariant(self, x, H):
        s = np.sin(self.beta * np.asarray(H, dtype=float))
        return self.g * (self.bed(x) + H) + (self.alpha * self.beta) ** 2 / (2.0 * s * s)

    def invariant_slope(self, H):
        """d(invariant)/dH at fixed x."""
        bh = self.beta * np.asarray(H, dtype=float)
        return self.g - self.alpha ** 2 * self.beta ** 3 * np.cos(bh) / np.sin(bh) ** 3

    def critical_height(self) -> float:
        """Height where the invariant is minimal at fixed bed."""
        k = self.alpha ** 2 * self.beta ** 3
        fn = lambda bh: self.g * np.sin(bh) ** 3 - k * np.cos(bh)
        return brentq(fn, 1e-12, np.pi / 2, xtol=1e-15, rtol=4 * np.finfo(float).eps) / self.beta

    @property
    def subcritical(self) -> bool:
        return self.H_ref > self.critical_height()


@dataclass(frozen=True)
class SurfaceProfile:
    x: np.ndarray
    H: np.ndarray
    dHdx: np.ndarray


def solve_surface_profile(case: AnalyticCase, x) -> SurfaceProfile:
    """Water height H(x) keeping the invariant at its reference value.

    Raises :class:`AnalyticBreakdown` with the offending x-interval when the
    reference level lies below the local minimum of the invariant.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    target = float(case.invariant(case.x_ref, case.H_ref))
    hc = case.critical_height()
    top = np.pi / case.beta
    lo_b, hi_b = (hc, top * (1 - 1e-14)) if case.subcritical else (1e-14, hc)
    jmin = case.invariant(x, hc)
    bad = jmin > target
    if np.any(bad):
        xb = x[bad]
        raise AnalyticBreakdown((float(xb.min()), float(xb.max())))
    H = np.empty_like(x)
    for i, xi in enumerate(x):
        f = lambda h: case.invariant(xi, h) - target
        if f(hc) == 0.0:
            H[i] = hc
            continue
        H[i] = brentq(f, lo_b, hi_b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    dHdx = -case.g * case.bed_slope(x) / case.invariant_slope(H)
    return SurfaceProfile(x, H, dHdx)


def surface_profile_ode(case: AnalyticCase, x, rtol: float = 1e-11, atol: float = 1e-13):
    """Independent route to H(x): integrate dH/dx = -g z_b' / dJ/dH from x_ref."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    rhs = lambda xx, h: -case.g * case.bed_slope(xx) / case.invariant_slope(h)
    H = np.empty_like(x)
    for side in (x >= case.x_ref, x < case.x_ref):
        pts = x[side]
        if pts.size == 0:
            continue
        order = np.argsort(np.abs(pts - case.x_ref))
        end = pts[order[-1]]
        if end == case.x_ref:
            H[side] = case.H_ref
            continue
        sol = solve_ivp(rhs, (case.x_ref, end), [case.H_ref], method="DOP853",
                        t_eval=pts[order], rtol=rtol, atol=atol)
        out = np.empty(pts.size)
        out[order] = sol.y[0]
        H[side] = out
    return H


def _column(case: AnalyticCase, prof_H, x, z):
    zb = case.bed(x)
    zeta = np.asarray(z, dtype=float) - zb
    if np.any(zeta < -1e-12) or np.any(zeta > prof_H + 1e-12):
        raise ValueError("point outside the water column")
    return zb, zeta


def analytic_velocity(case: AnalyticCase, x, z, H, dHdx):
    """(u, w) at points (x, z) for the given local height and its slope."""
    x = np.asarray(x, dtype=float)
    H = np.asarray(H, dtype=float)
    _, zeta = _column(case, H, x, z)
    a, b = case.alpha, case.beta
    sH = np.sin(b * H)
    cH = np.cos(b * H)
    u = a * b * np.cos(b * zeta) / sH
    w = a * b * (np.cos(b * zeta) * case.bed_slope(x) * sH
                 + np.sin(b * zeta) * cH * dHdx) / sH ** 2
    return u, w


def analytic_tracer(case: AnalyticCase, x, z, H):
    """exp(-(depth below the surface))."""
    H = np.asarray(H, dtype=float)
    _, zeta = _column(case, H, x, z)
    return np.exp(zeta - H)


def analytic_reaction(case: AnalyticCase, x, z, H, dHdx):
    """Reaction rate f with u dT/dx + w dT/dz = f T, written without tangents."""
    H = np.asarray(H, dtype=float)
    _, zeta = _column(case, H, x, z)
    b = case.beta
    return case.alpha * b * np.sin(b * (zeta - H)) * np.asarray(dHdx) / np.sin(b * H) ** 2


def layer_discharges(case: AnalyticCase, H, cumulative_fractions):
    """Exact discharge carried by each layer, shape (N, ...)."""
    H = np.asarray(H, dtype=float)
    L = np.asarray(cumulative_fractions, dtype=float)
    L = L.reshape(L.shape + (1,) * H.ndim)
    b = case.beta
    s = np.sin(b * H * L)
    return case.alpha * (s[1:] - s[:-1]) / np.sin(b * H)


def layer_mean_tracer(H, cumulative_fractions):
    """Exact layer averages of exp(zeta - H)."""
    H = np.asarray(H, dtype=float)
    L = np.asarray(cumulative_fractions, dtype=float)
    L = L.reshape(L.shape + (1,) * H.ndim)
    e = np.exp(H * (L - 1.0))
    dl = np.diff(L, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(H > 0, (e[1:] - e[:-1]) / (H * dl), 1.0)


def layer_reaction(case: AnalyticCase, H, dHdx, cumulative_fractions, n_quad: int = 8):
    """Layer average of f T divided by the layer average of T (Gauss-Legendre)."""
    H = np.asarray(H, dtype=float)
    L = np.asarray(cumulative_fractions, dtype=float)
    nodes, weights = np.polynomial.legendre.leggauss(n_quad)
    b = case.beta
    out = np.empty((L.size - 1,) + H.shape)
    for k in range(L.size - 1):
        s = 0.5 * (L[k] + L[k + 1]) + 0.5 * (L[k + 1] - L[k]) * nodes
        shape = (-1,) + (1,) * H.ndim
        zeta = s.reshape(shape) * H[None]
        fT = (case.alpha * b * np.sin(b * (zeta - H)) * dHdx / np.sin(b * H) ** 2
              * np.exp(zeta - H))
        T = np.exp(zeta - H)
        wq = weights.reshape(shape)
        out[k] = (wq * fT).sum(0) / (wq * T).sum(0)
    return out


@dataclass
class AnalyticFields:
    """Fields on a terrain-following grid: axis 0 is x, axis 1 is s = zeta / H."""

    x: np.ndarray
    s: np.ndarray
    zb: np.ndarray
    H: np.ndarray
    u: np.ndarray
    w: np.ndarray
    T: np.ndarray
    f: np.ndarray


def sample_fields(case: AnalyticCase, n_x: int, n_s: int, x_range=None) -> AnalyticFields:
    x0, x1 = x_range if x_range is not None else (case.x_min, case.x_max)
    x = np.linspace(x0, x1, n_x)
    s = np.linspace(0.0, 1.0, n_s)
    prof = solve_surface_profile(case, x)
    zb = case.bed(x)
    Z = zb[:, None] + s[None, :] * prof.H[:, None]
    X = np.broadcast_to(x[:, None], Z.shape)
    Hb = np.broadcast_to(prof.H[:, None], Z.shape)
    dH = np.broadcast_to(prof.dHdx[:, None], Z.shape)
    u, w = analytic_velocity(case, X, Z, Hb, dH)
    T = analytic_tracer(case, X, Z, Hb)
    f = analytic_reaction(case, X, Z, Hb, dH)
    return AnalyticFields(x, s, zb, prof.H, u, w, T, f)


def _spacing(coords):
    """Scalar step for uniform coordinates (exact on constants), else the coordinates."""
    d = np.diff(coords)
    return float(d.mean()) if np.allclose(d, d[0], rtol=1e-12, atol=0.0) else coords


def residual_check(fields: AnalyticFields, g: float = 9.81) -> dict:
    """Max-norm finite-difference residuals of the steady equations.

    Derivatives are second-order centred in the terrain-following
    coordinates and mapped to (x, z) by the chain rule.  Keys: ``divergence``,
    ``kinematic_bottom``, ``kinematic_surface``, ``tracer``, ``momentum``.
    """
    x, s = _spacing(fields.x), _spacing(fields.s)
    Z = fields.zb[:, None] + fields.s[None, :] * fields.H[:, None]
    dz_ds = np.gradient(Z, s, axis=1, edge_order=2)
    dz_dx = np.gradient(Z, x, axis=0, edge_order=2)

    def ddx(q):
        return (np.gradient(q, x, axis=0, edge_order=2)
                - dz_dx / dz_ds * np.gradient(q, s, axis=1, edge_order=2))

    def ddz(q):
        return np.gradient(q, s, axis=1, edge_order=2) / dz_ds

    u, w, T, f = fields.u, fields.w, fields.T, fields.f
    eta = fields.zb + fields.H
    deta = np.gradient(eta, x, edge_order=2)
    dzb = np.gradient(fields.zb, x, edge_order=2)
    res = {
        "divergence": ddx(u) + ddz(w),
        "kinematic_bottom": w[:, 0] - u[:, 0] * dzb,
        "kinematic_surface": w[:, -1] - u[:, -1] * deta,
        "tracer": ddx(u * T) + ddz(w * T) - f * T,
        "momentum": u * ddx(u) + w * ddz(u) + g * deta[:, None],
    }
    return {k: float(np.max(np.abs(v))) for k, v in res.items()}


def residual_orders(case: AnalyticCase, levels=((81, 11), (161, 21), (321, 41)),
                    x_range=None) -> dict:
    """Observed convergence order of each residual between successive levels."""
    norms = [residual_check(sample_fields(case, nx, ns, x_range), case.g)
             for nx, ns in levels]
    out = {}
    for key in norms[0]:
        vals = np.array([n[key] for n in norms])
        with np.errstate(divide="ignore", invalid="ignore"):
            out[key] = (np.log2(vals[:-1] / vals[1:]), vals)
    return out
