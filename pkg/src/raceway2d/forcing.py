"""Paddlewheel volumic force and its exact layer integrals.

The force magnitude at distance r from the wheel axis is F (r omega)^2,
directed normal to the blade: (cos theta, sin theta), theta being the blade
angle from the downward vertical.  It acts on the part of the wheel disc
lying within ``half_width`` radians of a blade.  For a fixed abscissa this
support is a union of z-intervals and the integrand is a quadratic in z, so
every integral needed by the layer equations has a closed form.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class WheelConfig:
    x_center: float = 5.0
    z_center: float = 0.5
    radius: float = 0.45
    omega: float = 0.85
    magnitude: float = 1.5e3
    n_blades: int = 1
    half_width: float = 0.3
    theta0: float = 0.0
    enabled: bool = True

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("wheel radius must be positive")
        if self.omega < 0 or self.magnitude < 0:
            raise ValueError("omega and force magnitude must be non-negative")
        if self.n_blades < 1:
            raise ValueError("need at least one blade")
        if not 0 < self.half_width <= np.pi / self.n_blades + 1e-15:
            raise ValueError("blade half-width must lie in (0, pi / n_blades]")

    @property
    def period(self) -> float:
        """Time between two identical blade configurations."""
        return TWO_PI / (self.omega * self.n_blades) if self.omega > 0 else np.inf


def blade_angle(wheel: WheelConfig, t: float) -> float:
    """Angle of the reference blade, reduced modulo the blade spacing."""
    spacing = TWO_PI / wheel.n_blades
    theta = np.mod(wheel.theta0 + wheel.omega * t, spacing)
    # t = k * period lands a hair below `spacing` after rounding
    if spacing - theta < 1e-12:
        theta = 0.0
    return float(theta)


def _blade_angles(wheel: WheelConfig, t: float) -> np.ndarray:
    return blade_angle(wheel, t) + TWO_PI * np.arange(wheel.n_blades) / wheel.n_blades


def _angle_within(phi, theta, half_width):
    d = np.mod(phi - theta + np.pi, TWO_PI) - np.pi
    return np.abs(d) <= half_width


def wheel_force(wheel: WheelConfig, x, z, t: float):
    """Pointwise force (F_x, F_z) in N/m^3."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    fx = np.zeros(np.broadcast(x, z).shape)
    fz = np.zeros_like(fx)
    if not wheel.enabled:
        return fx, fz
    dx = x - wheel.x_center
    dz = z - wheel.z_center
    r2 = dx * dx + dz * dz
    # angular position measured like the blade: 0 pointing down, increasing towards +x
    phi = np.arctan2(dx, -dz)
    inside = r2 <= wheel.radius ** 2
    for theta in _blade_angles(wheel, t):
        on = inside & _angle_within(phi, theta, wheel.half_width)
        mag = wheel.magnitude * wheel.omega ** 2 * r2
        fx = np.where(on, mag * np.cos(theta), fx)
        fz = np.where(on, mag * np.sin(theta), fz)
    return fx, fz


def _halfplane(a, b):
    """Interval of s with a*s + b >= 0, as (lo, hi)."""
    tiny = 1e-14
    big = np.inf
    lo = np.where(a > tiny, -b / np.where(a > tiny, a, 1.0), -big)
    hi = np.where(a < -tiny, -b / np.where(a < -tiny, a, 1.0), big)
    flat = np.abs(a) <= tiny
    lo = np.where(flat & (b < 0), big, lo)
    return lo, hi


def support_intervals(wheel: WheelConfig, x, t: float):
    """Vertical support of the force on the lines x = const.

    Returns (lo, hi, theta) arrays of shape (2 * n_blades, len(x)); empty
    pieces have lo >= hi.  Each blade sector is split in two convex halves
    so that its intersection with a vertical line is a single interval.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = x - wheel.x_center
    disc2 = wheel.radius ** 2 - d * d
    s_disc = np.sqrt(np.maximum(disc2, 0.0))
    los, his, thetas = [], [], []
    for theta in _blade_angles(wheel, t):
        halves = []
        for p1, p2 in ((theta - wheel.half_width, theta), (theta, theta + wheel.half_width)):
            # direction e(phi) = (sin phi, -cos phi); wedge = ccw from e(p1) to e(p2)
            lo1, hi1 = _halfplane(np.full_like(d, np.sin(p1)), d * np.cos(p1))
            lo2, hi2 = _halfplane(np.full_like(d, -np.sin(p2)), -d * np.cos(p2))
            lo = np.maximum.reduce([lo1, lo2, -s_disc])
            hi = np.minimum.reduce([hi1, hi2, s_disc])
            empty = (lo >= hi) | (disc2 <= 0)
            halves.append((np.where(empty, 0.0, lo), np.where(empty, 0.0, hi)))
        (la, ha), (lb, hb) = halves
        # the halves share the blade ray; on a line through it (d = 0) both
        # contain the same segment, which must be counted once
        shared = np.minimum(ha, hb) > np.maximum(la, lb)
        lb, hb = np.where(shared & (lb >= la), np.maximum(lb, ha), lb), np.where(
            shared & (lb < la), np.minimum(hb, la), hb)
        hb = np.maximum(hb, lb)
        for lo, hi in ((la, ha), (lb, hb)):
            los.append(lo + wheel.z_center)
            his.append(hi + wheel.z_center)
            thetas.append(np.full_like(d, theta))
    return np.array(los), np.array(his), np.array(thetas)


def _clip(lo, hi, a, b):
    """Intersection [max(lo,a), min(hi,b)] with zero length when empty."""
    l = np.maximum(lo, a)
    h = np.minimum(hi, b)
    h = np.maximum(h, l)
    return l, h


def _prim0(s, d2):
    """Antiderivative of (d^2 + s^2) ds."""
    return d2 * s + s ** 3 / 3.0


def _prim1(s, d2, shift):
    """Antiderivative of (d^2 + s^2)(s + shift) ds."""
    return d2 * s * s / 2.0 + s ** 4 / 4.0 + shift * (d2 * s + s ** 3 / 3.0)


@dataclass
class LayerForces:
    """Force integrals on a layer stack, per unit volume force (N/m^3 * m).

    ``fx``: integral of F_x over each layer (N, I).
    ``fz_above``: integral of F_z from each interface to the surface (N+1, I).
    ``fz_double``: nested integral over each layer (N, I).
    """

    fx: np.ndarray
    fz_above: np.ndarray
    fz_double: np.ndarray


def layer_forces(wheel: WheelConfig, x, interfaces, t: float) -> LayerForces:
    """Closed-form force integrals for columns at abscissae ``x``.

    ``interfaces`` has shape (N+1, I) and includes the bed and the surface.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    z = np.asarray(interfaces, dtype=float)
    n = z.shape[0] - 1
    fx = np.zeros((n, x.size))
    fz_above = np.zeros((n + 1, x.size))
    fz_double = np.zeros((n, x.size))
    if not wheel.enabled or wheel.magnitude == 0 or wheel.omega == 0:
        return LayerForces(fx, fz_above, fz_double)
    near = np.abs(x - wheel.x_center) < wheel.radius
    if not np.any(near):
        return LayerForces(fx, fz_above, fz_double)
    xs = x[near]
    zs = z[:, near]
    d2 = (xs - wheel.x_center) ** 2
    k = wheel.magnitude * wheel.omega ** 2
    lo, hi, theta = support_intervals(wheel, xs, t)
    zc = wheel.z_center
    surface = zs[-1]
    fx_s = np.zeros((n, xs.size))
    above_s = np.zeros((n + 1, xs.size))
    double_s = np.zeros((n, xs.size))
    for p in range(lo.shape[0]):
        cx = k * np.cos(theta[p])
        cz = k * np.sin(theta[p])
        # support restricted to the wet column
        plo, phi_ = _clip(lo[p], hi[p], zs[0], surface)
        a, b = _clip(plo[None], phi_[None], zs[:-1], zs[1:])  # per layer
        seg = _prim0(b - zc, d2) - _prim0(a - zc, d2)
        fx_s += cx * seg
        # integral of F_z above each interface
        a2, b2 = _clip(plo[None], phi_[None], zs, surface[None])
        above_s += cz * (_prim0(b2 - zc, d2) - _prim0(a2 - zc, d2))
        # nested: within the layer weight (z' - z_lo), above it weight h
        zlo = zs[:-1]
        zhi = zs[1:]
        shift = zc - zlo
        inner = _prim1(b - zc, d2, shift) - _prim1(a - zc, d2, shift)
        a3, b3 = _clip(plo[None], phi_[None], zhi, surface[None])
        outer = (zhi - zlo) * (_prim0(b3 - zc, d2) - _prim0(a3 - zc, d2))
        double_s += cz * (inner + outer)
    fx[:, near] = fx_s
    fz_above[:, near] = above_s
    fz_double[:, near] = double_s
    return LayerForces(fx, fz_above, fz_double)


def layer_force_x(wheel: WheelConfig, x: float, z_lo: float, z_hi: float, t: float,
                  surface: float | None = None) -> float:
    """Integral of F_x over [z_lo, z_hi] on the line x."""
    top = z_hi if surface is None else surface
    zi = np.array([[z_lo], [z_hi]]) if surface is None else np.array([[z_lo], [z_hi], [top]])
    return float(layer_forces(wheel, [x], zi, t).fx[0, 0])


def layer_force_z_double_integral(wheel: WheelConfig, x: float, interfaces, layer: int,
                                  t: float) -> float:
    """Nested integral of F_z over layer ``layer`` of one column, up to its surface."""
    zi = np.asarray(interfaces, dtype=float).reshape(-1, 1)
    return float(layer_forces(wheel, [x], zi, t).fz_double[layer, 0])
