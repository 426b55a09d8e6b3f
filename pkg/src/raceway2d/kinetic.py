"""Kinetic finite-volume solver for the layered hydrostatic system.

Each layer carries mass ``h_a = l_a H``, momentum ``h_a u_a``, the density
tracer ``h_a T_a`` and the biological scalars ``h_a C^j_a``.  Horizontal
fluxes come from half-space moments of a compactly supported equilibrium
(uniform on |w| <= sqrt(3)), vertical transfers from the exchange terms
that keep every layer at its prescribed fraction of the column.  Viscosity
and bed friction are applied afterwards, implicitly per column.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from .biology import BioParams, react_column
from .forcing import WheelConfig, layer_forces
from .geometry import GridSpec
from .state import HydroState, PhysParams, pressure_profile, reconstruct_vertical_velocity

log = logging.getLogger(__name__)

SQRT3 = np.sqrt(3.0)
NG = 2  # ghost cells per side
BC_KINDS = ("periodic", "imposed_discharge", "imposed_height")


class SolverFailure(RuntimeError):
    def __init__(self, message: str, step: int | None = None, cell: int | None = None):
        self.step = step
        self.cell = cell
        where = []
        if step is not None:
            where.append(f"step {step}")
        if cell is not None:
            where.append(f"cell {cell}")
        super().__init__(message + (f" ({', '.join(where)})" if where else ""))


def chi(w):
    """Equilibrium profile: 1/(2 sqrt 3) on |w| <= sqrt 3."""
    w = np.asarray(w, dtype=float)
    return np.where(np.abs(w) <= SQRT3, 0.5 / SQRT3, 0.0)


def half_fluxes(h, u, c):
    """Right- and left-going mass and momentum fluxes of one layer state.

    Returns ``(mass_plus, mass_minus, mom_plus, mom_minus)``.  The plus parts
    integrate xi and xi^2 against the equilibrium over xi >= 0, the minus
    parts are the remainders of the full moments h u and h (u^2 + c^2).
    """
    h = np.asarray(h, dtype=float)
    u = np.asarray(u, dtype=float)
    c = np.asarray(c, dtype=float)
    full_m = h * u
    full_p = h * (u * u + c * c)
    sc = SQRT3 * c
    inside = np.abs(u) < sc
    width = np.where(inside, 2.0 * sc, 1.0)
    top = np.maximum(u + sc, 0.0)
    m_in = h * top ** 2 / (2.0 * width)
    p_in = h * top ** 3 / (3.0 * width)
    right = (~inside) & (u > 0)
    mp = np.where(inside, m_in, np.where(right, full_m, 0.0))
    pp = np.where(inside, p_in, np.where(right, full_p, 0.0))
    return mp, full_m - mp, pp, full_p - pp


def bio_interface_flux(mass_flux, C_left, C_right):
    """Concentration flux upwinded by the sign of the layer mass flux."""
    mass_flux = np.asarray(mass_flux, dtype=float)
    return mass_flux * np.where(mass_flux >= 0, C_left, C_right)


@dataclass
class ExchangeTerms:
    """Interface exchange G (N+1, I), positive when layer a+1 feeds layer a."""

    G: np.ndarray

    def interface_values(self, v):
        """Values carried across each interface, taken from the donor layer."""
        v = np.asarray(v)
        out = np.zeros(v.shape[:-2] + self.G.shape)
        out[..., 1:-1, :] = np.where(self.G[1:-1] > 0, v[..., 1:, :], v[..., :-1, :])
        return out

    def transfer(self, v):
        """Net exchange contribution to d(h v)/dt per layer."""
        vg = self.interface_values(v) * self.G
        return vg[..., 1:, :] - vg[..., :-1, :]


def exchange_terms(divergence, fractions) -> ExchangeTerms:
    """Exchange terms from layer mass-flux divergences (N, I).

    Chosen so that d h_a / dt = -div_a + G_{a+1/2} - G_{a-1/2} equals
    l_a times the total column change for every layer.
    """
    div = np.asarray(divergence, dtype=float)
    l = np.asarray(fractions, dtype=float)[:, None]
    excess = div - l * div.sum(axis=0)
    G = np.zeros((div.shape[0] + 1, div.shape[1]))
    G[1:-1] = np.cumsum(excess, axis=0)[:-1]
    return ExchangeTerms(G)


def cfl_dt(u, c, dx, coeff: float = 0.9, dt_max: float = 0.5, h=None, mass_flux=None,
           G=None, order: int = 1, dry_tol: float = 1e-8, diffusivity: float = 0.0) -> float:
    """Stable time step.

    The wave bound dx / (|u| + sqrt(3) c) is always applied.  When layer
    thicknesses and fluxes are given, the step is also limited so that no
    layer loses more water than it holds (horizontal outflow plus exchange
    outflow); at second order the horizontal outflow is doubled to cover
    the reconstructed face states.  Explicit horizontal diffusion adds
    dx^2 / (2 diffusivity).
    """
    u = np.asarray(u, dtype=float)
    c = np.asarray(c, dtype=float)
    dx = np.asarray(dx, dtype=float)
    speed = np.abs(u) + SQRT3 * c
    dt = dt_max
    if np.any(speed > 0):
        with np.errstate(divide="ignore"):
            dt = min(dt, coeff * float(np.min(np.where(speed > 0, dx / speed, np.inf))))
    if h is not None and mass_flux is not None:
        F = np.asarray(mass_flux)
        out_r = np.maximum(F[:, 1:], 0.0)
        out_l = np.maximum(-F[:, :-1], 0.0)
        horiz = (out_r + out_l) if order == 1 else 2.0 * np.maximum(out_r, out_l)
        out = horiz / dx
        if G is not None:
            out = out + np.maximum(-G[1:], 0.0) + np.maximum(G[:-1], 0.0)
        h = np.asarray(h)
        wet = (out > 0) & (h > dry_tol)
        if np.any(wet):
            dt = min(dt, coeff * float(np.min(h[wet] / out[wet])))
    if diffusivity > 0:
        dt = min(dt, coeff * float(np.min(dx)) ** 2 / (2.0 * diffusivity))
    return dt


@dataclass(frozen=True)
class BoundaryCondition:
    """One side of the domain.

    ``discharge`` gives per-layer discharges q_a (array or callable of t),
    ``height`` the imposed or ghost water height, ``tracer`` and ``bio`` the
    inflow values (extrapolated from the interior when None).
    """

    kind: str = "periodic"
    discharge: np.ndarray | Callable[[float], np.ndarray] | None = None
    height: float | None = None
    tracer: np.ndarray | float | None = None
    bio: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in BC_KINDS:
            raise ValueError(f"unknown boundary kind {self.kind!r}; expected one of {BC_KINDS}")
        if self.kind == "imposed_discharge" and self.discharge is None:
            raise ValueError("imposed_discharge needs a discharge profile")
        if self.kind == "imposed_height" and (self.height is None or self.height < 0):
            raise ValueError("imposed_height needs a non-negative height")

    def layer_discharge(self, t: float):
        q = self.discharge(t) if callable(self.discharge) else self.discharge
        return np.asarray(q, dtype=float)


def check_boundary_pair(left: BoundaryCondition, right: BoundaryCondition):
    if (left.kind == "periodic") != (right.kind == "periodic"):
        raise ValueError("periodic boundaries must be used on both sides")


def _ghost_side(bc: BoundaryCondition, H, u, T, C, zb, side: int, fractions, t, dry_tol):
    """Ghost values for one side; ``side`` 0 is left (x=0), 1 is right."""
    edge = 0 if side == 0 else -1
    Hg = H[edge] if bc.height is None else bc.height
    ug = u[:, edge].copy()
    Tg = T[:, edge].copy()
    Cg = C[:, :, edge].copy()
    if bc.kind == "imposed_discharge":
        hg = fractions * Hg
        q = bc.layer_discharge(t)
        ug = np.where(hg > dry_tol, q / np.where(hg > dry_tol, hg, 1.0), 0.0)
    if bc.tracer is not None:
        Tg = np.broadcast_to(np.asarray(bc.tracer, dtype=float), Tg.shape).copy()
    if bc.bio is not None:
        Cg = np.broadcast_to(np.asarray(bc.bio, dtype=float).reshape(Cg.shape[0], -1),
                             Cg.shape).copy()
    return Hg, ug, Tg, Cg, zb[edge]


def apply_boundary(H, u, T, C, zb, left: BoundaryCondition, right: BoundaryCondition,
                   fractions, t: float = 0.0, dry_tol: float = 1e-8):
    """Arrays extended by two ghost cells on each side."""
    check_boundary_pair(left, right)
    I = H.size
    idx = np.arange(-NG, I + NG)
    if left.kind == "periodic":
        idx = np.mod(idx, I)
        return H[idx], u[:, idx], T[:, idx], C[:, :, idx], zb[idx]
    inner = np.clip(idx, 0, I - 1)
    He, ue, Te, Ce, zbe = H[inner], u[:, inner], T[:, inner], C[:, :, inner], zb[inner]
    for side, bc, cols in ((0, left, slice(0, NG)), (1, right, slice(I + NG, I + 2 * NG))):
        Hg, ug, Tg, Cg, zg = _ghost_side(bc, H, u, T, C, zb, side, fractions, t, dry_tol)
        He[cols] = Hg
        ue[:, cols] = ug[:, None]
        Te[:, cols] = Tg[:, None]
        Ce[:, :, cols] = Cg[:, :, None]
        zbe[cols] = zg
    return He, ue, Te, Ce, zbe


def minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _slopes(v):
    """Limited slopes of the extended array for cells 1 .. n-2 (last axis)."""
    return minmod(v[..., 1:-1] - v[..., :-2], v[..., 2:] - v[..., 1:-1])


@dataclass
class InterfaceFluxes:
    """Face fluxes per layer, shape (N, I+1); ``bio`` is (K, N, I+1)."""

    mass: np.ndarray
    momentum: np.ndarray
    tracer: np.ndarray
    bio: np.ndarray


@dataclass(frozen=True)
class SolverConfig:
    order: int = 1
    cfl: float = 0.9
    dt_max: float = 0.5
    bio_stride: int = 1
    dry_tol: float = 1e-8
    max_halvings: int = 20
    reconstruct_w: bool = True
    biology: bool = False

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        if not 0 < self.cfl <= 1:
            raise ValueError("CFL coefficient must lie in (0, 1]")
        if self.dt_max <= 0:
            raise ValueError("dt_max must be positive")
        if self.bio_stride < 1:
            raise ValueError("bio_stride must be at least 1")


@dataclass
class _Rates:
    dH: np.ndarray
    dq: np.ndarray
    dhT: np.ndarray
    dhC: np.ndarray
    fluxes: InterfaceFluxes
    exchange: ExchangeTerms
    h: np.ndarray
    u: np.ndarray
    c: np.ndarray


@dataclass
class _Conserved:
    H: np.ndarray
    q: np.ndarray
    hT: np.ndarray
    hC: np.ndarray

    def axpy(self, dt: float, r: _Rates) -> "_Conserved":
        return _Conserved(self.H + dt * r.dH, self.q + dt * r.dq,
                          self.hT + dt * r.dhT, self.hC + dt * r.dhC)

    def average(self, other: "_Conserved") -> "_Conserved":
        return _Conserved(0.5 * (self.H + other.H), 0.5 * (self.q + other.q),
                          0.5 * (self.hT + other.hT), 0.5 * (self.hC + other.hC))


@dataclass
class StepInfo:
    dt: float
    halvings: int
    mass_flux: np.ndarray
    exchange: np.ndarray


class MultilayerSolver:
    """Advances a :class:`HydroState` on a fixed grid.

    ``tracer_source(t, h, T)`` may return an extra d(hT)/dt of shape (N, I).
    """

    def __init__(self, grid: GridSpec, phys: PhysParams = PhysParams(),
                 wheel: WheelConfig | None = None, bio: BioParams | None = None,
                 left: BoundaryCondition = BoundaryCondition(),
                 right: BoundaryCondition = BoundaryCondition(),
                 config: SolverConfig = SolverConfig(),
                 tracer_source: Callable | None = None):
        check_boundary_pair(left, right)
        self.grid = grid
        self.phys = phys
        self.wheel = wheel if wheel is not None and wheel.enabled else None
        self.bio = bio if bio is not None else BioParams()
        self.left = left
        self.right = right
        self.config = config
        self.tracer_source = tracer_source
        self.periodic = left.kind == "periodic"
        self.fractions = grid.layer_fractions
        self.steps = 0
        self._bio_clock = 0.0
        self.pressure_clamps = 0

    # ---- helpers -------------------------------------------------------
    def _primitive(self, cons: _Conserved):
        h = self.fractions[:, None] * cons.H[None, :]
        wet = h > self.config.dry_tol
        safe = np.where(wet, h, 1.0)
        u = np.where(wet, cons.q / safe, 0.0)
        T = np.where(wet, cons.hT / safe, self.phys.T0)
        C = np.where(wet[None], cons.hC / safe[None], 0.0)
        return h, u, T, C

    def _conserved(self, state: HydroState) -> _Conserved:
        h = self.fractions[:, None] * state.H[None, :]
        return _Conserved(state.H.copy(), h * state.u, h * state.T, h[None] * state.C)

    def _forces(self, H, t):
        if self.wheel is None:
            return None
        return layer_forces(self.wheel, self.grid.cell_centers, self._interfaces(H), t)

    # ---- semi-discrete operator -----------------------------------------
    def rates(self, cons: _Conserved, t: float) -> _Rates:
        g = self.grid
        cfg = self.config
        ph = self.phys
        l = self.fractions
        N, I = g.n_layers, g.n_cells
        dx = g.dx
        tol = cfg.dry_tol

        h, u, T, C = self._primitive(cons)
        He, ue, Te, Ce, zbe = apply_boundary(cons.H, u, T, C, g.topography, self.left,
                                             self.right, l, t, tol)
        he = l[:, None] * He[None, :]
        rho_e = 1.0 - ph.alpha_T * (Te - ph.T0) ** 2

        forces = self._forces(cons.H, t)
        f_above = np.zeros((N + 1, I + 2 * NG))
        f_corr = np.zeros((N, I + 2 * NG))
        if forces is not None:
            f_above[:, NG:-NG] = forces.fz_above / ph.rho0
            with np.errstate(divide="ignore", invalid="ignore"):
                f_corr[:, NG:-NG] = np.where(h > tol, forces.fz_double / ph.rho0
                                             / np.where(h > tol, h, 1.0), 0.0)
        p_mid, p_int = pressure_profile(rho_e, he, ph.g)
        p_int = p_int - f_above
        p_mid = p_mid - f_corr

        # face states: left = cell k on its right side, right = cell k+1 on its left side
        L = slice(NG - 1, NG + I)
        R = slice(NG, NG + I + 1)
        if cfg.order == 1:
            hL, hR = he[:, L], he[:, R]
            uL, uR = ue[:, L], ue[:, R]
            TL, TR = Te[:, L], Te[:, R]
            CL, CR = Ce[:, :, L], Ce[:, :, R]
            pL, pR = p_mid[:, L], p_mid[:, R]
        else:
            eta = zbe + He
            s_eta = _slopes(eta)
            s_zb = _slopes(zbe)
            Hc = He[1:-1]
            sH = np.clip(s_eta - s_zb, -2.0 * Hc, 2.0 * Hc)
            su = _slopes(ue)
            sT = _slopes(Te)
            sC = _slopes(Ce)
            # cells 1..I+2 of the extended array; faces use cells NG-1..NG+I
            a, b = NG - 2, NG + I - 2  # slope index j belongs to extended cell j+1
            HL = Hc[a:b + 1] + 0.5 * sH[a:b + 1]
            HR = Hc[a + 1:b + 2] - 0.5 * sH[a + 1:b + 2]
            hL = l[:, None] * HL[None]
            hR = l[:, None] * HR[None]
            uL = ue[:, L] + 0.5 * su[:, a:b + 1]
            uR = ue[:, R] - 0.5 * su[:, a + 1:b + 2]
            TL = Te[:, L] + 0.5 * sT[:, a:b + 1]
            TR = Te[:, R] - 0.5 * sT[:, a + 1:b + 2]
            CL = Ce[:, :, L] + 0.5 * sC[:, :, a:b + 1]
            CR = Ce[:, :, R] - 0.5 * sC[:, :, a + 1:b + 2]
            rL = 1.0 - ph.alpha_T * (TL - ph.T0) ** 2
            rR = 1.0 - ph.alpha_T * (TR - ph.T0) ** 2
            pL = pressure_profile(rL, hL, ph.g)[0] - f_corr[:, L]
            pR = pressure_profile(rR, hR, ph.g)[0] - f_corr[:, R]
        hL = np.where(hL > tol, hL, 0.0)
        hR = np.where(hR > tol, hR, 0.0)
        negative = (pL < 0) | (pR < 0)
        if np.any(negative):
            self.pressure_clamps += int(np.count_nonzero(negative))
        cL = np.sqrt(np.maximum(pL, 0.0))
        cR = np.sqrt(np.maximum(pR, 0.0))
        mpL, _, ppL, _ = half_fluxes(hL, uL, cL)
        _, mmR, _, pmR = half_fluxes(hR, uR, cR)
        Fm = mpL + mmR
        Fp = ppL + pmR
        if self.left.kind == "imposed_discharge":
            Fm[:, 0] = self.left.layer_discharge(t)
        if self.right.kind == "imposed_discharge":
            Fm[:, -1] = self.right.layer_discharge(t)
        FT = bio_interface_flux(Fm, TL, TR)
        FC = bio_interface_flux(Fm[None], CL, CR)

        div = (Fm[:, 1:] - Fm[:, :-1]) / dx
        ex = exchange_terms(div, l)
        dH = -div.sum(axis=0)

        # interface pressure terms with centred slopes of the interfaces
        ze = zbe[None, :] + np.concatenate(([0.0], np.cumsum(l)))[:, None] * He[None, :]
        dz = (ze[:, NG + 1:NG + I + 1] - ze[:, NG - 1:NG + I - 1]) / (
            2.0 * dx[None, :])
        P = dz * p_int[:, NG:NG + I]
        dq = -(Fp[:, 1:] - Fp[:, :-1]) / dx + (P[1:] - P[:-1]) + ex.transfer(u)
        if forces is not None:
            dq += forces.fx / ph.rho0
        dhT = -(FT[:, 1:] - FT[:, :-1]) / dx + ex.transfer(T)
        dhC = -(FC[..., 1:] - FC[..., :-1]) / dx + ex.transfer(C)

        if ph.horizontal_diffusion and (ph.viscosity > 0 or ph.tracer_diffusivity > 0
                                        or ph.bio_diffusivity > 0):
            hf = np.minimum(he[:, :-1], he[:, 1:])[:, NG - 1:NG + I]
            dxf = dx[0]

            def diffuse(v, mu):
                flux = mu * hf * (v[..., NG:NG + I + 1] - v[..., NG - 1:NG + I]) / dxf
                return (flux[..., 1:] - flux[..., :-1]) / dx

            if ph.viscosity > 0:
                dq += diffuse(ue, ph.viscosity)
            if ph.tracer_diffusivity > 0:
                dhT += diffuse(Te, ph.tracer_diffusivity)
            if ph.bio_diffusivity > 0 and C.shape[0]:
                dhC += diffuse(Ce, ph.bio_diffusivity)

        if self.tracer_source is not None:
            dhT = dhT + self.tracer_source(t, h, T)

        c_cell = np.sqrt(np.maximum(p_mid[:, NG:NG + I], 0.0))
        fl = InterfaceFluxes(Fm, Fp, FT, FC)
        return _Rates(dH, dq, dhT, dhC, fl, ex, h, u, c_cell)

    # ---- time step ------------------------------------------------------
    def _max_diffusivity(self):
        ph = self.phys
        if not ph.horizontal_diffusion:
            return 0.0
        return max(ph.viscosity, ph.tracer_diffusivity, ph.bio_diffusivity)

    def stable_dt(self, r: _Rates) -> float:
        return cfl_dt(r.u, r.c, self.grid.dx[None, :], self.config.cfl, self.config.dt_max,
                      h=r.h, mass_flux=r.fluxes.mass, G=r.exchange.G, order=self.config.order,
                      dry_tol=self.config.dry_tol, diffusivity=self._max_diffusivity())

    def _admissible(self, cons: _Conserved) -> bool:
        if not np.all(np.isfinite(cons.H)) or np.any(cons.H < 0):
            return False
        if cons.hC.size and np.any(cons.hC < 0):
            return False
        return True

    def hyperbolic_step(self, state: HydroState, dt: float | None = None,
                        dt_cap: float | None = None):
        """One explicit stage (order 1) or one Heun step (order 2) without diffusion.

        Returns the new state and a :class:`StepInfo`.  When ``dt`` is None the
        stable step is used and inadmissible results are retried with halved
        dt; an explicit ``dt`` giving negative heights or concentrations raises
        :class:`SolverFailure`.
        """
        cons = self._conserved(state)
        t = state.t
        r0 = self.rates(cons, t)
        dt_try = self.stable_dt(r0) if dt is None else dt
        if dt_cap is not None:
            dt_try = min(dt_try, dt_cap)
        retries = self.config.max_halvings if dt is None else 0
        for halvings in range(retries + 1):
            new = cons.axpy(dt_try, r0)
            ok = self._admissible(new)
            flux, G = r0.fluxes.mass, r0.exchange.G
            if ok and self.config.order == 2:
                r1 = self.rates(new, t + dt_try)
                # the second stage must respect the volume bound of its own fluxes
                limit = cfl_dt(r1.u, np.zeros_like(r1.c), self.grid.dx[None, :], 1.0, np.inf,
                               h=r1.h, mass_flux=r1.fluxes.mass, G=r1.exchange.G, order=2,
                               dry_tol=self.config.dry_tol)
                if dt_try > limit * (1 + 1e-12):
                    dt_try *= 0.5
                    continue
                new = cons.average(new.axpy(dt_try, r1))
                ok = self._admissible(new)
                flux = 0.5 * (flux + r1.fluxes.mass)
                G = 0.5 * (G + r1.exchange.G)
            if ok:
                break
            dt_try *= 0.5
        else:
            bad = np.flatnonzero(new.H < 0) if np.any(new.H < 0) else np.array([-1])
            raise SolverFailure("negative water height or concentration after update",
                                step=self.steps, cell=int(bad[0]))
        h, u, T, C = self._primitive(new)
        out = HydroState(new.H, u, T, C, t=t + dt_try, w=state.w)
        return out, StepInfo(dt_try, halvings, flux, G)

    muscl_heun_step = hyperbolic_step

    def diffusion_friction_step(self, state: HydroState, dt: float) -> HydroState:
        """Implicit vertical diffusion of u, T, C with linear bed friction on u."""
        ph = self.phys
        if ph.viscosity == 0 and ph.friction == 0 and ph.tracer_diffusivity == 0 \
                and ph.bio_diffusivity == 0:
            return state
        h = self.fractions[:, None] * state.H[None, :]
        out = state.copy()
        out.u = _implicit_column(out.u, h, dt, ph.viscosity, ph.friction, self.config.dry_tol)
        if ph.tracer_diffusivity > 0:
            out.T = _implicit_column(out.T, h, dt, ph.tracer_diffusivity, 0.0,
                                     self.config.dry_tol)
        if ph.bio_diffusivity > 0:
            for k in range(out.C.shape[0]):
                out.C[k] = _implicit_column(out.C[k], h, dt, ph.bio_diffusivity, 0.0,
                                            self.config.dry_tol)
        return out

    def step(self, state: HydroState, dt_cap: float | None = None
             ) -> tuple[HydroState, StepInfo]:
        g = self.grid
        z_old = self._interfaces(state.H)
        new, info = self.hyperbolic_step(state, dt_cap=dt_cap)
        new = self.diffusion_friction_step(new, info.dt)
        if self.config.biology and new.C.shape[0] >= 3:
            self._bio_clock += info.dt
            if (self.steps + 1) % self.config.bio_stride == 0:
                h = self.fractions[:, None] * new.H[None, :]
                new.C, _ = react_column(new.C, h, new.t - self._bio_clock, self._bio_clock,
                                        self.bio)
                self._bio_clock = 0.0
        if self.config.reconstruct_w:
            new.w = reconstruct_vertical_velocity(z_old, self._interfaces(new.H), info.dt,
                                                  info.mass_flux, info.exchange, g.dx,
                                                  periodic=self.periodic,
                                                  dry_tol=self.config.dry_tol)
        self.steps += 1
        return new, info

    def _interfaces(self, H):
        g = self.grid
        z = g.topography[None, :] + g.cumulative_fractions[:, None] * H[None, :]
        z[-1] = g.topography + H
        return z

    def run(self, state: HydroState, t_end: float, callback: Callable | None = None,
            max_steps: int | None = None) -> HydroState:
        """Step until ``t_end``; the last step is shortened to land on it."""
        while state.t < t_end - 1e-12:
            if max_steps is not None and self.steps >= max_steps:
                break
            state, info = self.step(state, dt_cap=t_end - state.t)
            if callback is not None:
                callback(state, info)
        return state


def _implicit_column(v, h, dt, mu, kappa, dry_tol):
    """Solve h (v_new - v) / dt = mu d/dz(dv/dz) - kappa v_bed per column."""
    N, I = v.shape
    if N == 1 and kappa == 0:
        return v
    wet = h > dry_tol
    hs = np.where(wet, h, 1.0)
    # conductances between layers a and a+1
    if N > 1:
        dz = 0.5 * (h[1:] + h[:-1])
        k = np.where((dz > dry_tol) & wet[1:] & wet[:-1],
                     mu * dt / np.where(dz > dry_tol, dz, 1.0), 0.0)
    else:
        k = np.zeros((0, I))
    diag = hs.copy()
    diag[:-1] += k
    diag[1:] += k
    diag[0] += np.where(wet[0], kappa * dt, 0.0)
    # column-major unknowns: index = i * N + a
    ab = np.zeros((3, N * I))
    ab[1] = diag.T.ravel()
    upper = np.zeros((N, I))
    lower = np.zeros((N, I))
    upper[1:] = -k   # coefficient of v_{a+1} in row a, stored at a+1
    lower[:-1] = -k  # coefficient of v_{a-1} in row a, stored at a-1
    ab[0] = upper.T.ravel()
    ab[2] = lower.T.ravel()
    rhs = (hs * v).T.ravel()
    sol = solve_banded((1, 1), ab, rhs).reshape(I, N).T
    return np.where(wet, sol, v)
