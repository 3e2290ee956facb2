"""Time integration of the helicoidal Euler flow.

The primary path advances the scalar w = omega_z under the reduced transport
equation d_t w + div_h(u~ w) = 0, where u~ = (u_1 + y u_3, u_2 - x u_3) is
horizontally divergence free.  The oracle path advances the full vorticity
with d_t omega = curl(u x omega), which equals -(u . grad) omega +
(omega . grad) u for divergence-free u and omega.

Both use classical fixed-step RK4 with a CFL guard and 2/3 dealiasing of the
quadratic terms.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from . import biot_savart as bs
from .diagnostics import DiagnosticsSeries
from .grid import GridSpec, lp_norm, sup_norm
from .helicoidal import (
    HelicoidalState,
    boundary_mass,
    cylindrical_components,
    helicoidal_vorticity,
    horizontal_divergence_defect,
    orthogonality_defect,
    effective_velocity,
    radial_moment,
)
from .littlewood_paley import BesovParams, DyadicProfile, hybrid_besov_norm

log = logging.getLogger(__name__)

MODES = ("reduced", "full3d", "both")


class NumericalAbort(RuntimeError):
    """Raised when a field becomes non-finite; carries the last good state."""

    def __init__(self, message: str, last_good=None, trajectory=None):
        super().__init__(message)
        self.last_good = last_good
        self.trajectory = trajectory


class StateError(ValueError):
    pass


@dataclass
class SolverConfig:
    dt: float = 0.02
    T: float = 1.0
    cfl: float = 0.5
    scheme: str = "rk4"
    dealias: bool = True
    snapshot_every: int = 10
    besov: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.T >= 0:
            raise ValueError(f"T must be >= 0, got {self.T}")
        if not 0 < self.cfl <= 2:
            raise ValueError(f"cfl must be in (0, 2], got {self.cfl}")
        if self.scheme != "rk4":
            raise ValueError(f"only the rk4 scheme is available, got {self.scheme!r}")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")


@dataclass
class VelocityStages:
    """The effective velocity at the four RK4 stages of one step."""

    t0: float
    dt: float
    u_tilde: list  # four (u~1, u~2) pairs


@dataclass
class FullState:
    grid: GridSpec
    omega: np.ndarray
    u: np.ndarray
    time: float = 0.0
    mean: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @classmethod
    def from_helicoidal(cls, state: HelicoidalState) -> FullState:
        return cls(state.grid, state.omega.copy(), state.u.copy(), state.time, state.mean.copy())


# reduced system

def _mask(grid: GridSpec, on: bool):
    return grid.dealias_mask if on else 1.0


def transport_tendency(w: np.ndarray, u_tilde, grid: GridSpec, dealias: bool = True) -> np.ndarray:
    """-d_x(u~1 w) - d_y(u~2 w), products dealiased before differentiating."""
    mask = _mask(grid, dealias)
    f1 = sfft.fftn(u_tilde[0] * w) * mask
    f2 = sfft.fftn(u_tilde[1] * w) * mask
    return sfft.ifftn(-1j * (grid.KX * f1 + grid.KY * f2)).real


def reduced_velocity(w: np.ndarray, grid: GridSpec, mean) -> tuple[np.ndarray, np.ndarray]:
    u = bs.velocity_from_vorticity(helicoidal_vorticity(w, grid), grid, mean=mean, div_tol=None)
    return effective_velocity(u, grid)


def rhs_reduced(state: HelicoidalState, dealias: bool = True, check: bool = True) -> np.ndarray:
    g = state.grid
    if check:
        scale = max(np.abs(state.omega).max(), 1e-300)
        defect = np.abs(bs.curl(state.u, g) - state.omega).max() / scale
        if defect > 1e-6:
            raise StateError(f"state is inconsistent: ||curl u - omega||_inf / scale = {defect:.3e}")
    return transport_tendency(state.omega_z, effective_velocity(state.u, g), g, dealias)


def step_reduced(state: HelicoidalState, dt: float, dealias: bool = True):
    """One RK4 step; returns the new state and the stage velocities."""
    g, w0, mean = state.grid, state.omega_z, state.mean
    ut1 = effective_velocity(state.u, g)
    k1 = transport_tendency(w0, ut1, g, dealias)
    ut2 = reduced_velocity(w0 + 0.5 * dt * k1, g, mean)
    k2 = transport_tendency(w0 + 0.5 * dt * k1, ut2, g, dealias)
    ut3 = reduced_velocity(w0 + 0.5 * dt * k2, g, mean)
    k3 = transport_tendency(w0 + 0.5 * dt * k2, ut3, g, dealias)
    ut4 = reduced_velocity(w0 + dt * k3, g, mean)
    k4 = transport_tendency(w0 + dt * k3, ut4, g, dealias)
    w = w0 + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    new = HelicoidalState.from_omega_z(w, g, mean, state.time + dt)
    return new, VelocityStages(state.time, dt, [ut1, ut2, ut3, ut4])


# full 3D oracle

def _fft3(v):
    return sfft.fftn(v, axes=(-3, -2, -1))


def _curl_hat(ch, grid: GridSpec):
    kx, ky, kz = grid.KX, grid.KY, grid.KZ
    return np.stack([
        1j * (ky * ch[2] - kz * ch[1]),
        1j * (kz * ch[0] - kx * ch[2]),
        1j * (kx * ch[1] - ky * ch[0]),
    ])


def _full_tendency(omega, grid: GridSpec, mean, dealias: bool = True, div_tol=None):
    u = bs.velocity_from_vorticity(omega, grid, mean=mean, div_tol=div_tol)
    c = np.cross(u, omega, axis=0)
    ch = _fft3(c) * _mask(grid, dealias)
    return sfft.ifftn(_curl_hat(ch, grid), axes=(-3, -2, -1)).real, u


def rhs_full3d(omega: np.ndarray, grid: GridSpec, mean=None, dealias: bool = True) -> np.ndarray:
    """-(u . grad) omega + (omega . grad) u with u the Biot-Savart velocity of omega."""
    return _full_tendency(omega, grid, mean, dealias, div_tol=1e-8)[0]


def step_full3d(state: FullState, dt: float, dealias: bool = True) -> FullState:
    g, w0, mean = state.grid, state.omega, state.mean
    k1, _ = _full_tendency(w0, g, mean, dealias)
    k2, _ = _full_tendency(w0 + 0.5 * dt * k1, g, mean, dealias)
    k3, _ = _full_tendency(w0 + 0.5 * dt * k2, g, mean, dealias)
    k4, _ = _full_tendency(w0 + dt * k3, g, mean, dealias)
    w = bs.leray_project(w0 + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4), g)
    u = bs.velocity_from_vorticity(w, g, mean=mean, div_tol=None)
    return FullState(g, w, u, state.time + dt, mean)


def step(state, config: SolverConfig, dt: float | None = None):
    """Advance a HelicoidalState (reduced) or FullState (oracle) by one RK4 step."""
    dt = config.dt if dt is None else dt
    if isinstance(state, FullState):
        new = step_full3d(state, dt, config.dealias)
        fields = (new.omega,)
    else:
        new, _ = step_reduced(state, dt, config.dealias)
        fields = (new.omega_z,)
    if not all(np.isfinite(f).all() for f in fields):
        raise NumericalAbort(f"non-finite field after step at t={state.time:.6g}", last_good=state)
    return new


def cfl_dt(u: np.ndarray, grid: GridSpec, cfl: float = 0.5, u_tilde=None,
           remaining: float = math.inf) -> float:
    speed = float(np.abs(u).max())
    if u_tilde is not None:
        speed = max(speed, max(float(np.abs(c).max()) for c in u_tilde))
    if speed == 0.0:
        return remaining
    return cfl * grid.h / speed


# diagnostics

REDUCED_COLUMNS = (
    "dt", "wz_L1", "wz_L2", "wz_Linf", "w_L2", "w_Linf", "xy_w_Linf",
    "u_L2", "u_Linf", "one_xy_u_L2", "radial_moment", "u_dot_h", "div_u_tilde",
    "boundary_mass", "bkm_integral", "besov_wz",
)
BOTH_COLUMNS = REDUCED_COLUMNS + (
    "full_discrepancy", "full_radial_moment", "full_omega_r", "full_omega_theta", "full_div_omega",
)
FULL_COLUMNS = (
    "dt", "wz_L1", "wz_L2", "wz_Linf", "w_L2", "w_Linf", "xy_w_Linf",
    "u_L2", "u_Linf", "one_xy_u_L2", "radial_moment", "omega_r", "omega_theta",
    "div_omega", "boundary_mass", "bkm_integral", "besov_wz",
)

BESOV_PARAMS = BesovParams(0.0, np.inf, 1)


def _vector_norm(v, p, grid: GridSpec) -> float:
    mag = np.sqrt(np.sum(v * v, axis=0))
    return lp_norm(mag, p, grid)


def _common_metrics(wz, omega, u, grid: GridSpec, profile: DyadicProfile | None) -> dict:
    X, Y = grid.X, grid.Y
    u_l2 = _vector_norm(u, 2, grid)
    xu = _vector_norm(X * u, 2, grid)
    yu = _vector_norm(Y * u, 2, grid)
    w_inf = _vector_norm(omega, np.inf, grid)
    return {
        "wz_L1": lp_norm(wz, 1, grid),
        "wz_L2": lp_norm(wz, 2, grid),
        "wz_Linf": sup_norm(wz, grid),
        "w_L2": _vector_norm(omega, 2, grid),
        "w_Linf": w_inf,
        "xy_w_Linf": float(max(np.abs(X * omega).max(), np.abs(Y * omega).max())),
        "u_L2": u_l2,
        "u_Linf": _vector_norm(u, np.inf, grid),
        "one_xy_u_L2": math.sqrt(u_l2**2 + xu**2 + yu**2),
        "boundary_mass": boundary_mass(wz, grid),
        "besov_wz": (float(hybrid_besov_norm(wz, BESOV_PARAMS, profile, grid))
                     if profile is not None else 0.0),
    }


def reduced_metrics(state: HelicoidalState, profile=None) -> dict:
    g = state.grid
    m = _common_metrics(state.omega_z, state.omega, state.u, g, profile)
    u_inf = max(float(np.abs(state.u).max()), 1e-300)
    m["radial_moment"] = radial_moment(state.omega, g)
    m["u_dot_h"] = orthogonality_defect(state.u, g) / u_inf
    m["div_u_tilde"] = horizontal_divergence_defect(state.u, g)
    return m


def full_metrics(state: FullState, profile=None) -> dict:
    g = state.grid
    m = _common_metrics(state.omega[2], state.omega, state.u, g, profile)
    scale = max(float(np.abs(state.omega).max()), 1e-300)
    om_r, om_t, om_z = cylindrical_components(state.omega, g)
    off_axis = g.R2 >= g.h / 2
    m["radial_moment"] = radial_moment(state.omega, g) / scale
    m["omega_r"] = float(np.abs(om_r).max()) / scale
    m["omega_theta"] = float(np.abs(om_t - g.R * om_z)[off_axis].max()) / scale
    m["div_omega"] = bs.divergence_defect(state.omega, g)
    return m


@dataclass
class Trajectory:
    mode: str
    diagnostics: DiagnosticsSeries
    snapshots: list = field(default_factory=list)  # (time, state)
    final: object = None
    full_final: FullState | None = None
    dt_reductions: int = 0

    @property
    def times(self) -> list[float]:
        return self.diagnostics.times


def _columns(mode: str):
    return {"reduced": REDUCED_COLUMNS, "full3d": FULL_COLUMNS, "both": BOTH_COLUMNS}[mode]


def run(initial: HelicoidalState, config: SolverConfig, mode: str = "reduced",
        callback=None, profile: DyadicProfile | None = None) -> Trajectory:
    """Integrate to config.T, logging one diagnostics row per step.

    ``callback(state, stages)`` is called after every reduced step with the
    RK4 stage velocities (used to co-evolve passive fields).
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    g = initial.grid
    if config.besov and profile is None:
        profile = DyadicProfile.default(g)
    if not config.besov:
        profile = None
    series = DiagnosticsSeries(_columns(mode))
    traj = Trajectory(mode, series)

    red = initial if mode in ("reduced", "both") else None
    full = FullState.from_helicoidal(initial) if mode in ("full3d", "both") else None
    w0_l2 = max(lp_norm(initial.omega_z, 2, g), 1e-300)
    t, t_end = initial.time, initial.time + config.T
    bkm = 0.0
    nstep = 0
    last_dt = 0.0

    def record():
        if red is not None:
            row = reduced_metrics(red, profile)
            if full is not None:
                fm = full_metrics(full)
                row["full_discrepancy"] = lp_norm(red.omega_z - full.omega[2], 2, g) / w0_l2
                row["full_radial_moment"] = fm["radial_moment"]
                row["full_omega_r"] = fm["omega_r"]
                row["full_omega_theta"] = fm["omega_theta"]
                row["full_div_omega"] = fm["div_omega"]
        else:
            row = full_metrics(full, profile)
        row["dt"] = last_dt
        row["bkm_integral"] = bkm
        series.append(t, row)

    record()
    cur = red if red is not None else full
    traj.snapshots.append((t, cur))
    # tolerate roundoff in the accumulated time
    while t < t_end - 1e-12 * max(1.0, abs(t_end)):
        remaining = t_end - t
        if red is not None:
            limit = cfl_dt(red.u, g, config.cfl, effective_velocity(red.u, g), remaining)
        else:
            limit = cfl_dt(full.u, g, config.cfl, None, remaining)
        if full is not None and red is not None:
            limit = min(limit, cfl_dt(full.u, g, config.cfl, None, remaining))
        dt = min(config.dt, remaining)
        if dt > limit:
            log.warning("dt %.4g exceeds CFL limit %.4g at t=%.4g; reducing", dt, limit, t)
            traj.dt_reductions += 1
            dt = limit
        w_inf_before = float(np.abs((red or full).omega).max())
        try:
            if red is not None:
                new_red, stages = step_reduced(red, dt, config.dealias)
                if not np.isfinite(new_red.omega_z).all():
                    raise NumericalAbort(f"non-finite vorticity at t={t + dt:.6g}", last_good=red)
            if full is not None:
                new_full = step_full3d(full, dt, config.dealias)
                if not np.isfinite(new_full.omega).all():
                    raise NumericalAbort(f"non-finite vorticity at t={t + dt:.6g}", last_good=full)
        except NumericalAbort as exc:
            traj.final = red if red is not None else full
            traj.full_final = full
            exc.trajectory = traj
            raise
        if red is not None:
            red = new_red
            if callback is not None:
                callback(red, stages)
        if full is not None:
            full = new_full
        w_inf_after = float(np.abs((red or full).omega).max())
        bkm += 0.5 * dt * (w_inf_before + w_inf_after)
        t += dt
        last_dt = dt
        nstep += 1
        record()
        if nstep % config.snapshot_every == 0:
            traj.snapshots.append((t, red if red is not None else full))
    traj.final = red if red is not None else full
    traj.full_final = full
    if traj.snapshots[-1][0] != t:
        traj.snapshots.append((t, traj.final))
    return traj
