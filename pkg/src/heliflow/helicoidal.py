"""Helicoidal geometry with pitch k = 1.

A helicoidal vorticity is determined by its vertical component,
omega = (-y w, x w, w) with w = g(r, z - theta).  Profiles are finite sums of
separable harmonics a * rho(r) * cos(m (z - theta) + delta) with the Gaussian
ring rho(r) = r^m exp(-((r - c)/w)^2).

On the periodic box the (0, 0, 0) velocity mode is a free constant.  States
carry the far-field gauge in which u . h vanishes (see
:func:`heliflow.biot_savart.impulse_mean`); it is conserved by the flow.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .biot_savart import DivergenceError, divergence_defect, impulse_mean, velocity_from_vorticity
from .grid import GridSpec, lp_norm, partial_derivative

SUPPORT_WIDTHS = 5.25  # exp(-5.25^2) < 1e-12


class ProfileError(ValueError):
    """Profile violates the support, smoothness or circulation requirements."""


@dataclass(frozen=True)
class HarmonicTerm:
    amplitude: float
    m: int = 0
    phase: float = 0.0
    center: float = 0.0
    width: float = 0.5

    def __post_init__(self):
        if self.m < 0:
            raise ProfileError(f"harmonic order must be >= 0, got {self.m}")
        if not self.width > 0:
            raise ProfileError(f"bump width must be positive, got {self.width}")
        if self.center < 0:
            raise ProfileError(f"bump center must be >= 0, got {self.center}")

    @property
    def support_radius(self) -> float:
        return self.center + SUPPORT_WIDTHS * self.width

    @property
    def smooth_at_axis(self) -> bool:
        # a ring that is numerically zero near r = 0, or a centered Gaussian
        return self.center == 0.0 or self.center >= SUPPORT_WIDTHS * self.width

    def radial(self, r):
        return r**self.m * np.exp(-(((r - self.center) / self.width) ** 2))

    def evaluate(self, r, zeta):
        return self.amplitude * self.radial(r) * np.cos(self.m * zeta + self.phase)


@dataclass(frozen=True)
class HelicoidalProfile:
    terms: tuple[HarmonicTerm, ...] = ()
    pitch: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.pitch != 1.0:
            raise NotImplementedError("only pitch k = 1 is supported")

    @property
    def support_radius(self) -> float:
        return max((t.support_radius for t in self.terms), default=0.0)

    def evaluate(self, r, zeta):
        out = np.zeros(np.broadcast(r, zeta).shape)
        for t in self.terms:
            out = out + t.evaluate(r, zeta)
        return out

    def sample(self, grid: GridSpec) -> np.ndarray:
        """w(x, y, z) = g(r, z - theta) on the grid."""
        theta = np.arctan2(grid.Y2, grid.X2)[:, :, None]
        return self.evaluate(grid.R, grid.Z - theta)

    @classmethod
    def shielded_vortex(cls, amplitude: float = 3.5, core: float = 0.5, shield: float = 0.59,
                        helical: float = 0.0, m: int = 1, phase: float = 0.0,
                        helical_width: float | None = None) -> HelicoidalProfile:
        """Gaussian core minus a wider Gaussian of equal circulation.

        ``helical`` adds an m-th harmonic Gaussian bump of width
        ``helical_width`` (default ``core``).
        """
        terms = [
            HarmonicTerm(amplitude, 0, 0.0, 0.0, core),
            HarmonicTerm(-amplitude * (core / shield) ** 2, 0, 0.0, 0.0, shield),
        ]
        if helical:
            terms.append(HarmonicTerm(helical, m, phase, 0.0, helical_width or core))
        return cls(tuple(terms))


@dataclass
class HelicoidalState:
    grid: GridSpec
    omega_z: np.ndarray
    omega: np.ndarray
    u: np.ndarray
    u_tilde: tuple[np.ndarray, np.ndarray]
    time: float = 0.0
    mean: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @classmethod
    def from_omega_z(cls, omega_z: np.ndarray, grid: GridSpec, mean, time: float = 0.0,
                     div_tol=None) -> HelicoidalState:
        omega = helicoidal_vorticity(omega_z, grid)
        u = velocity_from_vorticity(omega, grid, mean=mean, div_tol=div_tol)
        return cls(grid, omega_z, omega, u, effective_velocity(u, grid), time, np.asarray(mean, float))

    def report(self) -> dict[str, float]:
        """Structural defects of the state, each relative where a scale exists."""
        g = self.grid
        w_inf = max(lp_norm(self.omega_z, np.inf, g), 1e-300)
        u_inf = max(float(np.abs(self.u).max()), 1e-300)
        om_r, om_t, _ = cylindrical_components(self.omega, g)
        return {
            "radial_moment": radial_moment(self.omega, g),
            "omega_r": float(np.abs(om_r).max()),
            "omega_theta_minus_r_omega_z": float(np.abs(om_t - g.R * self.omega_z)[g.R2 >= g.h / 2].max()),
            "div_omega": divergence_defect(self.omega, g),
            "u_dot_h": orthogonality_defect(self.u, g) / u_inf,
            "div_u_tilde": horizontal_divergence_defect(self.u, g),
            "nonzero_mode_energy": nonzero_mode_energy(self.omega_z, g),
            "boundary_mass": boundary_mass(self.omega_z, g),
            "omega_z_inf": w_inf,
        }


def helicoidal_vorticity(omega_z: np.ndarray, grid: GridSpec) -> np.ndarray:
    return np.stack([-grid.Y * omega_z, grid.X * omega_z, omega_z])


def check_profile(profile: HelicoidalProfile, grid: GridSpec, check_support: bool = True) -> None:
    for t in profile.terms:
        if check_support and t.support_radius > grid.L / 2:
            raise ProfileError(
                f"term {t} reaches r = {t.support_radius:.3f} > L/2 = {grid.L / 2:.3f}"
            )
        if not t.smooth_at_axis:
            raise ProfileError(
                f"term {t} is not smooth at the axis: need center 0 or center >= "
                f"{SUPPORT_WIDTHS:g} * width"
            )


def generate_initial_data(profile: HelicoidalProfile, grid: GridSpec, check_support: bool = True,
                          circulation_tol: float = 1e-8) -> HelicoidalState:
    check_profile(profile, grid, check_support)
    wz = profile.sample(grid)
    omega = helicoidal_vorticity(wz, grid)
    scale = max(np.abs(omega).max(), 1e-300)
    means = np.abs(omega.reshape(3, -1).mean(axis=1)) / scale
    if means.max() > circulation_tol:
        raise ProfileError(
            f"vorticity has nonzero mean (relative {means.max():.2e}); use a shielded profile"
        )
    try:
        u = velocity_from_vorticity(omega, grid, mean=impulse_mean(omega, grid))
    except DivergenceError as exc:
        raise ProfileError(f"inconsistent profile: {exc}") from None
    return HelicoidalState(grid, wz, omega, u, effective_velocity(u, grid), 0.0,
                           impulse_mean(omega, grid))


def radial_moment(omega: np.ndarray, grid: GridSpec) -> float:
    return float(np.abs(grid.X * omega[0] + grid.Y * omega[1]).max())


def orthogonality_defect(u: np.ndarray, grid: GridSpec) -> float:
    """||u . h||_inf = ||-y u_1 + x u_2 + u_3||_inf."""
    return float(np.abs(-grid.Y * u[0] + grid.X * u[1] + u[2]).max())


def effective_velocity(u: np.ndarray, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    return (u[0] + grid.Y * u[2], u[1] - grid.X * u[2])


def horizontal_divergence(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    """d_x(u_1 + y u_3) + d_y(u_2 - x u_3), with the coordinate factors differentiated exactly.

    Differentiating the non-periodic products spectrally would add Gibbs
    noise at the box edge; the product rule avoids it.
    """
    d = partial_derivative
    return (d(u[0], 0, grid) + d(u[1], 1, grid)
            + grid.Y * d(u[2], 0, grid) - grid.X * d(u[2], 1, grid))


def velocity_gradient_scale(u: np.ndarray, grid: GridSpec) -> float:
    return max(np.abs(partial_derivative(u[i], a, grid)).max() for i in range(3) for a in range(3))


def horizontal_divergence_defect(u: np.ndarray, grid: GridSpec) -> float:
    scale = velocity_gradient_scale(u, grid)
    div = np.abs(horizontal_divergence(u, grid)).max()
    return float(div / scale) if scale > 0 else float(div)


def cylindrical_components(v: np.ndarray, grid: GridSpec):
    """(v_r, v_theta, v_z); v_r and v_theta are zeroed where r < h/2."""
    r = grid.R
    on_axis = r < grid.h / 2
    safe = np.where(on_axis, 1.0, r)
    vr = np.where(on_axis, 0.0, (grid.X * v[0] + grid.Y * v[1]) / safe)
    vt = np.where(on_axis, 0.0, (-grid.Y * v[0] + grid.X * v[1]) / safe)
    return vr, vt, v[2]


def nonzero_mode_energy(f: np.ndarray, grid: GridSpec) -> float:
    """Share of sum |f|^2 carried by vertical modes n != 0."""
    total = float(np.sum(f * f))
    if total == 0.0:
        return 0.0
    mean_z = f.mean(axis=-1, keepdims=True)
    return float(np.sum((f - mean_z) ** 2) / total)


def annulus_mask(grid: GridSpec) -> np.ndarray:
    """Horizontal frame max(|x|, |y|) >= 3L/4."""
    return np.maximum(np.abs(grid.X2), np.abs(grid.Y2)) >= 0.75 * grid.L


def boundary_mass(f: np.ndarray, grid: GridSpec) -> float:
    """Fraction of sum |f| lying in the outer frame of the box."""
    a = np.abs(f)
    total = a.sum()
    if total == 0:
        return 0.0
    return float(a[annulus_mask(grid)].sum() / total)
