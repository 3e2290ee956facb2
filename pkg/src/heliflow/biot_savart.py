"""Elliptic solves on the periodic surrogate of R^2 x (-pi, pi).

Velocity is recovered from vorticity with u_hat = i xi x omega_hat / |xi|^2,
xi = (xi_h, n).  Horizontal wavenumbers are multiples of pi/L, so the
denominator n^2 + |xi_h|^2 is the box version of the per-mode multipliers
acting on the vertical Fourier coefficients.

The (0, 0, 0) mode of a velocity is a free constant.  It defaults to zero;
callers that need a far-field gauge pass it explicitly (see
:func:`impulse_mean`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .grid import GridSpec
from .littlewood_paley import DyadicProfile, phi


class DivergenceError(ValueError):
    """Raised when a vorticity field handed to the velocity solve is not solenoidal."""


def _fft3(v):
    return sfft.fftn(v, axes=(-3, -2, -1))


def _ifft3(vh):
    return sfft.ifftn(vh, axes=(-3, -2, -1)).real


def _wavevector(grid: GridSpec):
    return (grid.KX, grid.KY, grid.KZ)


def _inv_k2(grid: GridSpec) -> np.ndarray:
    k2 = grid.K2
    with np.errstate(divide="ignore"):
        inv = np.where(k2 > 0, 1.0 / np.where(k2 > 0, k2, 1.0), 0.0)
    return inv


def divergence(v: np.ndarray, grid: GridSpec) -> np.ndarray:
    k = _wavevector(grid)
    vh = _fft3(v)
    return sfft.ifftn(sum(1j * k[i] * vh[i] for i in range(3))).real


def divergence_defect(v: np.ndarray, grid: GridSpec) -> float:
    """||div v||_inf relative to the largest of its three terms."""
    k = _wavevector(grid)
    vh = _fft3(v)
    terms = [sfft.ifftn(1j * k[i] * vh[i]).real for i in range(3)]
    scale = max(np.abs(t).max() for t in terms)
    div = np.abs(sum(terms)).max()
    return float(div / scale) if scale > 0 else float(div)


def curl(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    kx, ky, kz = _wavevector(grid)
    uh = _fft3(u)
    wh = np.stack([
        1j * (ky * uh[2] - kz * uh[1]),
        1j * (kz * uh[0] - kx * uh[2]),
        1j * (kx * uh[1] - ky * uh[0]),
    ])
    return _ifft3(wh)


def velocity_from_vorticity(omega: np.ndarray, grid: GridSpec, mean=None,
                            div_tol: float = 1e-8) -> np.ndarray:
    """Divergence-free velocity whose curl is omega on the resolved modes.

    ``mean`` sets the (0, 0, 0) mode of the result (zero by default).
    """
    if omega.shape != (3,) + grid.shape:
        raise ValueError(f"vorticity has shape {omega.shape}, expected {(3,) + grid.shape}")
    if div_tol is not None:
        defect = divergence_defect(omega, grid)
        if defect > div_tol:
            raise DivergenceError(
                f"vorticity is not divergence free: ||div omega||_inf / scale = {defect:.3e}"
                f" > {div_tol:.1e}"
            )
    kx, ky, kz = _wavevector(grid)
    wh = _fft3(omega)
    inv = _inv_k2(grid)
    uh = np.stack([
        1j * (ky * wh[2] - kz * wh[1]) * inv,
        1j * (kz * wh[0] - kx * wh[2]) * inv,
        1j * (kx * wh[1] - ky * wh[0]) * inv,
    ])
    uh[:, 0, 0, 0] = 0.0 if mean is None else np.asarray(mean, dtype=float) * grid.N**2 * grid.Nz
    return _ifft3(uh)


def impulse_mean(omega: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Box average of the decaying velocity, from the vertical impulse identity.

    For vorticity whose vertically averaged part has compact velocity
    support, integral of u_3 = 1/2 integral of (x omega_2 - y omega_1).  The
    horizontal components are left at zero.
    """
    m3 = 0.5 * np.mean(grid.X * omega[1] - grid.Y * omega[0])
    return np.array([0.0, 0.0, m3])


def leray_project(omega: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Remove the gradient part of a vector field spectrally."""
    k = _wavevector(grid)
    wh = _fft3(omega)
    kdotw = sum(k[i] * wh[i] for i in range(3)) * _inv_k2(grid)
    return _ifft3(np.stack([wh[i] - k[i] * kdotw for i in range(3)]))


def pressure_from_velocity(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Solve -Lap p = div div (u (x) u) with dealiased products and zero mean."""
    k = _wavevector(grid)
    mask = grid.dealias_mask
    rhs = np.zeros(grid.shape, dtype=complex)
    for i in range(3):
        for j in range(i, 3):
            pij = sfft.fftn(u[i] * u[j]) * mask
            w = 1.0 if i == j else 2.0
            rhs += -w * k[i] * k[j] * pij
    return sfft.ifftn(rhs * _inv_k2(grid)).real


def pressure_residual(p: np.ndarray, u: np.ndarray, grid: GridSpec) -> float:
    """||-Lap p - div div(u (x) u)||_2 / ||div div(u (x) u)||_2 on dealiased products."""
    k = _wavevector(grid)
    mask = grid.dealias_mask
    dd = np.zeros(grid.shape, dtype=complex)
    for i in range(3):
        for j in range(3):
            dd += -k[i] * k[j] * sfft.fftn(u[i] * u[j]) * mask
    lap = grid.K2 * sfft.fftn(p)
    denom = np.linalg.norm(dd)
    num = np.linalg.norm(lap - dd)
    return float(num / denom) if denom > 0 else float(num)


@dataclass(frozen=True)
class MultiplierTable:
    """The per-mode multipliers xi_i / (n^2 + |xi_h|^2) and n / (n^2 + |xi_h|^2)."""

    grid: GridSpec

    def denominator(self, n: int) -> np.ndarray:
        return n * n + self.grid.KH**2

    def horizontal(self, n: int, axis: int) -> np.ndarray:
        k = self.grid.kx_d[:, None] if axis == 0 else self.grid.kx_d[None, :]
        k = np.broadcast_to(k, self.grid.shape2d)
        return _safe_div(k, self.denominator(n))

    def vertical(self, n: int) -> np.ndarray:
        return _safe_div(np.full(self.grid.shape2d, float(n)), self.denominator(n))


def _safe_div(a, b):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(b > 0, a / np.where(b > 0, b, 1.0), 0.0)


def widened_bump(s):
    """phi(2s) + phi(s) + phi(s/2): equal to 1 on the support of phi."""
    s = np.asarray(s, dtype=float)
    return phi(2 * s) + phi(s) + phi(s / 2)


def kernel_l1(grid: GridSpec, j: int, n: int, i: int) -> float:
    """Discrete L^1 norm of the band-localized kernel K^i_n of the velocity gradient.

    K^i_n has horizontal symbol xi_h xi_i / (n^2 + |xi_h|^2) * widened_bump(2^-j xi_h);
    the two vector components' norms are added.
    """
    kh = grid.KH
    kx = np.broadcast_to(grid.kx_d[:, None], grid.shape2d)
    ky = np.broadcast_to(grid.kx_d[None, :], grid.shape2d)
    ki = kx if i == 0 else ky
    base = _safe_div(ki, n * n + kh**2) * widened_bump(2.0 ** (-j) * kh)
    total = 0.0
    for kc in (kx, ky):
        kern = sfft.ifft2(kc * base, norm="forward").real / (4 * grid.L**2)
        total += np.abs(kern).sum() * grid.h**2
    return float(total)


@dataclass
class KernelBoundReport:
    rows: list  # (j, n, i, raw_l1, normalized)
    bound: float

    @property
    def max_normalized(self) -> float:
        return max(r[4] for r in self.rows)

    @property
    def passed(self) -> bool:
        return np.isfinite(self.max_normalized) and self.max_normalized <= self.bound


def resolved_kernel_bands(grid: GridSpec, profile: DyadicProfile) -> list[int]:
    """Bands whose annulus lies between 2 pi/L and the horizontal Nyquist wavenumber."""
    nyq = grid.N // 2 * grid.k_min
    return [j for j in profile.bands
            if 0.75 * 2.0**j >= 2 * grid.k_min and 8.0 / 3.0 * 2.0**j <= nyq]


def multiplier_bound_check(grid: GridSpec, profile: DyadicProfile, n_max: int = 32,
                           bound: float = 100.0, bands=None) -> KernelBoundReport:
    """Sweep (j, n) and normalize ||K^i_n||_1 by 2^{2j} / (n^2 + 2^{2j})."""
    bands = resolved_kernel_bands(grid, profile) if bands is None else list(bands)
    rows = []
    for j in bands:
        for n in range(n_max + 1):
            for i in (0, 1):
                raw = kernel_l1(grid, j, n, i)
                rows.append((j, n, i, raw, raw * (n * n + 4.0**j) / 4.0**j))
    return KernelBoundReport(rows, bound)
