"""Spectral discretization of the slab R^2 x (-pi, pi).

The horizontal plane is truncated to the periodic box [-L, L)^2 sampled on
an N x N grid; the vertical direction is 2*pi-periodic and sampled at Nz
collocation points z_j = -pi + 2*pi*j/Nz.  Scalar fields are real arrays of
shape (N, N, Nz) indexed (x, y, z); vector fields stack three of them along a
leading axis.  Horizontal-only fields have shape (N, N).

Spectral coefficients use the standard FFT ordering with the 1/(N*N*Nz)
normalization carried by the forward transform.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

AXES = {"x": 0, "y": 1, "z": 2}


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Grid on [-L, L)^2 x [-pi, pi) with N x N x Nz points."""

    L: float = 2 * np.pi
    N: int = 128
    Nz: int = 8

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")
        if self.N < 8 or not _is_power_of_two(self.N):
            raise ValueError(f"N must be a power of two >= 8, got {self.N}")
        if self.Nz < 2 or not _is_power_of_two(self.Nz):
            raise ValueError(f"Nz must be a power of two >= 2, got {self.Nz}")

    @property
    def h(self) -> float:
        return 2 * self.L / self.N

    @property
    def dz(self) -> float:
        return 2 * np.pi / self.Nz

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.N, self.N, self.Nz)

    @property
    def shape2d(self) -> tuple[int, int]:
        return (self.N, self.N)

    @property
    def cell_volume(self) -> float:
        return self.h * self.h * self.dz

    @property
    def k_min(self) -> float:
        """Smallest nonzero horizontal wavenumber, pi/L."""
        return np.pi / self.L

    # coordinates

    @cached_property
    def x(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.N)

    @cached_property
    def z(self) -> np.ndarray:
        return -np.pi + self.dz * np.arange(self.Nz)

    @cached_property
    def X2(self) -> np.ndarray:
        return np.broadcast_to(self.x[:, None], self.shape2d)

    @cached_property
    def Y2(self) -> np.ndarray:
        return np.broadcast_to(self.x[None, :], self.shape2d)

    @cached_property
    def X(self) -> np.ndarray:
        return self.x[:, None, None]

    @cached_property
    def Y(self) -> np.ndarray:
        return self.x[None, :, None]

    @cached_property
    def Z(self) -> np.ndarray:
        return self.z[None, None, :]

    @cached_property
    def R2(self) -> np.ndarray:
        """Horizontal radius on the (N, N) plane."""
        return np.hypot(self.X2, self.Y2)

    @cached_property
    def R(self) -> np.ndarray:
        return self.R2[:, :, None]

    # wavenumbers

    @cached_property
    def kx(self) -> np.ndarray:
        """Horizontal wavenumbers (multiples of pi/L), FFT order, Nyquist kept."""
        return 2 * np.pi * sfft.fftfreq(self.N, self.h)

    @cached_property
    def kx_d(self) -> np.ndarray:
        """Wavenumbers for odd derivatives: the Nyquist entry is zeroed."""
        k = self.kx.copy()
        k[self.N // 2] = 0.0
        return k

    @cached_property
    def n(self) -> np.ndarray:
        """Vertical integer wavenumbers in FFT order."""
        return np.rint(sfft.fftfreq(self.Nz, 1.0 / self.Nz))

    @cached_property
    def n_d(self) -> np.ndarray:
        k = self.n.copy()
        k[self.Nz // 2] = 0.0
        return k

    @cached_property
    def KX(self) -> np.ndarray:
        return self.kx_d[:, None, None]

    @cached_property
    def KY(self) -> np.ndarray:
        return self.kx_d[None, :, None]

    @cached_property
    def KZ(self) -> np.ndarray:
        return self.n_d[None, None, :]

    @cached_property
    def K2(self) -> np.ndarray:
        """|xi|^2 of the discrete derivative symbols, shape (N, N, Nz)."""
        return self.KX**2 + self.KY**2 + self.KZ**2

    @cached_property
    def KX2(self) -> np.ndarray:
        return self.kx_d[:, None]

    @cached_property
    def KY2(self) -> np.ndarray:
        return self.kx_d[None, :]

    @cached_property
    def KH(self) -> np.ndarray:
        """Horizontal spectral radius |xi_h| on the (N, N) plane (Nyquist kept)."""
        return np.hypot(self.kx[:, None], self.kx[None, :])

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep modes with every |index| <= N/3 (resp. Nz/3)."""
        m = np.abs(np.rint(sfft.fftfreq(self.N, 1.0 / self.N))) <= self.N / 3
        mz = np.abs(self.n) <= self.Nz / 3
        return m[:, None, None] & m[None, :, None] & mz[None, None, :]


def _check_shape(f: np.ndarray, grid: GridSpec, what: str = "field") -> None:
    if f.shape != grid.shape and f.shape != grid.shape2d:
        raise ValueError(
            f"{what} has shape {f.shape}, expected {grid.shape} or {grid.shape2d}"
        )


def to_spectral(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    _check_shape(f, grid)
    return sfft.fftn(f, norm="forward")


def to_real(fh: np.ndarray, grid: GridSpec, real: bool = True) -> np.ndarray:
    _check_shape(fh, grid, "spectrum")
    f = sfft.ifftn(fh, norm="forward")
    return f.real if real else f


def _symbol(grid: GridSpec, axis: int, ndim: int) -> np.ndarray:
    if ndim == 2:
        if axis == 2:
            raise ValueError("horizontal field has no z axis")
        return grid.KX2 if axis == 0 else grid.KY2
    return (grid.KX, grid.KY, grid.KZ)[axis]


def _axis(axis) -> int:
    if isinstance(axis, str):
        try:
            return AXES[axis]
        except KeyError:
            raise ValueError(f"unknown axis {axis!r}") from None
    if axis not in (0, 1, 2):
        raise ValueError(f"unknown axis {axis!r}")
    return axis


def partial_derivative(f: np.ndarray, axis, grid: GridSpec) -> np.ndarray:
    """Spectral derivative of a real or complex field along x, y or z."""
    _check_shape(f, grid)
    k = _symbol(grid, _axis(axis), f.ndim)
    out = sfft.ifftn(1j * k * sfft.fftn(f), overwrite_x=True)
    return out.real if np.isrealobj(f) else out


def dealias(fh: np.ndarray, grid: GridSpec) -> np.ndarray:
    _check_shape(fh, grid, "spectrum")
    if fh.ndim == 2:
        return fh * grid.dealias_mask[:, :, 0]
    return fh * grid.dealias_mask


def lp_norm(f: np.ndarray, p, grid: GridSpec) -> float:
    """Periodic-trapezoid approximation of the L^p norm, p in {1, 2, inf}.

    Horizontal fields integrate over the plane only.
    """
    _check_shape(f, grid)
    a = np.abs(f)
    if p in (np.inf, "inf"):
        return float(a.max())
    w = grid.h * grid.h * (grid.dz if f.ndim == 3 else 1.0)
    if p == 1:
        return float(a.sum() * w)
    if p == 2:
        return float(np.sqrt(np.sum(a * a) * w))
    raise ValueError(f"unsupported p={p!r}; use 1, 2 or inf")


def vertical_coefficient(f: np.ndarray, n: int, grid: GridSpec) -> np.ndarray:
    """(1/2pi) * integral of f e^{-inz} dz, as an exact sum over the z samples."""
    if f.shape != grid.shape:
        raise ValueError(f"field has shape {f.shape}, expected {grid.shape}")
    if abs(n) >= grid.Nz // 2:
        raise ValueError(f"vertical mode {n} out of range |n| < {grid.Nz // 2}")
    return f @ np.exp(-1j * n * grid.z) / grid.Nz


def vertical_modes(grid: GridSpec) -> range:
    """Modes n with |n| < Nz/2, the range vertical_coefficient accepts."""
    return range(-(grid.Nz // 2) + 1, grid.Nz // 2)


def sup_norm(f: np.ndarray, grid: GridSpec, candidates: int = 4) -> float:
    """Max of |f| on its trigonometric interpolant, refined by Newton steps.

    The sampled maximum of a smooth field moving relative to the grid
    wobbles by O(h^2); refining the top local maxima on the interpolant
    removes that wobble.  Real 3D fields only.
    """
    if f.shape != grid.shape or not np.isrealobj(f):
        raise ValueError("sup_norm expects a real field on the 3D grid")
    a = np.abs(f)
    peak = a.max()
    if peak == 0.0:
        return 0.0
    is_max = np.ones(f.shape, bool)
    for ax in range(3):
        for s in (1, -1):
            is_max &= a >= np.roll(a, s, axis=ax)
    idx = np.flatnonzero(is_max)
    idx = idx[np.argsort(a.ravel()[idx])[::-1][:candidates]]
    coef = sfft.fftn(f, norm="forward")
    ks = (grid.kx_d, grid.kx_d, grid.n_d)
    step = np.array([grid.h, grid.h, grid.dz])
    best = peak
    for flat in idx:
        i = np.array(np.unravel_index(flat, f.shape))
        s = i * step
        sign = np.sign(f.ravel()[flat])
        for _ in range(20):
            e = [np.exp(1j * k * si) for k, si in zip(ks, s)]
            d = [1j * k * ei for k, ei in zip(ks, e)]
            dd = [-(k * k) * ei for k, ei in zip(ks, e)]

            def ev(a0, a1, a2):
                return _contract(coef, a0, a1, a2)

            g = np.array([ev(d[0], e[1], e[2]), ev(e[0], d[1], e[2]), ev(e[0], e[1], d[2])])
            H = np.empty((3, 3))
            H[0, 0] = ev(dd[0], e[1], e[2])
            H[1, 1] = ev(e[0], dd[1], e[2])
            H[2, 2] = ev(e[0], e[1], dd[2])
            H[0, 1] = H[1, 0] = ev(d[0], d[1], e[2])
            H[0, 2] = H[2, 0] = ev(d[0], e[1], d[2])
            H[1, 2] = H[2, 1] = ev(e[0], d[1], d[2])
            try:
                delta = -np.linalg.solve(H, g)
            except np.linalg.LinAlgError:
                break
            # only accept ascent steps that stay within one cell
            delta = np.clip(delta, -step, step)
            if sign * (g @ delta) < 0:
                break
            s = s + delta
            if np.all(np.abs(delta) < 1e-12 * step):
                break
        e = [np.exp(1j * k * si) for k, si in zip(ks, s)]
        best = max(best, abs(_contract(coef, *e)))
    return float(best)


def _contract(coef, a0, a1, a2) -> float:
    return float(((coef @ a2) @ a1 @ a0).real)
