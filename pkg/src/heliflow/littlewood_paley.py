"""Homogeneous Littlewood-Paley calculus on the horizontal plane.

The dyadic bump is phi(xi) = chi(|xi|/2) - chi(|xi|) with chi a clamped
quintic smoothstep equal to 1 on [0, 3/4] and 0 on [4/3, inf), so that phi is
supported in the annulus 3/4 <= |xi| <= 8/3 and the rescaled copies
phi(2^-q xi) telescope to 1.

Only finitely many octaves are resolved on a grid, so the band index is
truncated to [qmin, qmax].  Whatever lies below the lowest band (including
the zero mode) is the *low remainder* chi(2^-qmin D) f, whatever lies above
the top band is the *high remainder*; both are reported next to every norm
and never folded into the homogeneous sums.

All operators act on the first two axes of their argument, so a (N, N)
field and a stack of horizontal slices (N, N, Nz) are treated alike.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .grid import GridSpec

CHI_LO = 0.75
CHI_HI = 4.0 / 3.0


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def _dsmoothstep(t):
    inside = (t > 0.0) & (t < 1.0)
    t = np.clip(t, 0.0, 1.0)
    return np.where(inside, 30.0 * t * t * (1.0 - t) ** 2, 0.0)


def chi(s):
    """Radial low-pass profile: 1 on [0, 3/4], 0 on [4/3, inf)."""
    s = np.asarray(s, dtype=float)
    return 1.0 - _smoothstep((s - CHI_LO) / (CHI_HI - CHI_LO))


def dchi(s):
    s = np.asarray(s, dtype=float)
    return -_dsmoothstep((s - CHI_LO) / (CHI_HI - CHI_LO)) / (CHI_HI - CHI_LO)


def phi(s):
    """Dyadic annulus profile, supported in [3/4, 8/3]."""
    s = np.asarray(s, dtype=float)
    return chi(s / 2.0) - chi(s)


def dphi(s):
    s = np.asarray(s, dtype=float)
    return 0.5 * dchi(s / 2.0) - dchi(s)


@dataclass(frozen=True)
class DyadicProfile:
    """Dyadic partition truncated to bands qmin..qmax."""

    qmin: int
    qmax: int

    def __post_init__(self):
        if not self.qmin < self.qmax:
            raise ValueError(f"need qmin < qmax, got {self.qmin} >= {self.qmax}")

    @classmethod
    def default(cls, grid: GridSpec) -> DyadicProfile:
        qmin = -math.ceil(math.log2(grid.L)) - 2
        qmax = int(round(math.log2(grid.N // 2))) - 1
        return cls(qmin, qmax)

    @property
    def bands(self) -> range:
        return range(self.qmin, self.qmax + 1)

    @property
    def low(self) -> int:
        """Pseudo-band index used for the low remainder."""
        return self.qmin - 1

    @property
    def high(self) -> int:
        """Pseudo-band index used for the high remainder."""
        return self.qmax + 1

    @property
    def extended_bands(self) -> range:
        return range(self.qmin - 1, self.qmax + 2)

    def phi_q(self, xi, q: int):
        return phi(2.0 ** (-q) * np.asarray(xi, dtype=float))

    def partition_sum(self, xi):
        xi = np.asarray(xi, dtype=float)
        return sum(self.phi_q(xi, q) for q in self.bands)

    def symbol(self, grid: GridSpec, band: int) -> np.ndarray:
        """Radial multiplier of an extended band on the (N, N) spectral plane."""
        r = grid.KH
        if band == self.low:
            return chi(2.0 ** (-self.qmin) * r)
        if band == self.high:
            return 1.0 - chi(2.0 ** (-self.qmax - 1) * r)
        if self.qmin <= band <= self.qmax:
            return phi(2.0 ** (-band) * r)
        raise ValueError(f"band {band} outside [{self.low}, {self.high}]")

    def symbol_gradient(self, grid: GridSpec, band: int, axis: int) -> np.ndarray:
        """d/dxi_axis of the band multiplier, from the closed-form smoothstep."""
        r = grid.KH
        k = grid.kx_d[:, None] if axis == 0 else grid.kx_d[None, :]
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(r > 0, k / np.where(r > 0, r, 1.0), 0.0)
        if band == self.low:
            c = 2.0 ** (-self.qmin)
            return c * dchi(c * r) * unit
        if band == self.high:
            c = 2.0 ** (-self.qmax - 1)
            return -c * dchi(c * r) * unit
        if self.qmin <= band <= self.qmax:
            c = 2.0 ** (-band)
            return c * dphi(c * r) * unit
        raise ValueError(f"band {band} outside [{self.low}, {self.high}]")


def build_partition(qmin: int, qmax: int) -> DyadicProfile:
    return DyadicProfile(qmin, qmax)


def _hfft(f):
    return sfft.fftn(f, axes=(0, 1))


def _hifft(fh, real: bool):
    out = sfft.ifftn(fh, axes=(0, 1))
    return out.real if real else out


def _expand(symbol: np.ndarray, ndim: int) -> np.ndarray:
    return symbol.reshape(symbol.shape + (1,) * (ndim - 2))


def _check(f: np.ndarray, grid: GridSpec) -> None:
    if f.shape[:2] != grid.shape2d:
        raise ValueError(f"horizontal shape {f.shape[:2]} does not match grid {grid.shape2d}")


def apply_band(f, band: int, profile: DyadicProfile, grid: GridSpec, fh=None):
    """Apply an extended band (low remainder, dyadic band, or high remainder)."""
    _check(f, grid)
    if fh is None:
        fh = _hfft(f)
    return _hifft(fh * _expand(profile.symbol(grid, band), f.ndim), np.isrealobj(f))


def delta_q(f, q: int, profile: DyadicProfile, grid: GridSpec):
    if not profile.qmin <= q <= profile.qmax:
        raise ValueError(f"band {q} outside [{profile.qmin}, {profile.qmax}]")
    return apply_band(f, q, profile, grid)


def s_q(f, q: int, profile: DyadicProfile, grid: GridSpec):
    """Low-pass chi(2^-q D) f: the bands below q plus the low remainder."""
    if not profile.qmin <= q <= profile.qmax + 1:
        raise ValueError(f"cutoff {q} outside [{profile.qmin}, {profile.qmax + 1}]")
    _check(f, grid)
    sym = chi(2.0 ** (-q) * grid.KH)
    return _hifft(_hfft(f) * _expand(sym, f.ndim), np.isrealobj(f))


def band_pieces(f, profile: DyadicProfile, grid: GridSpec) -> dict[int, np.ndarray]:
    """All extended bands of f; they sum to f exactly."""
    _check(f, grid)
    fh = _hfft(f)
    return {b: apply_band(f, b, profile, grid, fh) for b in profile.extended_bands}


def _plane_norm(g, p, grid: GridSpec) -> np.ndarray:
    """L^p norm over the plane, one value per trailing index."""
    a = np.abs(g)
    if p in (np.inf, "inf"):
        return a.max(axis=(0, 1))
    w = grid.h * grid.h
    if p == 1:
        return a.sum(axis=(0, 1)) * w
    if p == 2:
        return np.sqrt((a * a).sum(axis=(0, 1)) * w)
    raise ValueError(f"unsupported p={p!r}")


@dataclass(frozen=True)
class BesovParams:
    s: float = 0.0
    p: float = np.inf
    r: float = 1

    def __post_init__(self):
        if self.p not in (1, 2, np.inf):
            raise ValueError(f"unsupported p={self.p!r}; use 1, 2 or inf")
        if self.r not in (1, np.inf):
            raise ValueError(f"unsupported r={self.r!r}; use 1 or inf")

    @classmethod
    def parse(cls, text: str) -> BesovParams:
        """Parse 's,p,r' such as '0,inf,1' or '-1,inf,inf'."""
        try:
            s, p, r = (t.strip() for t in text.split(","))
            return cls(float(s), float(p), float(r))
        except ValueError as exc:
            raise ValueError(f"bad Besov triple {text!r}: {exc}") from None

    def label(self) -> str:
        fmt = lambda v: "inf" if v == np.inf else f"{v:g}"
        return f"B^{fmt(self.s)}_{fmt(self.p)},{fmt(self.r)}"


@dataclass
class BesovNorm:
    value: float
    qmin: int
    qmax: int
    band_norms: np.ndarray = field(repr=False)
    low_remainder: float = 0.0
    high_remainder: float = 0.0

    def __float__(self):
        return float(self.value)


def _lr(weighted: np.ndarray, r) -> float:
    return float(weighted.sum() if r == 1 else weighted.max())


def besov_norm(f, params: BesovParams, profile: DyadicProfile, grid: GridSpec) -> BesovNorm:
    """Truncated homogeneous Besov norm of a horizontal field.

    Complex fields (vertical Fourier coefficients) are measured through the
    modulus of each band.
    """
    if f.shape != grid.shape2d:
        raise ValueError(f"expected a horizontal field of shape {grid.shape2d}")
    fh = _hfft(f)
    real = np.isrealobj(f)
    norms = np.array([
        _plane_norm(_hifft(fh * profile.symbol(grid, q), real), params.p, grid)
        for q in profile.bands
    ])
    weights = 2.0 ** (params.s * np.arange(profile.qmin, profile.qmax + 1))
    low = _plane_norm(_hifft(fh * profile.symbol(grid, profile.low), real), params.p, grid)
    high = _plane_norm(_hifft(fh * profile.symbol(grid, profile.high), real), params.p, grid)
    return BesovNorm(_lr(weights * norms, params.r), profile.qmin, profile.qmax,
                     norms, float(low), float(high))


@dataclass
class HybridBesovNorm:
    value: float
    modes: dict[int, BesovNorm]

    def __float__(self):
        return float(self.value)


def hybrid_besov_norm(f, params: BesovParams, profile: DyadicProfile,
                      grid: GridSpec) -> HybridBesovNorm:
    """Sum over vertical modes |n| < Nz/2 of the Besov norm of the n-th coefficient.

    The homogeneous bands never see the horizontal mean of a coefficient; it
    shows up in each mode's low remainder.
    """
    from .grid import vertical_coefficient, vertical_modes

    if f.shape != grid.shape:
        raise ValueError(f"expected a field of shape {grid.shape}")
    modes = {n: besov_norm(vertical_coefficient(f, n, grid), params, profile, grid)
             for n in vertical_modes(grid)}
    return HybridBesovNorm(sum(m.value for m in modes.values()), modes)


def bony_decompose(u, v, profile: DyadicProfile, grid: GridSpec):
    """Split u*v into the paraproducts T_u v, T_v u and the remainder R(u, v).

    The low and high remainders enter as two extra bands at either end of
    the range, so the three parts add up to the pointwise product exactly.
    """
    if u.shape != v.shape:
        raise ValueError(f"grid mismatch: {u.shape} vs {v.shape}")
    _check(u, grid)
    bands = list(profile.extended_bands)
    du = band_pieces(u, profile, grid)
    dv = band_pieces(v, profile, grid)
    zero = np.zeros_like(u * v)

    def lowpass(d, q):
        # S_{q-1} = sum of extended bands <= q - 2
        return sum((d[j] for j in bands if j <= q - 2), zero)

    t_uv = sum((lowpass(du, q) * dv[q] for q in bands), zero)
    t_vu = sum((lowpass(dv, q) * du[q] for q in bands), zero)
    rem = zero.copy()
    for q in bands:
        near = sum((dv[j] for j in (q - 1, q, q + 1) if j in dv), zero)
        rem = rem + du[q] * near
    return t_uv, t_vu, rem


def paraproduct_term(u, v, q: int, profile: DyadicProfile, grid: GridSpec):
    """One summand S_{q-1}u * Delta_q v of T_u v."""
    return s_q(u, q - 1, profile, grid) * delta_q(v, q, profile, grid)


def bernstein_ratio(f, q: int, k: int, a, b, profile: DyadicProfile, grid: GridSpec) -> float:
    """max_{|alpha|=k} ||d^alpha f||_b / (2^{q(k + 2(1/a - 1/b))} ||f||_a)."""
    inv = lambda p: 0.0 if p == np.inf else 1.0 / p
    for p in (a, b):
        if p not in (1, 2, np.inf):
            raise ValueError(f"unsupported exponent {p!r}")
    if inv(b) > inv(a):
        raise ValueError(f"need b >= a, got a={a}, b={b}")
    if f.shape != grid.shape2d:
        raise ValueError(f"expected a horizontal field of shape {grid.shape2d}")
    base = float(_plane_norm(f, a, grid))
    if base == 0.0:
        raise ValueError("Bernstein ratio undefined for the zero field")
    fh = _hfft(f)
    real = np.isrealobj(f)
    best = 0.0
    for i in range(k + 1):
        sym = (1j * grid.KX2) ** (k - i) * (1j * grid.KY2) ** i
        best = max(best, float(_plane_norm(_hifft(fh * sym, real), b, grid)))
    return best / (2.0 ** (q * (k + 2 * (inv(a) - inv(b)))) * base)


def _coordinate(grid: GridSpec, axis: int, ndim: int) -> np.ndarray:
    c = grid.X2 if axis == 0 else grid.Y2
    return c.reshape(grid.shape2d + (1,) * (ndim - 2))


def _axis_index(axis) -> int:
    if axis in (1, "x"):
        return 0
    if axis in (2, "y"):
        return 1
    raise ValueError(f"axis must be 1 (x) or 2 (y), got {axis!r}")


def moment_commutator(f, j: int, axis, profile: DyadicProfile, grid: GridSpec):
    """Both sides of x_i Delta_j f - Delta_j(x_i f) = (x_i h_j) * f.

    Returns the commutator evaluated with the grid coordinate, and the
    kernel convolution evaluated in Fourier space as
    i 2^-j (d_i phi)(2^-j xi) f_hat.  The two agree only as far as Delta_j f
    has decayed before the box edge, where the grid coordinate wraps.
    """
    if not profile.qmin <= j <= profile.qmax:
        raise ValueError(f"band {j} outside [{profile.qmin}, {profile.qmax}]")
    _check(f, grid)
    ax = _axis_index(axis)
    x = _coordinate(grid, ax, f.ndim)
    comm = x * delta_q(f, j, profile, grid) - delta_q(x * f, j, profile, grid)
    grad = _expand(profile.symbol_gradient(grid, j, ax), f.ndim)
    conv = _hifft(1j * grad * _hfft(f), np.isrealobj(f))
    return comm, conv


def band_moment(f, band: int, axis, profile: DyadicProfile, grid: GridSpec, fh=None):
    """x_i * (band of f), defined through the Fourier identity x_i <-> i d/dxi_i.

    Equals band(x_i f) + i (d_i symbol)(D) f.  On R^2 this is the pointwise
    product; on the box it is the band-limited surrogate that avoids the
    wrap of the coordinate at the edge.  f itself must decay inside the box.
    """
    _check(f, grid)
    ax = _axis_index(axis)
    x = _coordinate(grid, ax, f.ndim)
    if fh is None:
        fh = _hfft(f)
    real = np.isrealobj(f)
    sym = _expand(profile.symbol(grid, band), f.ndim)
    grad = _expand(profile.symbol_gradient(grid, band, ax), f.ndim)
    return _hifft(sym * _hfft(x * f) + 1j * grad * fh, real)
