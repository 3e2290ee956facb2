"""Frequency-localized family of passive vorticity members.

Each member starts as one dyadic band q of one vertical Fourier coefficient n
of the initial vorticity and is then carried by the effective velocity of
the main reduced run:

    d_t W_z + div_h(u~ W_z) = 0
    d_t W_1 + div_h(u~ W_1) = -W_z u~_2
    d_t W_2 + div_h(u~ W_2) =  W_z u~_1

Members are stored in collocated form W(x, y, z) = w~_{q,n} e^{inz} as complex
fields of shape (3, N, N, Nz).  Only n >= 0 is stored; the n < 0 members are
the complex conjugates, so the vorticity is the sum over q of W_{q,0} + 2 Re
W_{q,n}.  The transport operator is not diagonal in n once u~ depends on z,
so an evolved member holds all vertical modes.

The horizontal components at t = 0 are x- and y-moments of the band taken in
Fourier space (see :func:`heliflow.littlewood_paley.band_moment`), which keeps
each member band-limited and makes the sum over q exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft as sfft

from .evolve import VelocityStages
from .grid import GridSpec, vertical_coefficient
from .littlewood_paley import (
    BesovParams,
    DyadicProfile,
    apply_band,
    band_moment,
    besov_norm,
    hybrid_besov_norm,
)

INACTIVE_TOL = 1e-14


class MemberError(ValueError):
    pass


@dataclass
class DecompositionMember:
    q: int
    n: int
    W: np.ndarray  # (3, N, N, Nz) complex, collocated
    time: float = 0.0
    active: bool = True

    @property
    def weight(self) -> float:
        return 1.0 if self.n == 0 else 2.0

    def fields(self, grid: GridSpec, n: int | None = None) -> np.ndarray:
        """Vertical coefficient n (default: the member's own) of each component, shape (3, N, N)."""
        n = self.n if n is None else n
        return np.stack([_coefficient(self.W[c], n, grid) for c in range(3)])

    def real_part(self) -> np.ndarray:
        """Contribution of this member and its conjugate to the real vorticity."""
        return self.weight * self.W.real


def _coefficient(f: np.ndarray, n: int, grid: GridSpec) -> np.ndarray:
    if abs(n) >= grid.Nz // 2:
        raise MemberError(f"vertical mode {n} out of range |n| < {grid.Nz // 2}")
    return f @ np.exp(-1j * n * grid.z) / grid.Nz


def init_members(omega_z0: np.ndarray, grid: GridSpec, profile: DyadicProfile,
                 q_range=None, n_range=None, inactive_tol: float = INACTIVE_TOL):
    """Band/mode members of (-y w, x w, w); members below ``inactive_tol`` are flagged inactive."""
    q_range = list(profile.extended_bands if q_range is None else q_range)
    n_range = list(range(grid.Nz // 2) if n_range is None else n_range)
    bands = profile.extended_bands
    for q in q_range:
        if q not in bands:
            raise MemberError(f"band {q} outside [{bands.start}, {bands.stop - 1}]")
    for n in n_range:
        if not 0 <= n < grid.Nz // 2:
            raise MemberError(f"vertical mode {n} outside [0, {grid.Nz // 2 - 1}]")
    scale = max(float(np.abs(omega_z0).max()), 1e-300)
    ez = np.exp(1j * np.outer(n_range, grid.z))
    members = []
    for i, n in enumerate(n_range):
        f = vertical_coefficient(omega_z0, n, grid)
        fh = sfft.fft2(f)
        for q in q_range:
            wz = apply_band(f, q, profile, grid, fh)
            w1 = -band_moment(f, q, "y", profile, grid, fh)
            w2 = band_moment(f, q, "x", profile, grid, fh)
            W = np.stack([w1, w2, wz])[..., None] * ez[i]
            active = float(np.abs(W).max()) > inactive_tol * scale
            members.append(DecompositionMember(q, n, W, 0.0, active))
    return members


def active(members):
    return [m for m in members if m.active]


def reconstruct(members) -> np.ndarray:
    """Real vorticity sum over all members, fixed summation order."""
    out = None
    for m in members:
        out = m.real_part() if out is None else out + m.real_part()
    return out


# co-evolution

def _transport(V: np.ndarray, ut, grid: GridSpec, mask) -> np.ndarray:
    f1 = sfft.fftn(ut[0] * V) * mask
    f2 = sfft.fftn(ut[1] * V) * mask
    return sfft.ifftn(-1j * (grid.KX * f1 + grid.KY * f2))


def _filtered(p: np.ndarray, mask) -> np.ndarray:
    if isinstance(mask, float):
        return p
    return sfft.ifftn(sfft.fftn(p) * mask)


def _member_rhs(W: np.ndarray, ut, grid: GridSpec, mask) -> np.ndarray:
    # the sources are quadratic too and get the same 2/3 filter as the
    # transport fluxes; otherwise -y W_z and W_1 drift apart by the
    # truncated vertical modes of u~_2 W_z
    out = np.stack([_transport(W[c], ut, grid, mask) for c in range(3)])
    out[0] -= _filtered(W[2] * ut[1], mask)
    out[1] += _filtered(W[2] * ut[0], mask)
    return out


def _rk4(y0, rhs, stages: VelocityStages):
    dt = stages.dt
    ut = stages.u_tilde
    k1 = rhs(y0, ut[0])
    k2 = rhs(y0 + 0.5 * dt * k1, ut[1])
    k3 = rhs(y0 + 0.5 * dt * k2, ut[2])
    k4 = rhs(y0 + dt * k3, ut[3])
    return y0 + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _check_time(t: float, stages: VelocityStages) -> None:
    if abs(t - stages.t0) > 1e-12 * max(1.0, abs(t)):
        raise MemberError(f"member time {t} does not match velocity time {stages.t0}")


def co_evolve_step(members, stages: VelocityStages, grid: GridSpec, dealias: bool = True):
    """Advance every active member with the RK4 stage velocities of the main step."""
    mask = grid.dealias_mask if dealias else 1.0

    def rhs(W, ut):
        return _member_rhs(W, ut, grid, mask)

    out = []
    for m in members:
        _check_time(m.time, stages)
        W = _rk4(m.W, rhs, stages) if m.active else m.W
        out.append(replace(m, W=W, time=m.time + stages.dt))
    return out


@dataclass
class MomentMember:
    """A member together with its x- and y-weighted copies."""

    q: int
    n: int
    W: np.ndarray
    XW: np.ndarray
    YW: np.ndarray
    time: float = 0.0

    @classmethod
    def from_member(cls, m: DecompositionMember, grid: GridSpec) -> MomentMember:
        return cls(m.q, m.n, m.W.copy(), grid.X * m.W, grid.Y * m.W, m.time)

    @classmethod
    def combine(cls, members, grid: GridSpec) -> MomentMember:
        """Sum members sharing one vertical mode (e.g. all bands of n)."""
        ns = {m.n for m in members}
        if len(ns) != 1:
            raise MemberError(f"members span vertical modes {sorted(ns)}")
        W = sum(m.W for m in members)
        first = members[0]
        return cls.from_member(DecompositionMember(first.q, first.n, W, first.time), grid)


def moment_members_step(moments, stages: VelocityStages, grid: GridSpec, dealias: bool = True):
    """Co-evolve (W, xW, yW) with the moment sources.

    d_t(xW) + div_h(u~ xW) = u~_1 W + (-u~_2 W_2, u~_1 W_2, 0)
    d_t(yW) + div_h(u~ yW) = u~_2 W + ( u~_2 W_1, -u~_1 W_1, 0)
    """
    mask = grid.dealias_mask if dealias else 1.0

    def rhs(Y, ut):
        W, XW, YW = Y
        dW = _member_rhs(W, ut, grid, mask)
        f = lambda p: _filtered(p, mask)
        dX = np.stack([_transport(XW[c], ut, grid, mask) + f(ut[0] * W[c]) for c in range(3)])
        dX[0] -= f(ut[1] * W[1])
        dX[1] += f(ut[0] * W[1])
        dY = np.stack([_transport(YW[c], ut, grid, mask) + f(ut[1] * W[c]) for c in range(3)])
        dY[0] += f(ut[1] * W[0])
        dY[1] -= f(ut[0] * W[0])
        return np.stack([dW, dX, dY])

    out = []
    for m in moments:
        _check_time(m.time, stages)
        Y = _rk4(np.stack([m.W, m.XW, m.YW]), rhs, stages)
        out.append(MomentMember(m.q, m.n, Y[0], Y[1], Y[2], m.time + stages.dt))
    return out


def moment_consistency(m: MomentMember, grid: GridSpec) -> float:
    """max of ||xW_evolved - x W|| / ||x W|| and the same for y, in sup norm."""
    errs = []
    for evolved, coord in ((m.XW, grid.X), (m.YW, grid.Y)):
        direct = coord * m.W
        scale = max(float(np.abs(direct).max()), 1e-300)
        errs.append(float(np.abs(evolved - direct).max()) / scale)
    return max(errs)


# band diagnostics

def band_decay_profile(member: DecompositionMember, grid: GridSpec, profile: DyadicProfile,
                       j_range=None) -> dict[int, np.ndarray]:
    """j -> sup norms of the j-th band of the member's own vertical coefficient, per component."""
    j_range = list(profile.extended_bands if j_range is None else j_range)
    f = member.fields(grid)
    fh = sfft.fft2(f, axes=(1, 2))
    out = {}
    for j in j_range:
        sym = profile.symbol(grid, j)
        band = sfft.ifft2(fh * sym, axes=(1, 2))
        out[j] = np.abs(band).max(axis=(1, 2))
    return out


def decay_slope(decay: dict[int, np.ndarray], q: int, floor: float = 1e-12) -> float:
    """Least-squares slope of log2(norm) against |j - q|, over entries above floor * peak.

    At each distance the larger of the two sides counts.
    """
    peak = max(float(v.max()) for v in decay.values())
    by_dist: dict[int, float] = {}
    for j, v in decay.items():
        d = abs(j - q)
        by_dist[d] = max(by_dist.get(d, 0.0), float(v.max()))
    pts = [(d, v) for d, v in sorted(by_dist.items()) if v > floor * peak]
    if len(pts) < 2:
        return float("nan")
    d, v = np.array(pts).T
    return float(np.polyfit(d, np.log2(v), 1)[0])


def peak_band(decay: dict[int, np.ndarray]) -> int:
    return max(decay, key=lambda j: float(decay[j].max()))


@dataclass
class BudgetRow:
    n: int
    cut: int
    near: float
    far: float
    total: float

    @property
    def far_share(self) -> float:
        return self.far / self.total if self.total > 0 else 0.0


@dataclass
class BesovBudget:
    rows: list = field(default_factory=list)
    total: float = 0.0  # summed over all vertical modes n, both signs

    def far_share(self, cut: int) -> float:
        far = sum(r.far * (1 if r.n == 0 else 2) for r in self.rows if r.cut == cut)
        return far / self.total if self.total > 0 else 0.0

    def csv_lines(self) -> list[str]:
        lines = ["n,N,near,far,total"]
        lines += [f"{r.n},{r.cut},{r.near!r},{r.far!r},{r.total!r}" for r in self.rows]
        return lines


def _band_coefficients(members, grid: GridSpec, n_modes) -> dict[int, dict[int, np.ndarray]]:
    """q -> n -> vertical coefficient of the q-th piece's real vertical component."""
    by_q: dict[int, np.ndarray] = {}
    for m in members:
        part = m.weight * m.W[2].real
        by_q[m.q] = part if m.q not in by_q else by_q[m.q] + part
    return {q: {n: vertical_coefficient(f, n, grid) for n in n_modes} for q, f in by_q.items()}


def besov_budget_report(members, grid: GridSpec, profile: DyadicProfile,
                        params: BesovParams = BesovParams(0.0, np.inf, 1), cuts=range(1, 7),
                        n_modes=None) -> BesovBudget:
    """Near (|j-q| < N) and far (|j-q| >= N) parts of sum_j 2^{js} ||Delta_j sum_q w~_{q,n}||.

    Works on the vertical component.  ``total`` sums every mode with the
    conjugate modes counted, so it is comparable to the hybrid Besov norm of
    the reconstruction.
    """
    n_modes = list(range(grid.Nz // 2) if n_modes is None else n_modes)
    coef = _band_coefficients(members, grid, n_modes)
    qs = sorted(coef)
    bands = list(profile.bands)
    report = BesovBudget()
    total_all = 0.0
    for n in n_modes:
        pieces = {q: coef[q][n] for q in qs}
        full = sum(pieces.values())
        tot = float(besov_norm(full, params, profile, grid))
        total_all += tot * (1 if n == 0 else 2)
        hat = {q: sfft.fft2(p) for q, p in pieces.items()}
        for cut in cuts:
            near = far = 0.0
            for j in bands:
                sym = profile.symbol(grid, j)
                w = 2.0 ** (params.s * j)
                nh = sum(hat[q] for q in qs if abs(j - q) < cut)
                fh = sum(hat[q] for q in qs if abs(j - q) >= cut)
                if not isinstance(nh, int):
                    near += w * _norm(sfft.ifft2(nh * sym), params.p, grid)
                if not isinstance(fh, int):
                    far += w * _norm(sfft.ifft2(fh * sym), params.p, grid)
            report.rows.append(BudgetRow(n, cut, near, far, tot))
    report.total = total_all
    return report


def _norm(g, p, grid: GridSpec) -> float:
    a = np.abs(g)
    if p in (np.inf, "inf"):
        return float(a.max())
    if p == 1:
        return float(a.sum() * grid.h**2)
    if p == 2:
        return float(np.sqrt((a * a).sum()) * grid.h)
    raise ValueError(f"unsupported p={p!r}")


def reconstruction_error(members, omega: np.ndarray) -> float:
    scale = max(float(np.abs(omega).max()), 1e-300)
    return float(np.abs(reconstruct(members) - omega).max()) / scale


def hybrid_total(omega_z: np.ndarray, grid: GridSpec, profile: DyadicProfile,
                 params: BesovParams = BesovParams(0.0, np.inf, 1)) -> float:
    return float(hybrid_besov_norm(omega_z, params, profile, grid))
