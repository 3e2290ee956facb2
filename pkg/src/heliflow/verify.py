"""The invariant suite behind ``heliflow verify``.

Every check measures one number and compares it with a threshold from
:data:`DEFAULT_THRESHOLDS` (overridable per run).  The report lists the checks
sorted by name, one CSV line each, with values printed by ``repr`` so that
repeated runs on one platform produce identical bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from . import biot_savart as bs
from . import decomposition as dec
from .evolve import SolverConfig, run
from .grid import GridSpec, partial_derivative, to_real, to_spectral
from .helicoidal import (
    HelicoidalProfile,
    ProfileError,
    HelicoidalState,
    generate_initial_data,
    nonzero_mode_energy,
)
from .littlewood_paley import (
    DyadicProfile,
    apply_band,
    bernstein_ratio,
    bony_decompose,
    moment_commutator,
)

DEFAULT_THRESHOLDS = {
    "spectral.roundtrip": 1e-12,
    "spectral.parseval": 1e-10,
    "spectral.derivative": 1e-8,
    "lp.partition_of_unity": 1e-12,
    "lp.band_orthogonality": 1e-14,
    "lp.bony_reconstruction": 1e-10,
    "lp.bernstein_ratio": 100.0,
    "lp.moment_commutator_identity": 1e-10,
    "lp.moment_commutator_cutoff": 1e-13,
    "biot_savart.div_u": 1e-12,
    "biot_savart.curl_roundtrip": 1e-10,
    "biot_savart.velocity_roundtrip": 1e-10,
    "biot_savart.taylor_green_velocity": 1e-8,
    "biot_savart.taylor_green_pressure": 1e-8,
    "biot_savart.pressure_residual": 1e-10,
    "biot_savart.kernel_bound": 100.0,
    "biot_savart.kernel_scale_invariance": 2.0,
    "geometry.radial_moment": 1e-12,
    "geometry.omega_r": 1e-12,
    "geometry.omega_theta": 1e-12,
    "geometry.div_omega": 1e-10,
    "geometry.u_dot_h": 1e-8,
    "geometry.div_u_tilde": 1e-8,
    "geometry.boundary_mass": 1e-6,
    "geometry.axisymmetric_nonzero_modes": 1e-12,
    "full3d.omega_r": 1e-3,
    "full3d.radial_moment": 1e-3,
    "reduction.discrepancy": 1e-3,
    "conservation.wz_L2": 1e-3,
    "conservation.energy": 1e-3,
    "conservation.boundary_mass": 1e-6,
    "symmetry.z_independent": 1e-10,
    "decomposition.reconstruction_t0": 1e-10,
    "decomposition.cutoff_t0": 1e-13,
    "decomposition.reconstruction_t": 1e-6,
    "decomposition.linearity": 1e-12,
}

# checks listed under ``verify --biot-savart``
BIOT_SAVART_CHECKS = tuple(k for k in DEFAULT_THRESHOLDS if k.startswith("biot_savart."))

VERIFY_T = 0.1


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    threshold: float
    note: str = ""

    @property
    def passed(self) -> bool:
        return math.isfinite(self.value) and self.value <= self.threshold

    def csv(self) -> str:
        status = "pass" if self.passed else "fail"
        return f"{self.name},{self.value!r},{self.threshold!r},{status}"


def random_field(grid: GridSpec, rng: np.random.Generator, kmax: float = 4.0, shape=None) -> np.ndarray:
    """Real smooth periodic field with Gaussian spectral envelope of width kmax, zero mean."""
    shape = grid.shape if shape is None else shape
    coef = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    kx = grid.kx_d
    keep = kx != 0
    keep[0] = True  # only the Nyquist entry of kx_d is an artificial zero
    if len(shape) == 3:
        n = grid.n_d
        keep_z = n != 0
        keep_z[0] = True
        k2 = kx[:, None, None] ** 2 + kx[None, :, None] ** 2 + (2.0 * n[None, None, :]) ** 2
        sel = keep[:, None, None] & keep[None, :, None] & keep_z[None, None, :]
    else:
        k2 = kx[:, None] ** 2 + kx[None, :] ** 2
        sel = keep[:, None] & keep[None, :]
    f = sfft.ifftn(coef * np.exp(-k2 / kmax**2) * sel).real
    return f - f.mean()


def random_divfree(grid: GridSpec, rng: np.random.Generator, kmax: float = 4.0) -> np.ndarray:
    a = np.stack([random_field(grid, rng, kmax) for _ in range(3)])
    w = bs.curl(a, grid)
    return w / np.abs(w).max()


def _rel(a, b) -> float:
    scale = float(np.abs(b).max())
    return float(np.abs(a - b).max()) / scale if scale > 0 else float(np.abs(a - b).max())


# spectral core

def spectral_checks(grid: GridSpec, rng) -> dict[str, float]:
    f = random_field(grid, rng)
    fh = to_spectral(f, grid)
    roundtrip = _rel(to_real(fh, grid), f)
    lhs = np.sum(f * f) / f.size
    parseval = abs(lhs - np.sum(np.abs(fh) ** 2)) / lhs
    X, Y, Z = np.broadcast_arrays(grid.X, grid.Y, grid.Z)
    a = math.pi / grid.L
    g = np.exp(np.cos(a * X)) * np.sin(a * Y) * np.cos(2 * Z)
    exact = [
        -a * np.sin(a * X) * g,
        a * np.exp(np.cos(a * X)) * np.cos(a * Y) * np.cos(2 * Z),
        -2 * np.exp(np.cos(a * X)) * np.sin(a * Y) * np.sin(2 * Z),
    ]
    deriv = max(_rel(partial_derivative(g, ax, grid), exact[ax]) for ax in range(3))
    return {"spectral.roundtrip": roundtrip, "spectral.parseval": float(parseval),
            "spectral.derivative": deriv}


# Littlewood-Paley

def resolved_annulus(grid: GridSpec, profile: DyadicProfile) -> np.ndarray:
    """Modes where the truncated partition sums to one: 2^qmin 4/3 <= |xi| <= 2^(qmax+1) 3/4."""
    r = grid.KH
    return (r >= 2.0**profile.qmin * 4 / 3) & (r <= 2.0 ** (profile.qmax + 1) * 0.75)


def resolved_bands(grid: GridSpec, profile: DyadicProfile) -> list[int]:
    nyq = grid.N // 2 * grid.k_min
    return [q for q in profile.bands if 2.0**q * 0.75 >= grid.k_min and 2.0**q * 8 / 3 <= nyq]


def partition_defect(grid: GridSpec, profile: DyadicProfile) -> float:
    total = profile.partition_sum(grid.KH)
    return float(np.abs(total - 1.0)[resolved_annulus(grid, profile)].max())


def band_orthogonality(grid: GridSpec, profile: DyadicProfile, f: np.ndarray) -> float:
    scale = float(np.abs(f).max())
    worst = 0.0
    for q in profile.bands:
        dq = apply_band(f, q, profile, grid)
        for k in profile.bands:
            if abs(k - q) >= 2:
                worst = max(worst, float(np.abs(apply_band(dq, k, profile, grid)).max()))
    return worst / scale


def bony_defect(grid: GridSpec, profile: DyadicProfile, u, v) -> float:
    t1, t2, r = bony_decompose(u, v, profile, grid)
    return _rel(t1 + t2 + r, u * v)


def bernstein_sweep(grid: GridSpec, profile: DyadicProfile, f: np.ndarray) -> float:
    worst = 0.0
    for q in resolved_bands(grid, profile):
        dq = apply_band(f, q, profile, grid)
        for k in (0, 1, 2):
            for a, b in ((1, 1), (1, 2), (1, np.inf), (2, 2), (2, np.inf), (np.inf, np.inf)):
                worst = max(worst, bernstein_ratio(dq, q, k, a, b, profile, grid))
    return worst


def moment_identity_defect(grid: GridSpec, profile: DyadicProfile, f: np.ndarray) -> float:
    """Relative mismatch of x Delta_j f - Delta_j(x f) and the kernel term, worst over j and x/y."""
    worst = 0.0
    for j in resolved_bands(grid, profile):
        for axis in ("x", "y"):
            comm, conv = moment_commutator(f, j, axis, profile, grid)
            worst = max(worst, _rel(comm, conv))
    return worst


def moment_cutoff_defect(grid: GridSpec, profile: DyadicProfile, f: np.ndarray) -> float:
    """max over |j - q| >= 5 of ||Delta_q(x Delta_j f)||_inf / ||x Delta_j f||_inf."""
    worst = 0.0
    for j in resolved_bands(grid, profile):
        xd = grid.X2 * apply_band(f, j, profile, grid)
        scale = float(np.abs(xd).max())
        if scale == 0:
            continue
        for q in profile.bands:
            if abs(j - q) >= 5:
                worst = max(worst, float(np.abs(apply_band(xd, q, profile, grid)).max()) / scale)
    return worst


def compact_test_field(grid: GridSpec) -> np.ndarray:
    """Smooth bump well inside the box, the test function of the moment checks."""
    X, Y = grid.X2, grid.Y2
    s = 0.1 * grid.L
    return np.exp(-((X - 0.3) ** 2 + (Y + 0.2) ** 2) / s**2) * (1 + 0.3 * np.cos(2 * X))


def lp_checks(grid: GridSpec, profile: DyadicProfile, rng) -> dict[str, float]:
    f2 = random_field(grid, rng, kmax=0.25 * grid.N * grid.k_min, shape=grid.shape2d)
    u = random_field(grid, rng, kmax=0.15 * grid.N * grid.k_min, shape=grid.shape2d)
    v = random_field(grid, rng, kmax=0.15 * grid.N * grid.k_min, shape=grid.shape2d)
    g = compact_test_field(grid)
    return {
        "lp.partition_of_unity": partition_defect(grid, profile),
        "lp.band_orthogonality": band_orthogonality(grid, profile, f2),
        "lp.bony_reconstruction": bony_defect(grid, profile, u, v),
        "lp.bernstein_ratio": bernstein_sweep(grid, profile, f2),
        "lp.moment_commutator_identity": moment_identity_defect(grid, profile, g),
        "lp.moment_commutator_cutoff": moment_cutoff_defect(grid, profile, g),
    }


# Biot-Savart

def taylor_green(grid: GridSpec):
    """Vorticity, velocity and pressure of the steady 2D Taylor-Green cell scaled to the box."""
    a = math.pi / grid.L
    X, Y, _ = np.broadcast_arrays(grid.X, grid.Y, grid.Z)
    zero = np.zeros(grid.shape)
    omega = np.stack([zero, zero, 2 * a * np.cos(a * X) * np.cos(a * Y)])
    u = np.stack([-np.cos(a * X) * np.sin(a * Y), np.sin(a * X) * np.cos(a * Y), zero])
    p = -(np.cos(2 * a * X) + np.cos(2 * a * Y)) / 4
    return omega, u, p


def biot_savart_checks(grid: GridSpec, profile: DyadicProfile, rng) -> dict[str, float]:
    w = random_divfree(grid, rng)
    u = bs.velocity_from_vorticity(w, grid)
    du = bs.divergence(u, grid)
    div_u = float(np.abs(du).max()) / float(np.abs(u).max())
    curl_rt = _rel(bs.curl(u, grid), w)
    u2 = bs.leray_project(np.stack([random_field(grid, rng) for _ in range(3)]), grid)
    u2 -= u2.reshape(3, -1).mean(axis=1)[:, None, None, None]
    vel_rt = _rel(bs.velocity_from_vorticity(bs.curl(u2, grid), grid), u2)
    tg_w, tg_u, tg_p = taylor_green(grid)
    tg_vel = _rel(bs.velocity_from_vorticity(tg_w, grid), tg_u)
    tg_pres = _rel(bs.pressure_from_velocity(tg_u, grid), tg_p)
    residual = bs.pressure_residual(bs.pressure_from_velocity(u, grid), u, grid)
    rep = bs.multiplier_bound_check(grid, profile)
    n0 = [r[4] for r in rep.rows if r[1] == 0]
    scale_inv = max(n0) / min(n0) if n0 and min(n0) > 0 else math.inf
    return {
        "biot_savart.div_u": div_u,
        "biot_savart.curl_roundtrip": curl_rt,
        "biot_savart.velocity_roundtrip": vel_rt,
        "biot_savart.taylor_green_velocity": tg_vel,
        "biot_savart.taylor_green_pressure": tg_pres,
        "biot_savart.pressure_residual": residual,
        "biot_savart.kernel_bound": rep.max_normalized if rep.rows else math.inf,
        "biot_savart.kernel_scale_invariance": scale_inv,
    }


# geometry, dynamics and decomposition

def geometry_checks(state: HelicoidalState, profile: HelicoidalProfile) -> dict[str, float]:
    rep = state.report()
    g = state.grid
    axi = HelicoidalProfile(tuple(t for t in profile.terms if t.m == 0))
    axi_energy = (nonzero_mode_energy(axi.sample(g), g) if axi.terms else 0.0)
    scale = max(float(np.abs(state.omega).max()), 1e-300)
    return {
        "geometry.radial_moment": rep["radial_moment"] / scale,
        "geometry.omega_r": rep["omega_r"] / scale,
        "geometry.omega_theta": rep["omega_theta_minus_r_omega_z"] / scale,
        "geometry.div_omega": rep["div_omega"],
        "geometry.u_dot_h": rep["u_dot_h"],
        "geometry.div_u_tilde": rep["div_u_tilde"],
        "geometry.boundary_mass": rep["boundary_mass"],
        "geometry.axisymmetric_nonzero_modes": axi_energy,
    }


def dynamics_checks(state: HelicoidalState, profile: HelicoidalProfile, lp: DyadicProfile,
                    dt: float, T: float = VERIFY_T) -> dict[str, float]:
    g = state.grid
    members = dec.init_members(state.omega_z, g, lp)
    out = {
        "decomposition.reconstruction_t0": dec.reconstruction_error(members, state.omega),
        "decomposition.cutoff_t0": cutoff_at_t0(members, g, lp),
    }
    pair = [m for m in dec.active(members)][:2]
    holder = {"members": members, "lin": None}

    def co_evolve(st, stages):
        if holder["lin"] is None and len(pair) == 2:
            a, b = pair
            s = dec.DecompositionMember(a.q, a.n, a.W + b.W, a.time)
            ea, eb, es = dec.co_evolve_step([a, b, s], stages, g)
            holder["lin"] = _rel(ea.W + eb.W, es.W)
        holder["members"] = dec.co_evolve_step(holder["members"], stages, g)

    cfg = SolverConfig(dt=dt, T=T, besov=False)
    traj = run(state, cfg, "both", callback=co_evolve)
    d = traj.diagnostics
    out["decomposition.reconstruction_t"] = dec.reconstruction_error(holder["members"], traj.final.omega)
    out["decomposition.linearity"] = holder["lin"] if holder["lin"] is not None else 0.0
    out["full3d.omega_r"] = float(d.column("full_omega_r").max())
    out["full3d.radial_moment"] = float(d.column("full_radial_moment").max())
    out["reduction.discrepancy"] = float(d.column("full_discrepancy").max())
    w2 = d.column("wz_L2")
    e = d.column("u_L2")
    out["conservation.wz_L2"] = float(np.max(np.abs(w2 - w2[0])) / w2[0])
    out["conservation.energy"] = float(np.max(np.abs(e - e[0])) / e[0])
    out["conservation.boundary_mass"] = float(d.column("boundary_mass").max())
    axi = HelicoidalProfile(tuple(t for t in profile.terms if t.m == 0))
    if axi.terms:
        s0 = generate_initial_data(axi, g, check_support=False)
        tr = run(s0, SolverConfig(dt=dt, T=T, besov=False), "reduced")
        out["symmetry.z_independent"] = nonzero_mode_energy(tr.final.omega_z, g)
    else:
        out["symmetry.z_independent"] = 0.0
    return out


def cutoff_at_t0(members, grid: GridSpec, lp: DyadicProfile) -> float:
    worst = 0.0
    for m in dec.active(members):
        decay = dec.band_decay_profile(m, grid, lp)
        peak = max(float(v.max()) for v in decay.values())
        if peak == 0:
            continue
        far = [float(v.max()) for j, v in decay.items() if abs(j - m.q) >= 5]
        if far:
            worst = max(worst, max(far) / peak)
    return worst


@dataclass
class VerifyReport:
    results: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def lines(self) -> list[str]:
        return ["name,value,threshold,status"] + [r.csv() for r in self.results]

    def text(self) -> str:
        return "\n".join(self.lines()) + "\n"

    def summary(self) -> str:
        failed = [r.name for r in self.results if not r.passed]
        head = f"{len(self.results) - len(failed)}/{len(self.results)} checks passed"
        return head if not failed else head + "; failed: " + ", ".join(failed)


def run_verify(grid: GridSpec, profile: HelicoidalProfile, seed: int, dt: float = 0.05,
               thresholds: dict | None = None, only=None, check_support: bool = True,
               lp: DyadicProfile | None = None) -> VerifyReport:
    """Run the suite; ``only`` restricts to names with one of the given prefixes."""
    table = dict(DEFAULT_THRESHOLDS)
    for k, v in (thresholds or {}).items():
        if k not in table:
            raise KeyError(f"unknown check {k!r}")
        table[k] = v
    lp = lp or DyadicProfile.default(grid)
    seqs = np.random.SeedSequence(seed).spawn(3)
    rngs = [np.random.Generator(np.random.Philox(s)) for s in seqs]
    wanted = (lambda prefix: only is None or any(p.startswith(prefix) or prefix.startswith(p)
                                                 for p in only))
    values: dict[str, float] = {}
    if wanted("spectral."):
        values.update(spectral_checks(grid, rngs[0]))
    if wanted("lp."):
        values.update(lp_checks(grid, lp, rngs[1]))
    if wanted("biot_savart."):
        values.update(biot_savart_checks(grid, lp, rngs[2]))
    dyn = ("geometry.", "full3d.", "reduction.", "conservation.", "symmetry.", "decomposition.")
    if any(wanted(p) for p in dyn):
        try:
            state = generate_initial_data(profile, grid, check_support=check_support)
        except ProfileError:
            # an unusable profile fails every check that needs it
            values.update({k: math.nan for k in table if k.startswith(dyn)})
        else:
            values.update(geometry_checks(state, profile))
            values.update(dynamics_checks(state, profile, lp, dt))
    results = [CheckResult(k, float(v), table[k]) for k, v in values.items()
               if only is None or any(k.startswith(p) for p in only)]
    return VerifyReport(sorted(results, key=lambda r: r.name))
