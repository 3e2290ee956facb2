"""Run configuration (INI text) and snapshot files.

Snapshot layout: a binary file starting with the line ``HLX1``, then a text
line ``N Nz L ncomp``, then ncomp * N * N * Nz little-endian float64 values
in row-major (component, x, y, z) order.  A JSON sidecar with the same stem
holds the time, the velocity gauge and the state kind.
"""

from __future__ import annotations

import configparser
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .evolve import MODES, FullState, SolverConfig
from .grid import GridSpec
from .helicoidal import HarmonicTerm, HelicoidalProfile, HelicoidalState
from .littlewood_paley import BesovParams, DyadicProfile

MAGIC = b"HLX1\n"
RNG_ALGORITHMS = ("philox",)


class ConfigError(ValueError):
    pass


_PI_EXPR = re.compile(r"^\s*([-+]?\d*\.?\d*(?:[eE][-+]?\d+)?)\s*\*?\s*pi\s*$")


def parse_real(text: str) -> float:
    """A float, or a multiple of pi written as '2*pi', '2pi' or 'pi'."""
    m = _PI_EXPR.match(text)
    if m:
        coef = m.group(1)
        return (float(coef) if coef not in ("", "+", "-") else float(coef + "1")) * math.pi
    return float(text)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "yes", "true", "on"):
        return True
    if t in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"expected yes/no, got {text!r}")


@dataclass
class AnalysisConfig:
    bands: tuple[int, int] | None = None
    norms: tuple[BesovParams, ...] = (BesovParams(0.0, np.inf, 1),)
    decomposition: bool = False

    def profile(self, grid: GridSpec) -> DyadicProfile:
        if self.bands is None:
            return DyadicProfile.default(grid)
        return DyadicProfile(*self.bands)


@dataclass
class RunConfig:
    grid: GridSpec = field(default_factory=GridSpec)
    profile: HelicoidalProfile | None = field(
        default_factory=lambda: HelicoidalProfile.shielded_vortex(helical=0.6))
    snapshot: Path | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    mode: str = "reduced"
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    output: Path | None = None
    seed: int = 20240611
    rng_algorithm: str = "philox"
    thresholds: dict[str, float] = field(default_factory=dict)
    source: Path | None = None

    def rng(self, stream: int = 0) -> np.random.Generator:
        """Counter-based generator; independent streams are spawned from the seed."""
        seq = np.random.SeedSequence(self.seed).spawn(stream + 1)[stream]
        return np.random.Generator(np.random.Philox(seq))


def _locate(text: str, section: str, key: str) -> int | None:
    cur = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            cur = s[1:-1].strip().lower()
        elif cur == section.lower() and re.match(rf"{re.escape(key)}\s*[=:]", s, re.I):
            return i
    return None


def _where(path, text, section, key) -> str:
    line = _locate(text, section, key)
    loc = f"{path}:{line}" if line else str(path)
    return f"{loc}: [{section}] {key}"


KNOWN = {
    "grid": {"n", "nz", "l"},
    "profile": {"snapshot"},  # plus term* keys
    "solver": {"dt", "t", "cfl", "mode", "snapshot_every", "dealias", "besov"},
    "analysis": {"bands", "norms", "decomposition"},
    "output": {"dir"},
    "rng": {"algorithm", "seed"},
    "thresholds": None,
}


def parse_config_text(text: str, path: str = "<config>", base: Path | None = None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for section in cp.sections():
        if section.lower() not in KNOWN:
            raise ConfigError(f"{path}:{_locate_section(text, section)}: unknown section [{section}]")
        allowed = KNOWN[section.lower()]
        for key in cp[section]:
            if allowed is None or key in allowed or (section.lower() == "profile" and key.startswith("term")):
                continue
            raise ConfigError(f"{_where(path, text, section, key)}: unknown key")

    def get(section, key, conv, default):
        if not cp.has_option(section, key):
            return default
        raw = cp.get(section, key)
        try:
            return conv(raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{_where(path, text, section, key)}: {exc}") from None

    cfg = RunConfig(source=Path(path) if path != "<config>" else None)
    base = base or Path(".")
    L, N, Nz = get("grid", "l", parse_real, 2 * math.pi), get("grid", "n", int, 128), get("grid", "nz", int, 8)
    try:
        cfg.grid = GridSpec(L=L, N=N, Nz=Nz)
    except ValueError as exc:
        raise ConfigError(f"{path}: [grid] {exc}") from None

    if cp.has_section("profile"):
        terms = []
        for key in sorted((k for k in cp["profile"] if k.startswith("term")), key=_term_order):
            terms.append(get("profile", key, _parse_term, None))
        snap = get("profile", "snapshot", str, None)
        if snap and terms:
            raise ConfigError(f"{path}: [profile] give either term lines or a snapshot, not both")
        if snap:
            p = Path(snap)
            cfg.snapshot = p if p.is_absolute() else base / p
            if not cfg.snapshot.exists():
                raise ConfigError(f"{_where(path, text, 'profile', 'snapshot')}: no such file {cfg.snapshot}")
            cfg.profile = None
        elif terms:
            cfg.profile = HelicoidalProfile(tuple(terms))

    solver = dict(
        dt=get("solver", "dt", float, 0.02), T=get("solver", "t", float, 1.0),
        cfl=get("solver", "cfl", float, 0.5),
        snapshot_every=get("solver", "snapshot_every", int, 10),
        dealias=get("solver", "dealias", _bool, True), besov=get("solver", "besov", _bool, True),
    )
    try:
        cfg.solver = SolverConfig(**solver)
    except ValueError as exc:
        raise ConfigError(f"{path}: [solver] {exc}") from None
    cfg.mode = get("solver", "mode", str.strip, "reduced")
    if cfg.mode not in MODES:
        raise ConfigError(f"{_where(path, text, 'solver', 'mode')}: must be one of {', '.join(MODES)}")

    bands = get("analysis", "bands", _parse_pair, None)
    norms = get("analysis", "norms", _parse_norms, (BesovParams(0.0, np.inf, 1),))
    cfg.analysis = AnalysisConfig(bands, norms, get("analysis", "decomposition", _bool, False))
    if bands is not None and bands[0] > bands[1]:
        raise ConfigError(f"{_where(path, text, 'analysis', 'bands')}: qmin > qmax")

    out = get("output", "dir", str, None)
    cfg.output = Path(out) if out else None
    cfg.seed = get("rng", "seed", int, cfg.seed)
    cfg.rng_algorithm = get("rng", "algorithm", str.strip, "philox").lower()
    if cfg.rng_algorithm not in RNG_ALGORITHMS:
        raise ConfigError(f"{_where(path, text, 'rng', 'algorithm')}: unsupported {cfg.rng_algorithm!r}")
    if cp.has_section("thresholds"):
        cfg.thresholds = {k: get("thresholds", k, float, None) for k in cp["thresholds"]}
    return cfg


def _locate_section(text: str, section: str):
    for i, line in enumerate(text.splitlines(), 1):
        if line.strip() == f"[{section}]":
            return i
    return "?"


def _term_order(key: str):
    digits = key[4:]
    return (int(digits) if digits.isdigit() else math.inf, key)


def _parse_term(text: str) -> HarmonicTerm:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 5:
        raise ValueError("term needs 5 values: amplitude, m, phase, center, width")
    a, m, ph, c, w = parts
    return HarmonicTerm(float(a), int(m), parse_real(ph), float(c), float(w))


def _parse_pair(text: str) -> tuple[int, int]:
    a, b = (int(t) for t in text.split(","))
    return a, b


def _parse_norms(text: str) -> tuple[BesovParams, ...]:
    return tuple(BesovParams.parse(t) for t in text.split(";") if t.strip())


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config_text(text, str(path), path.parent)


def format_config(cfg: RunConfig) -> str:
    """INI text that parses back to an equivalent configuration."""
    g, s = cfg.grid, cfg.solver
    lines = ["[grid]", f"N = {g.N}", f"Nz = {g.Nz}", f"L = {g.L!r}", "", "[profile]"]
    if cfg.snapshot is not None:
        lines.append(f"snapshot = {Path(cfg.snapshot).resolve()}")
    elif cfg.profile is not None:
        for i, t in enumerate(cfg.profile.terms, 1):
            lines.append(f"term{i} = {t.amplitude!r}, {t.m}, {t.phase!r}, {t.center!r}, {t.width!r}")
    lines += ["", "[solver]", f"dt = {s.dt!r}", f"T = {s.T!r}", f"cfl = {s.cfl!r}",
              f"mode = {cfg.mode}", f"snapshot_every = {s.snapshot_every}",
              f"dealias = {'yes' if s.dealias else 'no'}", f"besov = {'yes' if s.besov else 'no'}",
              "", "[analysis]"]
    a = cfg.analysis
    if a.bands is not None:
        lines.append(f"bands = {a.bands[0]}, {a.bands[1]}")
    lines.append("norms = " + "; ".join(f"{p.s!r},{_inf(p.p)},{_inf(p.r)}" for p in a.norms))
    lines.append(f"decomposition = {'yes' if a.decomposition else 'no'}")
    lines += ["", "[rng]", f"algorithm = {cfg.rng_algorithm}", f"seed = {cfg.seed}"]
    if cfg.thresholds:
        lines += ["", "[thresholds]"] + [f"{k} = {v!r}" for k, v in sorted(cfg.thresholds.items())]
    return "\n".join(lines) + "\n"


def _inf(v) -> str:
    return "inf" if v == np.inf else f"{v:g}"


# snapshots

def write_snapshot(path, state, report: dict | None = None) -> Path:
    """Write a HelicoidalState (vertical vorticity) or FullState (3 components)."""
    path = Path(path).with_suffix(".bin")
    g = state.grid
    if isinstance(state, FullState):
        kind, data = "full3d", state.omega
    else:
        kind, data = "reduced", state.omega_z[None]
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(f"{g.N} {g.Nz} {g.L!r} {data.shape[0]}\n".encode())
        fh.write(np.ascontiguousarray(data, dtype="<f8").tobytes())
    meta = {"kind": kind, "time": state.time, "mean": [float(m) for m in state.mean],
            "N": g.N, "Nz": g.Nz, "L": g.L}
    if report:
        meta["report"] = {k: float(v) for k, v in report.items()}
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


class SnapshotError(ValueError):
    pass


def read_snapshot(path):
    path = Path(path)
    if path.suffix != ".bin":
        path = path.with_suffix(".bin")
    with open(path, "rb") as fh:
        if fh.readline() != MAGIC:
            raise SnapshotError(f"{path}: not a snapshot file")
        try:
            n, nz, L, ncomp = fh.readline().split()
            n, nz, ncomp, L = int(n), int(nz), int(ncomp), float(L)
        except ValueError:
            raise SnapshotError(f"{path}: bad header") from None
        raw = fh.read()
    g = GridSpec(L=L, N=n, Nz=nz)
    expected = ncomp * n * n * nz * 8
    if len(raw) != expected:
        raise SnapshotError(f"{path}: expected {expected} bytes of data, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f8").reshape((ncomp,) + g.shape).astype(float)
    meta_path = path.with_suffix(".json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    mean = np.array(meta.get("mean", [0.0, 0.0, 0.0]))
    time = float(meta.get("time", 0.0))
    if ncomp == 1:
        return HelicoidalState.from_omega_z(data[0], g, mean, time)
    from .biot_savart import velocity_from_vorticity
    return FullState(g, data, velocity_from_vorticity(data, g, mean=mean, div_tol=None), time, mean)


def export_csv(state, path) -> None:
    """Point values x, y, z and the vorticity (plus velocity) as CSV for plotting."""
    g = state.grid
    X, Y, Z = np.meshgrid(g.x, g.x, g.z, indexing="ij")
    cols = {"x": X, "y": Y, "z": Z}
    for i, c in enumerate(("omega_x", "omega_y", "omega_z")):
        cols[c] = state.omega[i]
    for i, c in enumerate(("u_x", "u_y", "u_z")):
        cols[c] = state.u[i]
    table = np.column_stack([v.ravel() for v in cols.values()])
    np.savetxt(path, table, delimiter=",", header=",".join(cols), comments="", fmt="%.17g")
