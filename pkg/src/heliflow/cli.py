"""Command line harness: ``heliflow init | run | analyze | verify | export``.

Exit codes: 0 success, 1 check failure, 2 configuration error, 3 numerical abort.
Output directories default to ``$HELIFLOW_OUT/<config stem>`` when neither
``--out`` nor ``[output] dir`` is given.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import decomposition as dec
from .diagnostics import DiagnosticsError, DiagnosticsSeries, envelope_report
from .evolve import FullState, NumericalAbort, run
from .helicoidal import HelicoidalState, ProfileError, generate_initial_data
from .io import (
    ConfigError,
    RunConfig,
    SnapshotError,
    export_csv,
    format_config,
    load_config,
    read_snapshot,
    write_snapshot,
)
from .littlewood_paley import BesovParams, DyadicProfile, hybrid_besov_norm
from .verify import BIOT_SAVART_CHECKS, run_verify

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3
OUT_ENV = "HELIFLOW_OUT"

log = logging.getLogger("heliflow")


class CLIError(Exception):
    def __init__(self, message: str, code: int = EXIT_CONFIG):
        super().__init__(message)
        self.code = code


def _config(path) -> RunConfig:
    return load_config(path) if path else RunConfig()


def _out_dir(args, cfg: RunConfig, default_name: str) -> Path:
    if getattr(args, "out", None):
        out = Path(args.out)
    elif cfg.output is not None:
        out = cfg.output
    else:
        root = os.environ.get(OUT_ENV)
        if not root:
            raise CLIError(f"no output directory: pass --out, set [output] dir or ${OUT_ENV}")
        stem = cfg.source.stem if cfg.source is not None else default_name
        out = Path(root) / stem
    out.mkdir(parents=True, exist_ok=True)
    return out


def _initial_state(cfg: RunConfig, check_support: bool = True) -> HelicoidalState:
    if cfg.snapshot is not None:
        state = read_snapshot(cfg.snapshot)
        if isinstance(state, FullState):
            raise CLIError(f"{cfg.snapshot}: a full 3D snapshot cannot seed a helicoidal run")
        return state
    return generate_initial_data(cfg.profile, cfg.grid, check_support=check_support)


def _write_report(path: Path, report: dict) -> None:
    lines = ["defect,value"] + [f"{k},{float(v)!r}" for k, v in report.items()]
    path.write_text("\n".join(lines) + "\n")


# subcommands

def cmd_init(args) -> int:
    cfg = _config(args.config)
    out = _out_dir(args, cfg, "init")
    try:
        state = _initial_state(cfg)
    except ProfileError as exc:
        print(f"profile rejected: {exc}", file=sys.stderr)
        return EXIT_CHECK
    report = state.report()
    write_snapshot(out / "initial", state, report)
    _write_report(out / "generation_report.csv", report)
    (out / "config.ini").write_text(format_config(cfg))
    for k, v in report.items():
        print(f"{k} = {v:.3e}")
    print(f"wrote {out / 'initial.bin'}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args.config)
    out = _out_dir(args, cfg, "run")
    try:
        state = _initial_state(cfg)
    except ProfileError as exc:
        print(f"profile rejected: {exc}", file=sys.stderr)
        return EXIT_CHECK
    (out / "config.ini").write_text(format_config(cfg))
    write_snapshot(out / "initial", state, state.report())
    profile = cfg.analysis.profile(cfg.grid)
    code = EXIT_OK
    try:
        traj = run(state, cfg.solver, cfg.mode, profile=profile)
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        traj = exc.trajectory
        code = EXIT_ABORT
    snaps = out / "snapshots"
    snaps.mkdir(exist_ok=True)
    for i, (_, s) in enumerate(traj.snapshots):
        write_snapshot(snaps / f"snap_{i:04d}", s)
    traj.diagnostics.write_csv(out / "diagnostics.csv")
    if traj.final is not None:
        write_snapshot(out / "final", traj.final)
    if traj.full_final is not None and traj.full_final is not traj.final:
        write_snapshot(out / "final_full3d", traj.full_final)
    if code == EXIT_OK and len(traj.diagnostics) >= 10:
        env = envelope_report(traj.diagnostics)
        (out / "envelope.txt").write_text("\n".join(env.lines()) + "\n")
        if not env.passed:
            print("growth envelope crossed", file=sys.stderr)
            code = EXIT_CHECK
    print(f"{len(traj.diagnostics)} rows, {traj.dt_reductions} CFL reductions; wrote {out}")
    return code


def _parse_bands(text: str) -> tuple[int, int]:
    try:
        a, b = (int(t) for t in text.split(":"))
    except ValueError:
        raise CLIError(f"--bands expects qmin:qmax, got {text!r}") from None
    if a > b:
        raise CLIError(f"--bands: qmin {a} > qmax {b}")
    return a, b


def _analysis_inputs(args):
    """(config, directory or None, snapshot state) for analyze."""
    target = Path(args.target)
    if target.is_dir():
        cfg_path = target / "config.ini"
        cfg = load_config(cfg_path) if cfg_path.exists() else RunConfig()
        snap = target / "final.bin"
        if not snap.exists():
            snap = target / "initial.bin"
        return cfg, target, read_snapshot(snap)
    return RunConfig(), None, read_snapshot(target)


def cmd_analyze(args) -> int:
    try:
        cfg, directory, state = _analysis_inputs(args)
    except (SnapshotError, OSError) as exc:
        raise CLIError(str(exc)) from None
    g = state.grid
    bands = _parse_bands(args.bands) if args.bands else cfg.analysis.bands
    profile = DyadicProfile(*bands) if bands else DyadicProfile.default(g)
    norms = tuple(BesovParams.parse(t) for t in args.norm) if args.norm else cfg.analysis.norms
    if args.decomposition:
        if directory is None:
            raise CLIError("--decomposition needs a trajectory directory")
        return _analyze_decomposition(cfg, directory, profile, norms[0], args)
    omega_z = state.omega_z if isinstance(state, HelicoidalState) else state.omega[2]
    lines = ["norm,q,n,band_norm"]
    totals = []
    for params in norms:
        hyb = hybrid_besov_norm(omega_z, params, profile, g)
        for n, bn in hyb.modes.items():
            for q, v in zip(profile.bands, bn.band_norms):
                lines.append(f"{params.label()},{q},{n},{float(v)!r}")
            lines.append(f"{params.label()},low,{n},{bn.low_remainder!r}")
            lines.append(f"{params.label()},high,{n},{bn.high_remainder!r}")
        lines.append(f"{params.label()},total,all,{hyb.value!r}")
        totals.append(f"{params.label()} = {hyb.value:.6e}")
    text = "\n".join(lines) + "\n"
    report = Path(args.report) if args.report else (directory / "besov_norms.csv" if directory else None)
    if report is not None:
        report.write_text(text)
    else:
        sys.stdout.write(text)
    for t in totals:
        print(t, file=sys.stderr if report is None else sys.stdout)
    code = EXIT_OK
    diag = directory / "diagnostics.csv" if directory else None
    if diag is not None and diag.exists():
        series = DiagnosticsSeries.read_csv(diag)
        if len(series) < 10:
            print(f"envelope: skipped, only {len(series)} diagnostics rows")
            return code
        try:
            env = envelope_report(series)
        except DiagnosticsError as exc:
            print(f"envelope: {exc}", file=sys.stderr)
            return EXIT_CHECK
        print("\n".join(env.lines()))
        code = EXIT_OK if env.passed else EXIT_CHECK
    return code


def _analyze_decomposition(cfg: RunConfig, directory: Path, profile: DyadicProfile,
                           params: BesovParams, args) -> int:
    initial = read_snapshot(directory / "initial.bin")
    if not isinstance(initial, HelicoidalState):
        raise CLIError("decomposition needs a helicoidal initial snapshot")
    g = initial.grid
    holder = {"members": dec.init_members(initial.omega_z, g, profile)}

    def co_evolve(state, stages):
        holder["members"] = dec.co_evolve_step(holder["members"], stages, g, cfg.solver.dealias)

    try:
        traj = run(initial, cfg.solver, "reduced", callback=co_evolve)
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    members = dec.active(holder["members"])
    lines = ["q,n,j,x,y,z"]
    slopes = []
    for m in members:
        decay = dec.band_decay_profile(m, g, profile)
        for j, v in decay.items():
            lines.append(f"{m.q},{m.n},{j}," + ",".join(repr(float(c)) for c in v))
        slopes.append(dec.decay_slope(decay, m.q))
    (directory / "band_decay.csv").write_text("\n".join(lines) + "\n")
    budget = dec.besov_budget_report(members, g, profile, params)
    (directory / "besov_budget.csv").write_text("\n".join(budget.csv_lines()) + "\n")
    err = dec.reconstruction_error(holder["members"], traj.final.omega)
    finite = [s for s in slopes if np.isfinite(s)]
    print(f"{len(members)} active members; reconstruction error {err:.3e} at t={traj.final.time:.6g}")
    if finite:
        print(f"steepest band decay slope {min(finite):.3f}, shallowest {max(finite):.3f}")
    print(f"wrote {directory / 'band_decay.csv'} and {directory / 'besov_budget.csv'}")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    only = list(args.only or [])
    if args.biot_savart:
        only.append("biot_savart.")
    grid = cfg.grid if args.N is None else type(cfg.grid)(L=cfg.grid.L, N=args.N, Nz=cfg.grid.Nz)
    try:
        report = run_verify(grid, cfg.profile, seed, dt=cfg.solver.dt if args.config else 0.05,
                            thresholds=cfg.thresholds, only=only or None,
                            check_support=not args.no_support_check,
                            lp=DyadicProfile(*cfg.analysis.bands) if cfg.analysis.bands else None)
    except KeyError as exc:
        raise CLIError(f"thresholds: {exc.args[0]}") from None
    if args.biot_savart:
        missing = set(BIOT_SAVART_CHECKS) - {r.name for r in report.results}
        assert not missing, missing
    if args.report:
        Path(args.report).write_text(report.text())
    else:
        sys.stdout.write(report.text())
    print(report.summary(), file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_CHECK


def cmd_export(args) -> int:
    try:
        state = read_snapshot(args.snapshot)
    except (SnapshotError, OSError) as exc:
        raise CLIError(str(exc)) from None
    out = Path(args.out) if args.out else Path(args.snapshot).with_suffix(".csv")
    export_csv(state, out)
    print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="heliflow", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("init", help="generate initial data and its defect report")
    s.add_argument("--config")
    s.add_argument("--out")
    s.set_defaults(func=cmd_init)

    s = sub.add_parser("run", help="integrate and write snapshots plus diagnostics.csv")
    s.add_argument("--config")
    s.add_argument("--out")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("analyze", help="Besov norms, envelopes and the band decomposition")
    s.add_argument("target", help="trajectory directory or snapshot file")
    s.add_argument("--norm", action="append", metavar="s,p,r")
    s.add_argument("--bands", metavar="qmin:qmax")
    s.add_argument("--report", metavar="PATH")
    s.add_argument("--decomposition", action="store_true")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("verify", help="run the invariant suite and print a CSV report")
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--N", type=int, help="override the grid size")
    s.add_argument("--only", action="append", metavar="PREFIX")
    s.add_argument("--biot-savart", action="store_true", help="only the Biot-Savart checks")
    s.add_argument("--no-support-check", action="store_true",
                   help="accept profiles whose support reaches the boundary frame")
    s.add_argument("--report", metavar="PATH")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("export", help="snapshot to CSV")
    s.add_argument("snapshot")
    s.add_argument("--out")
    s.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
