import math

import numpy as np
import pytest

from heliflow.evolve import FullState
from heliflow.grid import GridSpec
from heliflow.helicoidal import HelicoidalState
from heliflow.io import (
    ConfigError,
    RunConfig,
    SnapshotError,
    export_csv,
    format_config,
    load_config,
    parse_config_text,
    parse_real,
    read_snapshot,
    write_snapshot,
)

CONFIG = """\
[grid]
N = 64
Nz = 4
L = 2*pi

[profile]
term2 = -1.0, 0, 0, 0, 0.7
term1 = 1.96, 0, 0, 0, 0.5   # listed out of order on purpose

[solver]
dt = 0.01
T = 0.5
cfl = 0.4
mode = both
snapshot_every = 5
dealias = yes
besov = no

[analysis]
bands = -3, 4
norms = 0,inf,1; 1,2,inf
decomposition = yes

[output]
dir = out

[rng]
algorithm = philox
seed = 42

[thresholds]
geometry.u_dot_h = 1e-3
"""


class TestParseReal:
    @pytest.mark.parametrize("text,value", [("2*pi", 2 * math.pi), ("2pi", 2 * math.pi), ("pi", math.pi),
                                            ("-pi", -math.pi), ("0.5 * pi", 0.5 * math.pi), ("3.5", 3.5)])
    def test_values(self, text, value):
        assert parse_real(text) == pytest.approx(value)

    def test_rejects(self):
        with pytest.raises(ValueError):
            parse_real("two pi")


class TestConfig:
    def test_full_config(self):
        cfg = parse_config_text(CONFIG, "c.ini")
        assert cfg.grid == GridSpec(L=2 * math.pi, N=64, Nz=4)
        assert [t.amplitude for t in cfg.profile.terms] == [1.96, -1.0]
        assert (cfg.solver.dt, cfg.solver.T, cfg.solver.cfl, cfg.solver.snapshot_every) == (0.01, 0.5, 0.4, 5)
        assert cfg.mode == "both" and cfg.solver.besov is False
        assert cfg.analysis.bands == (-3, 4) and cfg.analysis.decomposition
        assert [p.label() for p in cfg.analysis.norms] == ["B^0_inf,1", "B^1_2,inf"]
        assert str(cfg.output) == "out" and cfg.seed == 42
        assert cfg.thresholds == {"geometry.u_dot_h": 1e-3}

    def test_defaults(self):
        cfg = parse_config_text("")
        assert cfg == RunConfig(source=None)
        assert len(cfg.profile.terms) == 3

    def test_format_roundtrip(self):
        cfg = parse_config_text(CONFIG, "c.ini")
        again = parse_config_text(format_config(cfg), "c.ini")
        assert again.grid == cfg.grid and again.profile == cfg.profile
        assert again.solver == cfg.solver and again.analysis == cfg.analysis
        assert again.thresholds == cfg.thresholds and again.seed == cfg.seed

    @pytest.mark.parametrize("text,where", [
        ("[grid]\nN = abc\n", "c.ini:2: [grid] n"),
        ("[grid]\nN = 12\n", "[grid]"),
        ("[grid]\nN = 64\nsize = 3\n", "c.ini:3: [grid] size: unknown key"),
        ("[extras]\n", "c.ini:1: unknown section"),
        ("[profile]\nterm1 = 1, 0, 0\n", "c.ini:2: [profile] term1"),
        ("[solver]\nmode = quantum\n", "c.ini:2: [solver] mode"),
        ("[solver]\ndt = -1\n", "[solver]"),
        ("[analysis]\nnorms = 0,3,1\n", "c.ini:2: [analysis] norms"),
        ("[analysis]\nbands = 4, -3\n", "qmin > qmax"),
        ("[rng]\nalgorithm = mt19937\n", "c.ini:2: [rng] algorithm"),
        ("[solver]\ndealias = maybe\n", "c.ini:2: [solver] dealias"),
        ("[profile]\nsnapshot = /nonexistent/x.bin\n", "no such file"),
        ("no section\n", "c.ini"),
    ])
    def test_errors_point_at_line(self, text, where):
        with pytest.raises(ConfigError) as exc:
            parse_config_text(text, "c.ini")
        assert where in str(exc.value)

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "none.ini")

    def test_snapshot_path_relative_to_config(self, tmp_path, helical_state):
        write_snapshot(tmp_path / "init", helical_state)
        (tmp_path / "c.ini").write_text("[profile]\nsnapshot = init.bin\n")
        cfg = load_config(tmp_path / "c.ini")
        assert cfg.profile is None and cfg.snapshot == tmp_path / "init.bin"

    def test_rng_streams_reproducible(self):
        cfg = RunConfig(seed=5)
        a = cfg.rng(0).standard_normal(4)
        np.testing.assert_array_equal(a, RunConfig(seed=5).rng(0).standard_normal(4))
        assert not np.array_equal(a, cfg.rng(1).standard_normal(4))


class TestSnapshots:
    def test_reduced_roundtrip(self, tmp_path, helical_state):
        path = write_snapshot(tmp_path / "s", helical_state, {"defect": 1e-3})
        assert path.suffix == ".bin" and path.with_suffix(".json").exists()
        back = read_snapshot(path)
        assert isinstance(back, HelicoidalState)
        np.testing.assert_array_equal(back.omega_z, helical_state.omega_z)
        np.testing.assert_array_equal(back.u, helical_state.u)
        np.testing.assert_array_equal(back.mean, helical_state.mean)

    def test_full_roundtrip(self, tmp_path, helical_state):
        full = FullState.from_helicoidal(helical_state)
        back = read_snapshot(write_snapshot(tmp_path / "f", full))
        assert isinstance(back, FullState)
        np.testing.assert_array_equal(back.omega, full.omega)

    def test_header_layout(self, tmp_path, helical_state):
        raw = write_snapshot(tmp_path / "s", helical_state).read_bytes()
        lines = raw.split(b"\n", 2)
        assert lines[0] == b"HLX1"
        assert lines[1].split()[0] == b"128" and lines[1].split()[3] == b"1"
        assert len(lines[2]) == 128 * 128 * 8 * 8

    def test_rejects_foreign_and_truncated(self, tmp_path, helical_state):
        (tmp_path / "x.bin").write_bytes(b"hello\n")
        with pytest.raises(SnapshotError, match="not a snapshot"):
            read_snapshot(tmp_path / "x.bin")
        p = write_snapshot(tmp_path / "t", helical_state)
        p.write_bytes(p.read_bytes()[:-8])
        with pytest.raises(SnapshotError, match="bytes"):
            read_snapshot(p)

    def test_export_csv(self, tmp_path):
        g = GridSpec(L=2.0, N=8, Nz=2)
        s = HelicoidalState.from_omega_z(np.zeros(g.shape), g, np.zeros(3))
        export_csv(s, tmp_path / "e.csv")
        lines = (tmp_path / "e.csv").read_text().splitlines()
        assert lines[0] == "x,y,z,omega_x,omega_y,omega_z,u_x,u_y,u_z"
        assert len(lines) == 1 + 8 * 8 * 2
