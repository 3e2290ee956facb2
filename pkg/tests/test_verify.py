import math
import time

import numpy as np
import pytest

from heliflow.grid import GridSpec
from heliflow.verify import (
    BIOT_SAVART_CHECKS,
    DEFAULT_THRESHOLDS,
    CheckResult,
    random_field,
    run_verify,
)

# known shortfalls of the reference configuration, see the acceptance suite
KNOWN_RED = {
    "geometry.u_dot_h",
    "geometry.div_u_tilde",
    "lp.moment_commutator_identity",
    "lp.moment_commutator_cutoff",
}


class TestCheckResult:
    def test_csv(self):
        r = CheckResult("a.b", 1e-3, 1e-2)
        assert r.passed and r.csv() == "a.b,0.001,0.01,pass"
        assert not CheckResult("a.b", 0.1, 1e-2).passed
        assert not CheckResult("a.b", math.nan, 1.0).passed


class TestRandomField:
    def test_zero_mean_no_nyquist(self):
        g = GridSpec(N=16, Nz=8)
        f = random_field(g, np.random.default_rng(0))
        fh = np.fft.fftn(f)
        assert abs(f.mean()) < 1e-15
        assert np.abs(fh[g.N // 2]).max() < 1e-12
        assert np.abs(fh[:, :, g.Nz // 2]).max() < 1e-12


class TestSmoke:
    def test_n16_completes_quickly_and_covers_every_check(self, helical_profile):
        t0 = time.perf_counter()
        rep = run_verify(GridSpec(N=16), helical_profile, 1)
        assert time.perf_counter() - t0 < 30
        assert [r.name for r in rep.results] == sorted(DEFAULT_THRESHOLDS)
        assert rep.lines()[0] == "name,value,threshold,status"
        assert "checks passed" in rep.summary()

    def test_only_and_overrides(self, helical_profile):
        rep = run_verify(GridSpec(N=32), helical_profile, 1, only=["biot_savart."],
                         thresholds={"biot_savart.kernel_bound": 1e-9})
        assert {r.name for r in rep.results} == set(BIOT_SAVART_CHECKS)
        kb = next(r for r in rep.results if r.name == "biot_savart.kernel_bound")
        assert kb.threshold == 1e-9 and not kb.passed

    def test_unknown_threshold(self, helical_profile):
        with pytest.raises(KeyError):
            run_verify(GridSpec(N=16), helical_profile, 1, thresholds={"nope": 1.0})


class TestReference:
    def test_report_covers_every_check(self, verify_reports):
        assert [r.name for r in verify_reports[0].results] == sorted(DEFAULT_THRESHOLDS)

    def test_reference_config_passes_everything_else(self, verify_reports):
        failed = {r.name for r in verify_reports[0].results if not r.passed}
        assert failed <= KNOWN_RED

    def test_reference_config_all_pass(self, verify_reports):
        assert verify_reports[0].passed, verify_reports[0].summary()

    def test_fault_injection_trips_boundary_mass(self, grid, broken_profile, verify_reports):
        rep = run_verify(grid, broken_profile, 20240611, check_support=False)
        ref = {r.name: r.passed for r in verify_reports[0].results}
        got = {r.name: r.passed for r in rep.results}
        boundary = {"geometry.boundary_mass", "conservation.boundary_mass"}
        assert not any(got[n] for n in boundary)
        assert all(ref[n] for n in boundary)
        assert {n for n in got if n not in boundary and got[n] != ref[n]} == set()
