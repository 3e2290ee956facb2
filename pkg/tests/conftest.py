import numpy as np
import pytest

from heliflow.grid import GridSpec
from heliflow.helicoidal import HarmonicTerm, HelicoidalProfile, generate_initial_data
from heliflow.littlewood_paley import DyadicProfile
from heliflow.verify import run_verify

VERIFY_SEED = 20240611

# acceptance lines collected by test_acceptance.py, printed after the run
ACCEPTANCE: dict[int, list[tuple[str, bool]]] = {}


def record(criterion: int, label: str, value: float, tol: float, *, upper: bool = True) -> bool:
    """Log one measured quantity against its tolerance; returns pass/fail."""
    ok = bool(np.isfinite(value) and (value <= tol if upper else value >= tol))
    op = "<=" if upper else ">="
    ACCEPTANCE.setdefault(criterion, []).append(
        (f"{label}: {value:.3e} {op} {tol:.1e}", ok))
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for c in sorted(ACCEPTANCE):
        rows = ACCEPTANCE[c]
        status = "PASS" if all(ok for _, ok in rows) else "FAIL"
        tr.write_line(f"criterion {c:2d}: {status}")
        for text, ok in rows:
            tr.write_line(f"    [{'pass' if ok else 'FAIL'}] {text}")


@pytest.fixture(scope="session")
def grid():
    return GridSpec()


@pytest.fixture(scope="session")
def small_grid():
    return GridSpec(N=32, Nz=4)


@pytest.fixture(scope="session")
def lp(grid):
    return DyadicProfile.default(grid)


@pytest.fixture(scope="session")
def helical_profile():
    return HelicoidalProfile.shielded_vortex(helical=0.6)


@pytest.fixture(scope="session")
def axi_profile():
    return HelicoidalProfile.shielded_vortex()


@pytest.fixture(scope="session")
def helical_state(helical_profile, grid):
    return generate_initial_data(helical_profile, grid)


@pytest.fixture(scope="session")
def axi_state(axi_profile, grid):
    return generate_initial_data(axi_profile, grid)


@pytest.fixture(scope="session")
def broken_profile(helical_profile):
    """Reference profile plus a faint ring reaching into the boundary frame."""
    return HelicoidalProfile(helical_profile.terms + (HarmonicTerm(0.005, 1, 0.0, 4.2, 0.3),))


@pytest.fixture(scope="session")
def verify_reports(grid, helical_profile):
    """Two verify runs of the reference configuration with the same seed."""
    return [run_verify(grid, helical_profile, VERIFY_SEED) for _ in range(2)]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
