import math

import numpy as np
import pytest

from heliflow import biot_savart as bs
from heliflow.grid import GridSpec
from heliflow.littlewood_paley import phi
from heliflow.verify import random_divfree, random_field, taylor_green


@pytest.fixture(scope="module")
def g():
    return GridSpec(N=32, Nz=8)


class TestVelocity:
    def test_divergence_free_and_curl(self, g, rng):
        w = random_divfree(g, rng)
        u = bs.velocity_from_vorticity(w, g)
        assert np.abs(bs.divergence(u, g)).max() < 1e-13
        np.testing.assert_allclose(bs.curl(u, g), w, atol=1e-13)

    def test_rejects_divergent_vorticity(self, g, rng):
        w = np.stack([random_field(g, rng) for _ in range(3)])
        with pytest.raises(bs.DivergenceError):
            bs.velocity_from_vorticity(w, g)
        # the check can be skipped
        bs.velocity_from_vorticity(w, g, div_tol=None)

    def test_shape_check(self, g):
        with pytest.raises(ValueError):
            bs.velocity_from_vorticity(np.zeros(g.shape), g)

    def test_mean_mode(self, g, rng):
        w = random_divfree(g, rng)
        u = bs.velocity_from_vorticity(w, g, mean=[0.1, -0.2, 0.3])
        np.testing.assert_allclose(u.reshape(3, -1).mean(axis=1), [0.1, -0.2, 0.3], atol=1e-15)

    def test_taylor_green(self):
        for L in (math.pi, 2 * math.pi):
            g = GridSpec(L=L, N=32, Nz=2)
            w, u, p = taylor_green(g)
            np.testing.assert_allclose(bs.velocity_from_vorticity(w, g), u, atol=1e-13)
            np.testing.assert_allclose(bs.pressure_from_velocity(u, g), p, atol=1e-13)

    def test_vertical_shear(self):
        # u = (sin z, 0, 0) has vorticity (0, cos z, 0)
        g = GridSpec(N=8, Nz=8)
        zero = np.zeros(g.shape)
        w = np.stack([zero, np.cos(g.Z) + zero, zero])
        u = bs.velocity_from_vorticity(w, g)
        np.testing.assert_allclose(u[0], np.sin(g.Z) + zero, atol=1e-14)


class TestImpulseGauge:
    def test_gauge_makes_velocity_orthogonal_to_helices(self, grid, axi_state):
        from heliflow.helicoidal import orthogonality_defect

        w = axi_state.omega
        m = bs.impulse_mean(w, grid)
        assert m[0] == 0.0 and m[1] == 0.0 and m[2] != 0.0
        gauged = bs.velocity_from_vorticity(w, grid, mean=m)
        plain = bs.velocity_from_vorticity(w, grid)
        scale = np.abs(gauged).max()
        assert orthogonality_defect(gauged, grid) / scale < 1e-12
        assert orthogonality_defect(plain, grid) / scale > 1e-3


class TestProjectionAndPressure:
    def test_leray_idempotent(self, g, rng):
        v = np.stack([random_field(g, rng) for _ in range(3)])
        p1 = bs.leray_project(v, g)
        assert np.abs(bs.divergence(p1, g)).max() < 1e-13
        np.testing.assert_allclose(bs.leray_project(p1, g), p1, atol=1e-14)

    def test_pressure_residual(self, g, rng):
        u = bs.velocity_from_vorticity(random_divfree(g, rng), g)
        p = bs.pressure_from_velocity(u, g)
        assert bs.pressure_residual(p, u, g) < 1e-12
        assert bs.pressure_residual(np.zeros(g.shape), u, g) == pytest.approx(1.0)


class TestKernels:
    def test_widened_bump_is_one_on_annulus(self):
        s = np.linspace(0.75, 8 / 3, 200)
        np.testing.assert_allclose(bs.widened_bump(s), 1.0, atol=1e-15)
        assert np.all(phi(s) * bs.widened_bump(s) == phi(s))

    def test_multiplier_table(self):
        g = GridSpec(N=16, Nz=2)
        t = bs.MultiplierTable(g)
        assert t.vertical(0)[0, 0] == 0.0
        kx = g.kx_d[3]
        assert t.horizontal(2, 0)[3, 0] == pytest.approx(kx / (4 + kx**2))

    def test_bound_uniform_in_n_and_j(self, grid, lp):
        rep = bs.multiplier_bound_check(grid, lp, n_max=8)
        assert rep.rows and rep.passed
        # the normalization removes the n dependence up to a bounded factor
        norms = np.array([r[4] for r in rep.rows])
        assert norms.max() / norms.min() < 10

    def test_resolved_bands(self, grid, lp):
        bands = bs.resolved_kernel_bands(grid, lp)
        assert bands == [j for j in bands if 0.75 * 2.0**j >= 2 * grid.k_min]
        assert max(bands) <= lp.qmax

    def test_kernel_decreases_with_n(self, grid):
        a = bs.kernel_l1(grid, 1, 0, 0)
        b = bs.kernel_l1(grid, 1, 16, 0)
        assert b < a
