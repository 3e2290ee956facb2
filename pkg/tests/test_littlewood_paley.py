import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heliflow.grid import GridSpec
from heliflow.littlewood_paley import (
    BesovParams,
    DyadicProfile,
    apply_band,
    band_moment,
    band_pieces,
    bernstein_ratio,
    besov_norm,
    bony_decompose,
    chi,
    dchi,
    delta_q,
    dphi,
    hybrid_besov_norm,
    moment_commutator,
    paraproduct_term,
    phi,
    s_q,
)
from heliflow.verify import compact_test_field, random_field


@pytest.fixture(scope="module")
def g64():
    return GridSpec(N=64, Nz=4)


@pytest.fixture(scope="module")
def p64(g64):
    return DyadicProfile.default(g64)


class TestProfileFunctions:
    def test_chi_plateaus(self):
        assert np.all(chi(np.linspace(0, 0.75, 11)) == 1.0)
        assert np.all(chi(np.linspace(4 / 3, 10, 11)) == 0.0)

    def test_phi_support(self):
        s = np.linspace(0, 6, 2001)
        v = phi(s)
        assert np.all(v[(s < 0.75) | (s > 8 / 3)] == 0.0)
        assert np.all(v >= 0) and v.max() == pytest.approx(1.0)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.8, 1e3))
    def test_telescoping_sum(self, s):
        # any s > 0 is covered by at most two neighbouring dyadic copies
        q = math.floor(math.log2(s))
        total = sum(phi(2.0 ** (-j) * s) for j in range(q - 3, q + 4))
        assert total == pytest.approx(1.0, abs=1e-14)

    def test_derivatives_match_finite_differences(self):
        s = np.linspace(0.5, 3.0, 301)
        eps = 1e-6
        np.testing.assert_allclose(dchi(s), (chi(s + eps) - chi(s - eps)) / (2 * eps), atol=1e-7)
        np.testing.assert_allclose(dphi(s), (phi(s + eps) - phi(s - eps)) / (2 * eps), atol=1e-7)


class TestDyadicProfile:
    def test_default_bands(self):
        p = DyadicProfile.default(GridSpec())
        assert (p.qmin, p.qmax) == (-5, 5)
        assert p.low == -6 and p.high == 6
        assert list(p.extended_bands) == list(range(-6, 7))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            DyadicProfile(3, 3)

    def test_symbols_sum_to_one(self, g64, p64):
        total = sum(p64.symbol(g64, b) for b in p64.extended_bands)
        np.testing.assert_allclose(total, 1.0, atol=1e-15)

    def test_unknown_band(self, g64, p64):
        with pytest.raises(ValueError):
            p64.symbol(g64, p64.high + 1)

    def test_symbol_gradient_finite_difference(self, g64, p64):
        # gradient along the kx axis at ky = 0, compared with the radial profile
        j = 1
        k = g64.kx_d[: g64.N // 2]
        grad = p64.symbol_gradient(g64, j, 0)[: g64.N // 2, 0]
        np.testing.assert_allclose(grad, 2.0**-j * dphi(2.0**-j * k), atol=1e-14)


class TestBandOperators:
    def test_pieces_reconstruct(self, g64, p64, rng):
        f = random_field(g64, rng, kmax=8.0, shape=g64.shape2d)
        pieces = band_pieces(f, p64, g64)
        assert np.abs(sum(pieces.values()) - f).max() < 1e-13 * np.abs(f).max()

    def test_acts_on_stacks(self, g64, p64, rng):
        f = random_field(g64, rng, shape=g64.shape)
        stacked = apply_band(f, 0, p64, g64)
        sliced = apply_band(f[:, :, 1], 0, p64, g64)
        np.testing.assert_allclose(stacked[:, :, 1], sliced, atol=1e-14)

    def test_far_bands_orthogonal(self, g64, p64, rng):
        f = random_field(g64, rng, kmax=8.0, shape=g64.shape2d)
        d0 = delta_q(f, 0, p64, g64)
        assert np.abs(delta_q(d0, 2, p64, g64)).max() < 1e-15 * np.abs(f).max()

    def test_low_pass_is_sum_of_lower_bands(self, g64, p64, rng):
        f = random_field(g64, rng, kmax=8.0, shape=g64.shape2d)
        lower = apply_band(f, p64.low, p64, g64) + sum(delta_q(f, j, p64, g64) for j in range(p64.qmin, 1))
        np.testing.assert_allclose(s_q(f, 1, p64, g64), lower, atol=1e-13)

    def test_delta_q_range(self, g64, p64):
        with pytest.raises(ValueError):
            delta_q(np.zeros(g64.shape2d), p64.qmax + 1, p64, g64)

    def test_shape_check(self, g64, p64):
        with pytest.raises(ValueError):
            apply_band(np.zeros((8, 8)), 0, p64, g64)

    def test_complex_input(self, g64, p64, rng):
        f = random_field(g64, rng, shape=g64.shape2d) + 1j * random_field(g64, rng, shape=g64.shape2d)
        out = apply_band(f, 0, p64, g64)
        assert np.iscomplexobj(out)
        np.testing.assert_allclose(out.real, apply_band(f.real, 0, p64, g64), atol=1e-14)


class TestBesov:
    def test_parse_and_label(self):
        p = BesovParams.parse("-1, inf, inf")
        assert (p.s, p.p, p.r) == (-1.0, np.inf, np.inf)
        assert p.label() == "B^-1_inf,inf"

    @pytest.mark.parametrize("text", ["0,3,1", "0,inf,2", "0,inf", "a,b,c"])
    def test_parse_rejects(self, text):
        with pytest.raises(ValueError):
            BesovParams.parse(text)

    def test_single_band_field(self, g64, p64):
        # cos(k x) with 2^q * 4/3 <= k <= 2^q * 3/2 sits in band q alone
        k = 4 * g64.k_min  # = 2.0
        f = np.cos(k * g64.X2)
        bn = besov_norm(f, BesovParams(1.0, np.inf, 1), p64, g64)
        nonzero = [q for q, v in zip(p64.bands, bn.band_norms) if v > 1e-14]
        assert len(nonzero) <= 2
        assert bn.low_remainder < 1e-14 and bn.high_remainder < 1e-14
        # the band pieces still add up to f, so the l^1 sum dominates ||f||_inf
        assert bn.value >= 2.0 ** min(nonzero) * 1.0 - 1e-12

    def test_zero_mode_only_in_low_remainder(self, g64, p64):
        bn = besov_norm(np.full(g64.shape2d, 3.0), BesovParams(), p64, g64)
        assert bn.value < 1e-14
        assert bn.low_remainder == pytest.approx(3.0)

    def test_r_infinity_is_max(self, g64, p64, rng):
        f = random_field(g64, rng, kmax=8.0, shape=g64.shape2d)
        b1 = besov_norm(f, BesovParams(0.0, 2, 1), p64, g64)
        binf = besov_norm(f, BesovParams(0.0, 2, np.inf), p64, g64)
        assert binf.value == pytest.approx(b1.band_norms.max())
        assert b1.value == pytest.approx(b1.band_norms.sum())

    def test_hybrid_sums_modes(self, g64, p64, rng):
        f = random_field(g64, rng, kmax=6.0)
        hyb = hybrid_besov_norm(f, BesovParams(), p64, g64)
        assert set(hyb.modes) == {-1, 0, 1}
        assert hyb.value == pytest.approx(sum(m.value for m in hyb.modes.values()))
        # conjugate modes of a real field have equal norms
        assert hyb.modes[1].value == pytest.approx(hyb.modes[-1].value)

    def test_hybrid_shape_check(self, g64, p64):
        with pytest.raises(ValueError):
            hybrid_besov_norm(np.zeros(g64.shape2d), BesovParams(), p64, g64)


class TestBony:
    def test_reconstruction(self, g64, p64, rng):
        u = random_field(g64, rng, kmax=6.0, shape=g64.shape2d)
        v = random_field(g64, rng, kmax=6.0, shape=g64.shape2d)
        t1, t2, r = bony_decompose(u, v, p64, g64)
        assert np.abs(t1 + t2 + r - u * v).max() < 1e-12 * np.abs(u * v).max()

    def test_paraproduct_term_frequency_support(self, g64, p64, rng):
        u = random_field(g64, rng, kmax=12.0, shape=g64.shape2d)
        v = random_field(g64, rng, kmax=12.0, shape=g64.shape2d)
        q = 2
        term = paraproduct_term(u, v, q, p64, g64)
        spec = np.abs(np.fft.fft2(term))
        # S_{q-1} u Delta_q v lives in |xi| <= 2^(q-1) 4/3 + 2^q 8/3
        outside = g64.KH > 2.0 ** (q - 1) * 4 / 3 + 2.0**q * 8 / 3 + 1e-9
        assert spec[outside].max() < 1e-12 * spec.max()


class TestBernstein:
    @pytest.mark.parametrize("k,a,b", [(0, 1, 2), (1, 2, 2), (2, 2, np.inf), (1, np.inf, np.inf)])
    def test_bounded_on_band(self, g64, p64, rng, k, a, b):
        f = random_field(g64, rng, kmax=12.0, shape=g64.shape2d)
        for q in (0, 1, 2):
            assert bernstein_ratio(delta_q(f, q, p64, g64), q, k, a, b, p64, g64) < 100

    def test_rejects_decreasing_exponent(self, g64, p64, rng):
        f = random_field(g64, rng, shape=g64.shape2d)
        with pytest.raises(ValueError):
            bernstein_ratio(f, 0, 1, np.inf, 2, p64, g64)

    def test_rejects_zero_field(self, g64, p64):
        with pytest.raises(ValueError):
            bernstein_ratio(np.zeros(g64.shape2d), 0, 1, 2, 2, p64, g64)


class TestMoments:
    def test_band_moment_sums_to_coordinate_times_field(self, grid, lp):
        f = compact_test_field(grid)
        total = sum(band_moment(f, b, "x", lp, grid) for b in lp.extended_bands)
        np.testing.assert_allclose(total, grid.X2 * f, atol=1e-13)

    def test_band_moment_axis_names(self, grid, lp):
        f = compact_test_field(grid)
        np.testing.assert_array_equal(band_moment(f, 0, 2, lp, grid), band_moment(f, 0, "y", lp, grid))
        with pytest.raises(ValueError):
            band_moment(f, 0, "z", lp, grid)

    def test_commutator_high_band_agreement(self, grid, lp):
        # the identity is exact on R^2; on the box it holds once Delta_j f has decayed
        f = compact_test_field(grid)
        comm, conv = moment_commutator(f, 3, "x", lp, grid)
        assert np.abs(comm - conv).max() < 2e-2 * np.abs(conv).max()

    def test_commutator_range(self, grid, lp):
        with pytest.raises(ValueError):
            moment_commutator(compact_test_field(grid), lp.high, "x", lp, grid)
