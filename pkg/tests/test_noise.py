"""Wiener drivers, the noise operator, the magnetic field, and the mode-space
norm."""

import numpy as np
import pytest

from selflow import operators as ops
from selflow.noise import (
    MagneticField,
    NoiseOperatorS,
    WienerDriver,
    apply_noise_d,
    coarsen_normals,
    k2_norm,
    k2_truncation_tail,
    split_seed,
)
from selflow.projection import leray_project


class TestWienerDriver:
    def test_zero_dt_gives_zero_increments(self):
        dB, dW2 = WienerDriver(1, 4).sample_increments(0.0)
        assert np.all(dB == 0.0) and dW2 == 0.0

    def test_negative_dt_rejected(self):
        with pytest.raises(ValueError):
            WienerDriver(1, 4).sample_increments(-1e-3)

    def test_same_seed_identical(self):
        a = [WienerDriver(9, 6).sample_increments(0.01) for _ in range(1)]
        d1 = WienerDriver(9, 6)
        d2 = WienerDriver(9, 6)
        for _ in range(20):
            i1 = d1.sample_increments(0.01)
            i2 = d2.sample_increments(0.01)
            assert np.array_equal(i1[0], i2[0]) and i1[1] == i2[1]

    def test_moments(self):
        # 1e5 draws at dt = 0.01: mean within 4*sqrt(dt/1e5), var within 5%
        dt = 0.01
        n = 100_000
        table = WienerDriver(123, 1).normal_table(n) * np.sqrt(dt)
        w2 = table[:, 1]
        assert abs(w2.mean()) <= 4.0 * np.sqrt(dt / n)
        assert abs(w2.var() - dt) <= 0.05 * dt

    def test_ito_isometry(self):
        # mean over paths of (sum f dB)^2 ~ f^2 T within 5 SE, constant f
        dt, n_steps, m = 0.01, 50, 400
        f = 1.7
        totals = np.empty(m)
        for p in range(m):
            tab = WienerDriver(split_seed(5, p), 1).normal_table(n_steps)
            totals[p] = np.sum(f * tab[:, 0] * np.sqrt(dt))
        sq = totals**2
        target = f**2 * dt * n_steps
        se = sq.std(ddof=1) / np.sqrt(m)
        assert abs(sq.mean() - target) <= 5 * se

    def test_mode_independence(self):
        table = WienerDriver(77, 6).normal_table(4000)
        corr = np.corrcoef(table.T)
        off = corr[~np.eye(7, dtype=bool)]
        assert np.max(np.abs(off)) <= 4.0 / np.sqrt(4000)

    def test_coarsen_preserves_path(self):
        fine = WienerDriver(3, 2).normal_table(16)
        coarse = coarsen_normals(fine, 4)
        dt_f, dt_c = 0.001, 0.004
        w_fine = np.sum(fine * np.sqrt(dt_f), axis=0)
        w_coarse = np.sum(coarse * np.sqrt(dt_c), axis=0)
        assert np.allclose(w_fine, w_coarse, atol=1e-14)

    def test_split_seed_distinct(self):
        seeds = {split_seed(42, i) for i in range(1000)}
        assert len(seeds) == 1000


class TestNoiseOperator:
    def test_zero_increments_zero_field(self, grid32, noise32):
        u = np.ones((2, 32, 32))
        out = noise32.apply_increments(u, np.zeros(8))
        assert np.max(np.abs(out)) == 0.0

    def test_zero_velocity_zero_field(self, grid32, noise32, rng):
        out = noise32.apply_increments(np.zeros((2, 32, 32)), rng.standard_normal(8))
        assert np.max(np.abs(out)) <= 1e-14

    def test_single_mode_identity(self, grid32, rng):
        S1 = NoiseOperatorS(grid32, n_modes=1, sigma0=0.8, shapes=np.ones((1, 32, 32)))
        u, _ = leray_project(rng.standard_normal((2, 32, 32)), grid32)
        out = S1.apply_increments(u, np.array([2.5]))
        assert ops.norm_l2(out - 0.8 * 2.5 * u, grid32) <= 1e-10

    def test_output_divergence_free(self, grid32, noise32, rng):
        out = noise32.apply_increments(rng.standard_normal((2, 32, 32)),
                                       rng.standard_normal(8))
        assert ops.norm_linf(ops.divergence(out, grid32, "periodic")) <= 8 * 1e-10

    def test_increment_length_checked(self, grid32, noise32):
        with pytest.raises(ValueError):
            noise32.apply_increments(np.zeros((2, 32, 32)), np.zeros(5))

    def test_hs_zero_at_origin(self, grid32, noise32):
        assert noise32.hs_norm_sq(np.zeros((2, 32, 32))) <= 1e-28

    def test_hs_single_mode_value(self, grid32, rng):
        S1 = NoiseOperatorS(grid32, n_modes=1, sigma0=0.6, shapes=np.ones((1, 32, 32)))
        u, _ = leray_project(rng.standard_normal((2, 32, 32)), grid32)
        val = S1.hs_norm_sq(u)
        expect = 0.6**2 * ops.inner(u, u, grid32)
        assert abs(val - expect) <= 2e-10 * (1 + expect)

    def test_linear_growth_never_violated(self, grid32, noise32, rng):
        C = noise32.linear_growth_constant()
        for _ in range(100):
            u = rng.standard_normal((2, 32, 32)) * rng.uniform(0.1, 5.0)
            assert noise32.hs_norm_sq(u) <= C * (1 + ops.inner(u, u, grid32))

    def test_growth_bound_under_doubling(self, grid32, noise32, rng):
        C = noise32.linear_growth_constant()
        u = rng.standard_normal((2, 32, 32))
        doubled = noise32.hs_norm_sq(2.0 * u)
        assert doubled <= 4.0 * noise32.hs_norm_sq(u) + 1e-12
        assert doubled <= C * (1 + ops.inner(2.0 * u, 2.0 * u, grid32))

    def test_hs_batched_matches(self, grid32, noise32, rng):
        u = rng.standard_normal((4, 2, 32, 32))
        batched = noise32.hs_norm_sq(u)
        singles = np.array([noise32.hs_norm_sq(u[m]) for m in range(4)])
        assert np.allclose(batched, singles, rtol=1e-12)

    def test_mode_fields_divergence_free(self, grid32, noise32, rng):
        fields = noise32.mode_fields(rng.standard_normal((2, 32, 32)))
        for i in range(8):
            div = ops.divergence(fields[i], grid32, "periodic")
            assert ops.norm_linf(div) <= 1e-10

    def test_additive_seeds(self, grid32, rng):
        # with additive seeds the operator is affine: at u = 0 the output is
        # the weighted projected seed sum and the HS norm is positive
        from selflow.projection import leray_project

        g = np.zeros((2, 2, 32, 32))
        raw = rng.standard_normal((2, 32, 32))
        g[0], _ = leray_project(raw, grid32)
        S = NoiseOperatorS(grid32, n_modes=2, sigma0=0.5, shapes=np.ones((2, 32, 32)),
                           additive=g)
        out = S.apply_increments(np.zeros((2, 32, 32)), np.array([2.0, 0.0]))
        assert ops.norm_l2(out - 0.5 * 2.0 * g[0], grid32) <= 1e-10
        hs0 = S.hs_norm_sq(np.zeros((2, 32, 32)))
        assert hs0 > 0
        C = S.linear_growth_constant()
        assert hs0 <= C


class TestDirectorNoise:
    def test_parallel_vectors_vanish(self, rng):
        d = rng.standard_normal((3, 8, 8))
        assert np.max(np.abs(apply_noise_d(d, 2.0 * d, 1.0))) <= 1e-13

    def test_cross_product_example(self):
        d = np.zeros((3, 4, 4))
        d[0] = 1.0
        h = np.zeros((3, 4, 4))
        h[2] = 1.0
        out = apply_noise_d(d, h, 1.0)
        assert np.allclose(out[1], -1.0) and np.allclose(out[0], 0) and np.allclose(out[2], 0)

    def test_orthogonal_to_director(self, rng):
        d = rng.standard_normal((3, 8, 8))
        h = rng.standard_normal((3, 8, 8))
        out = apply_noise_d(d, h, 0.7)
        assert np.max(np.abs(ops.dot3(out, d))) <= 1e-13


class TestK2Norm:
    def test_first_basis_vector(self):
        assert k2_norm([1, 0, 0, 0]) == 1.0

    def test_ith_basis_vector(self):
        for i in (2, 5, 9):
            coeffs = np.zeros(10)
            coeffs[i - 1] = 1.0
            assert abs(k2_norm(coeffs) - 1.0 / i) <= 1e-15

    def test_zero_sequence(self):
        assert k2_norm([]) == 0.0
        assert k2_norm([0.0, 0.0]) == 0.0

    def test_truncation_tail_decreases(self):
        tails = [k2_truncation_tail(n) for n in (2, 8, 32)]
        assert tails[0] > tails[1] > tails[2] > 0


class TestMagneticField:
    def test_constant_bounded(self, grid32):
        h = MagneticField.constant(grid32, (0, 0, 0.7))
        assert h.max_abs == pytest.approx(0.7)
        assert h.check_bounded()
