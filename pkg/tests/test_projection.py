"""Leray projection: exactness, idempotence, solver routes, failure modes."""

import numpy as np
import pytest

from selflow import operators as ops
from selflow.projection import (
    ProjectionError,
    interior_divergence_max,
    leray_project,
)


class TestPeriodic:
    def test_divergence_free_input_unchanged(self, grid32):
        X, Y = grid32.meshgrid()
        v = np.stack([np.sin(2 * np.pi * Y), np.zeros_like(Y)])
        u, _ = leray_project(v, grid32)
        assert np.max(np.abs(u - v)) <= 1e-10

    def test_annihilates_gradients(self, grid32):
        X, Y = grid32.meshgrid()
        q = np.sin(2 * np.pi * X + 0.3) * np.cos(4 * np.pi * Y)
        u, _ = leray_project(ops.gradient(q, grid32, "periodic"), grid32)
        assert np.max(np.abs(u)) <= 1e-10

    def test_random_divergence_below_tolerance(self, grid32, rng):
        v = rng.standard_normal((2, 32, 32))
        u, p = leray_project(v, grid32, method="cg", tol=1e-12)
        assert ops.norm_linf(ops.divergence(u, grid32, "periodic")) <= 1e-10
        assert abs(p.mean()) <= 1e-12

    def test_fft_and_cg_agree(self, grid32, rng):
        v = rng.standard_normal((2, 32, 32))
        u1, p1 = leray_project(v, grid32, method="fft")
        u2, p2 = leray_project(v, grid32, method="cg", tol=1e-13)
        assert np.max(np.abs(u1 - u2)) <= 1e-10
        assert np.max(np.abs(p1 - p2)) <= 1e-9

    def test_idempotent(self, grid32, rng):
        u1, _ = leray_project(rng.standard_normal((2, 32, 32)), grid32)
        u2, _ = leray_project(u1, grid32)
        assert np.max(np.abs(u2 - u1)) <= 2e-10

    def test_cg_maxiter_failure_carries_residual(self, grid32, rng):
        v = rng.standard_normal((2, 32, 32))
        with pytest.raises(ProjectionError) as err:
            leray_project(v, grid32, method="cg", tol=1e-14, maxiter=2)
        assert err.value.achieved > 0

    def test_nonfinite_rejected(self, grid32):
        v = np.zeros((2, 32, 32))
        v[0, 3, 3] = np.nan
        with pytest.raises(ValueError):
            leray_project(v, grid32)

    def test_batched_equals_lanewise(self, grid32, rng):
        v = rng.standard_normal((3, 2, 32, 32))
        ub, _ = leray_project(v, grid32)
        for m in range(3):
            um, _ = leray_project(v[m], grid32)
            assert np.array_equal(ub[m], um)


class TestBounded:
    def test_interior_divergence_below_tol(self, grid_bounded, rng):
        v = rng.standard_normal((2, 32, 32))
        u, p = leray_project(v, grid_bounded)
        assert interior_divergence_max(u, grid_bounded) <= 1e-10
        assert np.max(np.abs(u[:, 0, :])) == 0.0
        assert np.max(np.abs(u[:, :, -1])) == 0.0

    def test_smooth_field(self, grid_bounded):
        X, Y = grid_bounded.meshgrid()
        v = np.stack(
            [np.sin(np.pi * X) * np.sin(np.pi * Y), X * (1 - X) * Y * (1 - Y)]
        )
        u, _ = leray_project(v, grid_bounded)
        assert interior_divergence_max(u, grid_bounded) <= 1e-10

    def test_zero_mean_pressure(self, grid_bounded, rng):
        _, p = leray_project(rng.standard_normal((2, 32, 32)), grid_bounded)
        one = np.ones_like(p)
        assert abs(ops.inner(p, one, grid_bounded)) <= 1e-10
