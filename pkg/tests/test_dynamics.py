"""Pointwise forces, single steps, the coupled stepper, and stability caps."""

import numpy as np
import pytest

from selflow import operators as ops
from selflow.dynamics import (
    BlowUpError,
    Params,
    SimState,
    StabilityError,
    ericksen_stress_div,
    ericksen_tensor,
    gl_force,
    penalty_density,
    stability_dt,
    step_coupled,
    step_director,
    step_velocity,
    strat_correction,
    stress_force,
)
from selflow.fields import solenoidal_test_function
from selflow.grids import Grid
from selflow.initial import (
    constant_director,
    smooth_unit_director,
    taylor_green,
    taylor_green_rate,
)
from selflow.noise import MagneticField, NoiseOperatorS, WienerDriver, coarsen_normals
from selflow.pathrun import simulate_path


class TestGlForce:
    def test_unit_sphere_vanishes(self, grid32):
        d = smooth_unit_director(grid32)
        assert np.max(np.abs(gl_force(d, 0.3))) <= 1e-12

    def test_zero_vanishes(self):
        assert np.max(np.abs(gl_force(np.zeros((3, 4, 4)), 1.0))) == 0.0

    def test_direct_value(self):
        d = np.zeros((3, 4, 4))
        d[0] = 2.0
        out = gl_force(d, 1.0)
        assert np.allclose(out[0], 6.0) and np.allclose(out[1:], 0.0)

    def test_eps_positive_required(self):
        with pytest.raises(ValueError):
            gl_force(np.zeros((3, 4, 4)), 0.0)


class TestPenalty:
    def test_sphere_zero(self, grid32):
        assert np.max(penalty_density(smooth_unit_director(grid32), 0.5)) <= 1e-12

    def test_origin_value(self):
        assert penalty_density(np.zeros((3, 4, 4)), 1.0)[0, 0] == 0.25

    def test_gradient_consistency_finite_differences(self, rng):
        # central-difference oracle in the three director components
        d = rng.uniform(-1.2, 1.2, (3, 6, 6))
        eps = 0.37
        force = gl_force(d, eps)
        delta = 1e-6
        for c in range(3):
            dp = d.copy()
            dm = d.copy()
            dp[c] += delta
            dm[c] -= delta
            fd = (penalty_density(dp, eps) - penalty_density(dm, eps)) / (2 * delta)
            denom = np.max(np.abs(force[c])) + 1e-12
            assert np.max(np.abs(fd - force[c])) / denom <= 1e-6


class TestStratCorrection:
    def test_parallel_vanishes(self, rng):
        d = rng.standard_normal((3, 6, 6))
        assert np.max(np.abs(strat_correction(d, 3.0 * d))) <= 1e-12

    def test_triple_product_value(self):
        d = np.zeros((3, 4, 4))
        d[0] = 1.0
        h = np.zeros((3, 4, 4))
        h[2] = 1.0
        out = strat_correction(d, h, xi2=1.0)
        assert np.allclose(out[0], -0.5) and np.allclose(out[1:], 0.0)

    def test_pairing_with_director(self, rng):
        d = rng.standard_normal((3, 6, 6))
        h = rng.standard_normal((3, 6, 6))
        xi2 = 1.3
        dxh = ops.cross(d, h)
        lhs = ops.dot3(strat_correction(d, h, xi2), d)
        rhs = -0.5 * xi2**2 * ops.dot3(dxh, dxh)
        assert np.max(np.abs(lhs - rhs)) <= 1e-13 * (1 + np.max(np.abs(rhs)))


class TestEricksenStress:
    def test_constant_director_zero(self, grid32):
        d = constant_director(grid32, (0.4, -0.3, 0.8))
        assert np.max(np.abs(ericksen_stress_div(d, grid32, "periodic"))) == 0.0

    def test_planar_wave_tensor(self, grid32):
        X, _ = grid32.meshgrid()
        k = 2 * np.pi
        d = np.stack([np.cos(k * X), np.sin(k * X), np.zeros_like(X)])
        sig = ericksen_tensor(d, grid32, "periodic")
        k_eff = np.sin(k * grid32.hx) / grid32.hx  # central-difference symbol
        assert np.allclose(sig[0, 0], k_eff**2, rtol=1e-12)
        assert np.max(np.abs(sig[0, 1])) <= 1e-12
        assert np.max(np.abs(sig[1, 1])) <= 1e-12
        div = ericksen_stress_div(d, grid32, "periodic")
        assert np.max(np.abs(div)) <= 1e-10  # constant tensor

    def test_adjoint_consistency(self, rng):
        # <div sigma, phi> = -<sigma, grad phi> within O(h^2)
        errs = []
        for n in (32, 64):
            grid = Grid(n, n)
            X, Y = grid.meshgrid()
            d = np.stack(
                [
                    0.5 * np.sin(2 * np.pi * X) * np.cos(2 * np.pi * Y),
                    0.4 * np.cos(2 * np.pi * X),
                    0.8 + 0.1 * np.sin(2 * np.pi * Y),
                ]
            )
            phi = solenoidal_test_function(grid, 1, 1).field.values
            div = ericksen_stress_div(d, grid, "periodic")
            sig = ericksen_tensor(d, grid, "periodic")
            gphi = ops.gradient(phi, grid, "periodic")
            lhs = ops.inner(div, phi, grid)
            rhs = -float(np.sum(sig * gphi * grid.quad_weights()))
            errs.append(abs(lhs - rhs))
        assert errs[0] <= 1e-10 or errs[1] < errs[0] / 2

    def test_reduced_equals_divergence_up_to_gradient(self, grid32, rng):
        # the two stress forms differ by a near-gradient: after projection
        # they agree to O(h^2)
        from selflow.projection import leray_project

        d = smooth_unit_director(grid32, 0.5)
        f1 = stress_force(d, grid32, "periodic", "reduced")
        f2 = stress_force(d, grid32, "periodic", "divergence")
        p1, _ = leray_project(f1, grid32)
        p2, _ = leray_project(f2, grid32)
        assert ops.norm_l2(p1 - p2, grid32) <= 30 * grid32.hx**2


def _setup(grid, eps=0.2, xi1=1.0, xi2=1.0, dt=None, T=0.01, sigma0=0.3, h3=0.5):
    if dt is None:
        dt = stability_dt(eps, grid, 1.0, 1.0)
    params = Params(eps=eps, xi1=xi1, xi2=xi2, dt=dt, T=T)
    S = NoiseOperatorS(grid, n_modes=4, sigma0=sigma0)
    h = MagneticField.constant(grid, (0.0, 0.0, h3))
    return params, S, h


class TestStepDirector:
    def test_stationary_unit_constant(self, grid32):
        params, S, h = _setup(grid32, xi2=0.0)
        state = SimState.initial(grid32, np.zeros((2, 32, 32)),
                                 constant_director(grid32, (0.6, 0.0, 0.8)))
        d_new = step_director(state, params, h, 0.0)
        assert np.max(np.abs(d_new - state.d)) <= 1e-14

    def test_pure_relaxation_step_value(self, grid32):
        # single explicit step: d = (2,0,0), eps=1, gamma=1, dt=0.01 -> 1.94
        params = Params(eps=1.0, xi1=0.0, xi2=0.0, dt=0.01, T=1.0)
        h = MagneticField.constant(grid32, (0.0, 0.0, 0.0))
        state = SimState.initial(grid32, np.zeros((2, 32, 32)),
                                 constant_director(grid32, (2.0, 0.0, 0.0)))
        d_new = step_director(state, params, h, 0.0)
        assert np.allclose(d_new[0], 1.94, atol=1e-12)
        assert np.max(np.abs(d_new[1:])) == 0.0

    def test_generator_drift_of_sphere_functional(self, grid32):
        # drift of |d|^2/2 for constant unit d, u = 0, xi2 = 1: exact zero
        from selflow.diagnostics import sphere_generator_drift

        d = constant_director(grid32, (0.36, 0.48, 0.8))
        h = MagneticField.constant(grid32, (0.0, 0.0, 1.0))
        drift = sphere_generator_drift(d, h.values, xi2=1.0)
        assert np.max(np.abs(drift)) <= 1e-15


class TestStepVelocity:
    def test_rest_state_stays(self, grid32):
        params, S, h = _setup(grid32, xi1=0.0)
        state = SimState.initial(grid32, np.zeros((2, 32, 32)),
                                 constant_director(grid32, (0, 0, 1)))
        u_new, p = step_velocity(state, params, S, np.zeros(4))
        assert np.max(np.abs(u_new)) <= 1e-14

    def test_taylor_green_decay(self):
        # kinetic energy decays at rate 2 mu kappa^2 within 2%
        grid = Grid(128, 128)
        mu = 1.0
        u0 = taylor_green(grid, 1, 0.1)
        d0 = constant_director(grid, (0, 0, 1))
        dt = stability_dt(0.5, grid, mu, 1.0)
        params = Params(eps=0.5, mu=mu, xi1=0.0, xi2=0.0, dt=dt, T=1.0)
        S = NoiseOperatorS(grid, n_modes=1, sigma0=0.0)
        h = MagneticField.constant(grid, (0, 0, 0))
        state = SimState.initial(grid, u0, d0)
        rate = taylor_green_rate(grid, 1, mu)
        T = 1.2 / rate
        n = int(round(T / dt))
        driver = WienerDriver(0, 1)
        e0 = 0.5 * ops.inner(u0, u0, grid)
        for _ in range(n):
            step_coupled(state, params, driver, S, h)
        e1 = 0.5 * ops.inner(state.u, state.u, grid)
        expected = e0 * np.exp(-rate * n * dt)
        assert abs(e1 - expected) / expected <= 0.02

    def test_noise_step_divergence_free(self, grid32, rng):
        params, S, h = _setup(grid32)
        u0, _ = __import__("selflow.projection", fromlist=["leray_project"]).leray_project(
            rng.standard_normal((2, 32, 32)) * 0.1, grid32)
        state = SimState.initial(grid32, u0, smooth_unit_director(grid32))
        u_new, _ = step_velocity(state, params, S, rng.standard_normal(4) * 0.01)
        div = ops.divergence(u_new, grid32, "periodic")
        assert ops.norm_linf(div) <= 1e-10


class TestStepCoupled:
    def test_deterministic_ledgers_stay_zero(self, grid32):
        params, S, h = _setup(grid32, xi1=0.0, xi2=0.0)
        state = SimState.initial(grid32, taylor_green(grid32, 1, 0.1),
                                 smooth_unit_director(grid32))
        driver = WienerDriver(0, 4)
        for _ in range(5):
            step_coupled(state, params, driver, S, h)
        assert state.ledgers.noise_u == 0.0
        assert float(np.abs(state.ledgers.noise_d)) == 0.0

    def test_same_seed_bit_identical(self, grid32):
        params, S, h = _setup(grid32)
        outs = []
        for _ in range(2):
            state = SimState.initial(grid32, taylor_green(grid32, 1, 0.1),
                                     smooth_unit_director(grid32))
            driver = WienerDriver(99, 4)
            for _ in range(10):
                step_coupled(state, params, driver, S, h)
            outs.append((state.u.copy(), state.d.copy()))
        assert np.array_equal(outs[0][0], outs[1][0])
        assert np.array_equal(outs[0][1], outs[1][1])

    def test_strong_order_under_path_coupling(self, grid32):
        # same Brownian path, dt halved twice: terminal difference shrinks
        # with observed strong order >= 0.5
        params, S, h = _setup(grid32, eps=0.5, T=0.02)
        u0 = taylor_green(grid32, 1, 0.1)
        d0 = smooth_unit_director(grid32)
        dt0 = params.dt
        n0 = int(round(0.02 / dt0))
        fine = WienerDriver(7, 4).normal_table(4 * n0)
        states = {}
        for factor in (4, 2, 1):
            table = coarsen_normals(fine, factor) if factor > 1 else fine
            p = Params(eps=0.5, xi1=1.0, xi2=1.0, dt=dt0 * factor / 4, T=0.02)
            res = simulate_path(grid32, p, u0, d0, S, h, WienerDriver(7, 4),
                                checkpoint_every=10**9, n_steps=table.shape[0],
                                track_budget=False, normals_table=table)
            states[factor] = res.state
        err_coarse = ops.norm_l2(states[4].u - states[1].u, grid32) + ops.norm_l2(
            states[4].d - states[1].d, grid32)
        err_mid = ops.norm_l2(states[2].u - states[1].u, grid32) + ops.norm_l2(
            states[2].d - states[1].d, grid32)
        assert err_mid < err_coarse
        order = np.log2(err_coarse / err_mid) - 0.0
        assert order >= 0.5

    def test_blowup_detected(self, grid32):
        params = Params(eps=0.2, xi1=0.0, xi2=0.0, dt=0.5, T=1.0, dt_override=True)
        S = NoiseOperatorS(grid32, n_modes=2, sigma0=0.0)
        h = MagneticField.constant(grid32, (0, 0, 0))
        state = SimState.initial(grid32, taylor_green(grid32, 1, 1.0),
                                 smooth_unit_director(grid32))
        driver = WienerDriver(0, 2)
        with pytest.raises(BlowUpError), np.errstate(over="ignore", invalid="ignore"):
            for _ in range(400):
                step_coupled(state, params, driver, S, h)


class TestBoundedModes:
    def test_noslip_neumann_run(self):
        from selflow.pathrun import simulate_path
        from selflow.projection import interior_divergence_max
        from selflow.initial import smooth_unit_director as sud

        grid = Grid(24, 24, bc_velocity="noslip", bc_director="neumann")
        X, Y = grid.meshgrid()
        u0 = np.stack([np.sin(np.pi * X) * np.sin(np.pi * Y) * 0.2,
                       (X * (1 - X) * Y * (1 - Y)) * 0.4])
        from selflow.projection import leray_project
        u0, _ = leray_project(u0, grid)
        dt = stability_dt(0.5, grid, 1.0, 1.0)
        params = Params(eps=0.5, xi1=0.0, xi2=0.0, dt=dt, T=50 * dt)
        S = NoiseOperatorS(grid, n_modes=2, sigma0=0.0)
        h = MagneticField.constant(grid, (0, 0, 0))
        res = simulate_path(grid, params, u0, sud(grid, 0.3), S, h,
                            WienerDriver(0, 2), checkpoint_every=10,
                            track_budget=False)
        u = res.state.u
        assert np.max(np.abs(u[:, 0, :])) == 0.0  # no-slip enforced
        assert interior_divergence_max(u, grid) <= 1e-10
        total = res.state.d
        assert np.all(np.isfinite(total))

    def test_dirichlet_director_pinned(self):
        from selflow.pathrun import simulate_path
        from selflow.initial import smooth_unit_director as sud

        grid = Grid(16, 16, bc_velocity="noslip", bc_director="dirichlet")
        d0 = sud(grid, 0.3)
        dt = stability_dt(0.5, grid, 1.0, 1.0)
        params = Params(eps=0.5, xi1=0.0, xi2=1.0, dt=dt, T=30 * dt)
        S = NoiseOperatorS(grid, n_modes=2, sigma0=0.0)
        h = MagneticField.constant(grid, (0, 0, 0.5))
        res = simulate_path(grid, params, np.zeros((2, 16, 16)), d0, S, h,
                            WienerDriver(4, 2), checkpoint_every=10,
                            track_budget=False)
        d = res.state.d
        assert np.array_equal(d[:, 0, :], d0[:, 0, :])
        assert np.array_equal(d[:, :, -1], d0[:, :, -1])
        assert not np.allclose(d[:, 5:-5, 5:-5], d0[:, 5:-5, 5:-5])


class TestTransportCancellation:
    def test_penalty_transport_second_order(self):
        # <(u.grad)d, f_eps(d)> integrates the transport of the penalty
        # density; vanishes in the continuum, O(h^2) discretely
        from selflow.projection import leray_project

        vals, hs = [], []
        for n in (32, 64, 128):
            grid = Grid(n, n)
            X, Y = grid.meshgrid()
            v = np.stack([np.sin(2 * np.pi * Y + 0.4) * 0.3,
                          np.sin(2 * np.pi * X) * 0.2])
            u, _ = leray_project(v, grid)
            d = np.stack([
                0.7 * np.sin(2 * np.pi * X) * np.cos(2 * np.pi * Y),
                0.5 * np.cos(2 * np.pi * X + 0.3),
                0.6 + 0.2 * np.sin(2 * np.pi * Y),
            ])
            pair = ops.inner(ops.advect(u, d, grid, "periodic"),
                             gl_force(d, 0.5), grid)
            vals.append(abs(pair))
            hs.append(grid.hx)
        assert vals[2] < vals[1] < vals[0]
        assert vals[0] / vals[2] > 8.0  # ~ h^2


class TestStabilityDt:
    def test_penalty_stiffness_dominates(self):
        grid = Grid(11, 11)  # h = 1/11 ... use explicit lengths for h = 0.1
        grid = Grid(10, 10, lx=1.0, ly=1.0)  # periodic: h = 0.1
        cap = stability_dt(0.01, grid, 1.0, 1.0)
        assert cap == pytest.approx(2.5e-5)

    def test_viscosity_dominates(self):
        grid = Grid(10, 10)
        cap = stability_dt(1.0, grid, 100.0, 1.0)
        assert cap == pytest.approx(grid.hx**2 / 800.0)

    def test_advective_bound_governs(self):
        grid = Grid(10, 10)
        cap_still = stability_dt(1.0, grid, 1.0, 1.0)
        cap_fast = stability_dt(1.0, grid, 1.0, 1.0, umax=100.0)
        assert cap_fast < cap_still
        assert cap_fast == pytest.approx(grid.hx / 400.0)

    def test_stability_refusal(self, grid32):
        params, S, h = _setup(grid32, dt=1.0)
        with pytest.raises(StabilityError):
            simulate_path(grid32, params, np.zeros((2, 32, 32)),
                          smooth_unit_director(grid32), S, h, WienerDriver(0, 4))


class TestMaximumPrinciple:
    def test_deterministic_bound(self, grid32):
        from selflow.initial import subunit_director

        eps = 0.2
        dt = stability_dt(eps, grid32, 1.0, 1.0)
        params = Params(eps=eps, xi1=0.0, xi2=0.0, dt=dt, T=0.05)
        S = NoiseOperatorS(grid32, n_modes=2, sigma0=0.0)
        h = MagneticField.constant(grid32, (0, 0, 0))
        res = simulate_path(grid32, params, taylor_green(grid32, 1, 0.2),
                            subunit_director(grid32), S, h, WienerDriver(0, 2),
                            checkpoint_every=20, track_budget=False)
        bound = 1.0 + 10.0 * dt / eps**2
        assert np.max(res.series.columns["max_abs_d"]) <= bound
