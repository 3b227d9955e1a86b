"""Coupled Euler-Maruyama stepping of the relaxed director/velocity system.

One step advances both fields from the same time-n state:

    d+ = d + dt [ -(u.grad)d + gamma (lap d - f_eps(d)) + 0.5 xi2^2 (d x h) x h ]
           + xi2 (d x h) dW2
    u+ = P[ u + dt ( -adv(u,u) + mu lap u - lam stress(d) ) + xi1 S(u) dW1 ]

with P the Leray projection.  The Stratonovich director noise is integrated
in Ito form with its drift correction made explicit.

Discrete forms are chosen so the step-by-step energy budget closes without
spatial leakage in periodic mode: velocity self-advection is the
skew-symmetric form (its kinetic pairing vanishes identically), the director
is advected with plain central (u.grad)d, and the default stress force is
the reduced form sum_c (lap d_c) grad d_c whose pairing with u cancels the
director advection term exactly; the two forms of the stress differ by a
discrete near-gradient that the projection absorbs.  The assembled tensor
divergence remains available as ``stress_form='divergence'``.

Running ledgers accumulate the discrete stochastic integrals and the
left-endpoint time integrals that the energy-budget diagnostic consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import operators as ops
from .grids import Grid
from .noise import MagneticField, NoiseOperatorS, WienerDriver
from .projection import PROJ_TOL, leray_project

STRESS_FORMS = ("reduced", "divergence")


class BlowUpError(RuntimeError):
    """Non-finite state detected during stepping."""

    def __init__(self, step: int, t: float):
        super().__init__(f"solution blew up at step {step} (t = {t:.6g})")
        self.step = step
        self.t = t


class StabilityError(ValueError):
    """Requested dt exceeds the explicit-stepping stability bound."""


@dataclass
class Params:
    """Physical and numerical parameters of one simulation."""

    eps: float = 0.2
    mu: float = 1.0
    lam: float = 1.0
    gamma: float = 1.0
    xi1: float = 1.0
    xi2: float = 1.0
    dt: float = 1e-4
    T: float = 0.5
    stress_form: str = "reduced"
    proj_tol: float = PROJ_TOL
    proj_maxiter: int = 0
    dt_override: bool = False

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        for name in ("mu", "lam", "gamma"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("xi1", "xi2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.dt <= 0 or self.T <= 0:
            raise ValueError("dt and T must be positive")
        if self.proj_maxiter < 0:
            raise ValueError("proj_maxiter must be nonnegative (0 = automatic)")
        if self.stress_form not in STRESS_FORMS:
            raise ValueError(f"stress_form must be one of {STRESS_FORMS}")

    def with_dt(self, dt: float) -> "Params":
        return replace(self, dt=dt)


def stability_dt(eps: float, grid: Grid, mu: float, gamma: float, umax: float = 0.0) -> float:
    """Explicit-step time-step cap.

    min of the two diffusive bounds h^2/(8 mu), h^2/(8 gamma), the
    penalty-stiffness bound eps^2/(4 gamma) (the eps^2 stiffness of the
    relaxation force), and an advective CFL bound when a velocity scale is
    supplied.
    """
    h2 = min(grid.hx, grid.hy) ** 2
    cap = min(h2 / (8.0 * mu), h2 / (8.0 * gamma), eps**2 / (4.0 * gamma))
    if umax > 0:
        cap = min(cap, min(grid.hx, grid.hy) / (4.0 * umax))
    return cap


def check_stability(params: Params, grid: Grid, umax: float = 0.0) -> None:
    cap = stability_dt(params.eps, grid, params.mu, params.gamma, umax)
    if params.dt > cap * (1.0 + 1e-12) and not params.dt_override:
        raise StabilityError(
            f"dt = {params.dt:.3e} exceeds stability bound {cap:.3e}; "
            "set dt_override to force"
        )


@dataclass
class Ledgers:
    """Running stochastic integrals and left-endpoint budget integrals."""

    noise_u: float = 0.0       # sum <u_n, xi1 S(u_n) dW1>
    noise_d: float = 0.0       # sum <d_n x h, gamma (lap d_n - f_eps)> dW2
    int_diss_u: float = 0.0    # sum dt ||grad u_n||^2
    int_diss_d: float = 0.0    # sum dt ||lap d_n - f_eps(d_n)||^2
    int_hs: float = 0.0        # sum dt * 0.5 xi1^2 ||S(u_n)||_HS^2
    int_strat: float = 0.0     # sum dt * 0.5 (<grad d, grad((dxh)xh)> + ||grad(dxh)||^2)

    def copy(self) -> "Ledgers":
        return Ledgers(**vars(self))


@dataclass
class SimState:
    """One path of the coupled system: fields, clock, and ledgers."""

    grid: Grid
    t: float
    u: np.ndarray
    d: np.ndarray
    step: int = 0
    ledgers: Ledgers = field(default_factory=Ledgers)

    @classmethod
    def initial(cls, grid: Grid, u0: np.ndarray, d0: np.ndarray) -> "SimState":
        grid.check_values(u0)
        grid.check_values(d0)
        return cls(grid, 0.0, u0.copy(), d0.copy())

    def bc_u(self) -> str:
        return "periodic" if self.grid.periodic else "none"

    def bc_d(self) -> str:
        return self.grid.bc_director


def gl_force(d: np.ndarray, eps: float) -> np.ndarray:
    """Relaxation force (|d|^2 - 1) d / eps^2 (gradient of the penalty)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    q = np.sum(d * d, axis=-3, keepdims=True) - 1.0
    return q * d / eps**2


def penalty_density(d: np.ndarray, eps: float) -> np.ndarray:
    """Penalty density (1 - |d|^2)^2 / (4 eps^2), pointwise nonnegative."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return (1.0 - ops.dot3(d, d)) ** 2 / (4.0 * eps**2)


def strat_correction(d: np.ndarray, h: np.ndarray, xi2: float = 1.0) -> np.ndarray:
    """Ito drift of the Stratonovich director noise: 0.5 xi2^2 ((d x h) x h)."""
    return 0.5 * xi2**2 * ops.cross(ops.cross(d, h), h)


def ericksen_tensor(d: np.ndarray, grid: Grid, bc: str) -> np.ndarray:
    """Elastic stress tensor sigma_ij = <d_i d, d_j d>, shape (..., 2, 2, nx, ny)."""
    g = ops.gradient(d, grid, bc)  # (..., 3, 2, nx, ny)
    return np.sum(g[..., :, :, None, :, :] * g[..., :, None, :, :, :], axis=-5)


def ericksen_stress_div(d: np.ndarray, grid: Grid, bc: str) -> np.ndarray:
    """Divergence of the elastic stress tensor, (div sigma)_j = d_i sigma_ij."""
    sig = ericksen_tensor(d, grid, bc)
    cols = [
        ops.deriv(sig[..., 0, j, :, :], grid, 0, bc)
        + ops.deriv(sig[..., 1, j, :, :], grid, 1, bc)
        for j in range(2)
    ]
    return np.stack(cols, axis=-3)


def stress_force(
    d: np.ndarray, grid: Grid, bc: str, form: str = "reduced", lap_d: np.ndarray | None = None
) -> np.ndarray:
    """Force entering the momentum equation for -lam * (this).

    'reduced' evaluates sum_c (lap d_c) grad d_c, equal to the full tensor
    divergence up to grad(|grad d|^2/2), which the projection removes.
    """
    if form == "divergence":
        return ericksen_stress_div(d, grid, bc)
    if lap_d is None:
        lap_d = ops.laplacian(d, grid, bc)
    g = ops.gradient(d, grid, bc)
    return np.sum(lap_d[..., :, None, :, :] * g, axis=-4)


def step_director(state: SimState, params: Params, h: MagneticField, dW2: float,
                  d_bc_values: np.ndarray | None = None) -> np.ndarray:
    """One explicit director update from the time-n fields; returns d+."""
    grid, d, u = state.grid, state.d, state.u
    bc = state.bc_d()
    tau = ops.laplacian(d, grid, bc) - gl_force(d, params.eps)
    dxh = ops.cross(d, h.values)
    drift = (
        -ops.advect(u, d, grid, bc)
        + params.gamma * tau
        + 0.5 * params.xi2**2 * ops.cross(dxh, h.values)
    )
    d_new = d + params.dt * drift + params.xi2 * dxh * dW2
    if bc == "dirichlet" and d_bc_values is not None:
        _pin_boundary(d_new, d_bc_values)
    if not np.all(np.isfinite(d_new)):
        raise BlowUpError(state.step, state.t)
    return d_new


def _pin_boundary(a: np.ndarray, ref: np.ndarray) -> None:
    a[..., 0, :] = ref[..., 0, :]
    a[..., -1, :] = ref[..., -1, :]
    a[..., :, 0] = ref[..., :, 0]
    a[..., :, -1] = ref[..., :, -1]


def step_velocity(
    state: SimState, params: Params, S: NoiseOperatorS, dB: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """One explicit velocity update plus projection; returns (u+, pressure)."""
    grid, u, d = state.grid, state.u, state.d
    bc_u, bc_d = state.bc_u(), state.bc_d()
    drift = (
        -ops.advect_skew(u, u, grid, bc_u)
        + params.mu * ops.laplacian(u, grid, bc_u)
        - params.lam * stress_force(d, grid, bc_d, params.stress_form)
    )
    v = u + params.dt * drift
    if params.xi1 != 0.0:
        # unprojected mode mix; the step projection makes it S(u) dW1
        v = v + params.xi1 * S.mix_increments(u, dB)
    u_new, p = leray_project(v, grid, tol=params.proj_tol,
                             maxiter=params.proj_maxiter or None)
    if not np.all(np.isfinite(u_new)):
        raise BlowUpError(state.step, state.t)
    return u_new, p


def step_coupled(
    state: SimState,
    params: Params,
    driver: WienerDriver | None,
    S: NoiseOperatorS,
    h: MagneticField,
    *,
    normals: np.ndarray | None = None,
    track_budget: bool = False,
    weak_tracker=None,
    invariant_sink=None,
    d_bc_values: np.ndarray | None = None,
) -> SimState:
    """Advance the coupled state by one step (mutates and returns ``state``).

    Both updates read the time-n fields.  ``normals`` optionally prescribes
    this step's standard normals (for path-coupled refinement studies and
    batched runs); otherwise the driver is sampled.  State arrays may carry
    a leading path axis, in which case the ledgers accumulate per path.
    ``weak_tracker`` and ``invariant_sink`` receive the per-step pairings
    when supplied.
    """
    grid, dt = state.grid, params.dt
    u, d = state.u, state.d
    bc_u, bc_d = state.bc_u(), state.bc_d()

    if normals is None:
        normals = driver.sample_normals()
    n_modes = driver.n_modes if driver is not None else S.n_modes
    root = np.sqrt(dt)
    dB = root * normals[..., :n_modes]
    dW2 = root * normals[..., n_modes]

    # time-n director pieces; the central gradient of d is shared between
    # the advection term and the reduced stress force
    lap_d = ops.laplacian(d, grid, bc_d)
    f = gl_force(d, params.eps)
    tau = lap_d - f
    dxh = ops.cross(d, h.values)
    dxhxh = ops.cross(dxh, h.values)
    g_d = ops.gradient(d, grid, bc_d)  # (..., 3, 2, nx, ny)
    adv_d = (
        u[..., 0:1, :, :] * g_d[..., 0, :, :] + u[..., 1:2, :, :] * g_d[..., 1, :, :]
    )

    # time-n velocity pieces
    adv_u = ops.advect_skew(u, u, grid, bc_u)
    lap_u = ops.laplacian(u, grid, bc_u)
    if params.stress_form == "reduced":
        sforce = np.sum(lap_d[..., :, None, :, :] * g_d, axis=-4)
    else:
        sforce = ericksen_stress_div(d, grid, bc_d)
    if params.xi1 != 0.0:
        # unprojected mode mix; folded into the step projection below.
        # Pairings against divergence-free fields (u_n, the solenoidal test
        # functions) see the projected value up to proj_tol.
        noise_u = params.xi1 * S.mix_increments(u, dB)
    else:
        noise_u = None

    # ledgers, all pairings against time-n fields
    led = state.ledgers
    if noise_u is not None:
        led.noise_u = led.noise_u + ops.pair_vec(u, noise_u, grid)
    if params.xi2 != 0.0:
        led.noise_d = led.noise_d + params.gamma * ops.pair_vec(dxh, tau, grid) * dW2
    if track_budget:
        led.int_diss_u = led.int_diss_u + dt * ops.dirichlet_form_vec(u, u, grid)
        led.int_diss_d = led.int_diss_d + dt * ops.pair_vec(tau, tau, grid)
        led.int_hs = led.int_hs + dt * 0.5 * params.xi1**2 * S.hs_norm_sq(u)
        led.int_strat = led.int_strat + dt * 0.5 * (
            ops.dirichlet_form_vec(d, dxhxh, grid) + ops.dirichlet_form_vec(dxh, dxh, grid)
        )
    if weak_tracker is not None:
        weak_tracker.accumulate(u, d, noise_u, dxh, dxhxh, f, dt, dW2)
    if invariant_sink is not None:
        invariant_sink.record_advection(ops.inner(adv_u, u, grid), ops.norm_l2(u, grid))

    # updates
    d_new = d + dt * (-adv_d + params.gamma * tau + 0.5 * params.xi2**2 * dxhxh)
    if params.xi2 != 0.0:
        d_new += params.xi2 * dxh * np.asarray(dW2)[..., None, None, None]
    if bc_d == "dirichlet" and d_bc_values is not None:
        _pin_boundary(d_new, d_bc_values)

    v = u + dt * (-adv_u + params.mu * lap_u - params.lam * sforce)
    if noise_u is not None:
        v = v + noise_u
    u_new, _ = leray_project(v, grid, tol=params.proj_tol,
                             maxiter=params.proj_maxiter or None,
                             need_pressure=False)

    if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(d_new))):
        raise BlowUpError(state.step, state.t)
    if invariant_sink is not None:
        div = ops.divergence(u_new, grid, bc_u)
        if not grid.periodic:
            div = div[1:-1, 1:-1]
        invariant_sink.record_divergence(ops.norm_linf(div))

    state.u, state.d = u_new, d_new
    state.t += dt
    state.step += 1
    return state
