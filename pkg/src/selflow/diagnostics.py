"""Verifiable identities: energy budget, pointwise algebra, multiplier
(Pohozaev-type) residuals, defect detection, stress pairings, weak-form
residuals, and the coupled relaxation-parameter sweep.

All diagnostics are pure functions of their inputs; ensembles reduce over
paths elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import operators as ops
from .dynamics import Params, gl_force, penalty_density, strat_correction
from .fields import TestFunction
from .grids import Grid
from .noise import MagneticField, NoiseOperatorS, WienerDriver
from .pathrun import EnergyRecord, PathSeries, energy_record, simulate_path

__all__ = [
    "EnergyRecord",
    "energy_record",
    "energy_budget_residual",
    "budget_residual_series",
    "triple_product_defects",
    "sphere_generator_drift",
    "traceless_stress",
    "stress_pairing",
    "WeakFormTracker",
    "PohozaevReport",
    "pohozaev_residual",
    "GeometryError",
    "local_energy",
    "DefectReport",
    "defect_detect",
    "default_defect_threshold",
    "SweepResult",
    "epsilon_sweep",
    "GronwallReport",
    "gronwall_bound_check",
]


class GeometryError(ValueError):
    """Ball not contained in the domain with the required margin."""


# ---------------------------------------------------------------------------
# energy budget
# ---------------------------------------------------------------------------

def energy_budget_residual(series: PathSeries, params: Params, i_a: int = 0, i_b: int = -1) -> float:
    """Defect of the stochastic energy identity over [t_a, t_b].

    residual = [E(t_b) - E(t_a)]
             + mu * int ||grad u||^2 + lam*gamma * int ||lap d - f||^2
             - int hs - lam*xi2^2 * int strat_drift
             - dledger1 + (lam*xi2/gamma) * dledger2

    with the time integrals accumulated step-by-step by the stepper
    (left-endpoint rule).  In the continuum this vanishes identically; the
    discrete value measures the stepping error plus the realized-vs-mean
    quadratic variation of the noise.  The ledger2 coefficient follows from
    the chain rule applied to the discrete energy (ledger2 carries a factor
    gamma by its definition); signs are fixed by requiring the zero-noise
    reduction to balance exactly.
    """
    c = series.columns
    dE = c["total"][i_b] - c["total"][i_a]

    def dacc(name):
        return c[name][i_b] - c[name][i_a]

    residual = (
        dE
        + params.mu * dacc("int_diss_u")
        + params.lam * params.gamma * dacc("int_diss_d")
        - dacc("int_hs")
        - params.lam * params.xi2**2 * dacc("int_strat")
        - dacc("ledger1")
        + (params.lam * params.xi2 / params.gamma) * dacc("ledger2")
    )
    return float(residual)


def budget_residual_series(series: PathSeries, params: Params) -> np.ndarray:
    """Budget residual from t = 0 to each checkpoint."""
    return np.array(
        [energy_budget_residual(series, params, 0, i) for i in range(len(series))]
    )


# ---------------------------------------------------------------------------
# pointwise algebra
# ---------------------------------------------------------------------------

def triple_product_defects(d: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise defects of <(d x h) x h, d> = -|d x h|^2 and <d x h, d> = 0."""
    dxh = ops.cross(d, h)
    first = ops.dot3(ops.cross(dxh, h), d) + ops.dot3(dxh, dxh)
    second = ops.dot3(dxh, d)
    return first, second


def sphere_generator_drift(d: np.ndarray, h: np.ndarray, xi2: float = 1.0) -> np.ndarray:
    """Pointwise drift of |d|^2/2 for spatially constant d with u = 0:
    <d, strat correction> + 0.5 xi2^2 |d x h|^2.  Identically zero by the
    vector triple product."""
    dxh = ops.cross(d, h)
    return ops.dot3(d, strat_correction(d, h, xi2)) + 0.5 * xi2**2 * ops.dot3(dxh, dxh)


# ---------------------------------------------------------------------------
# stress pairings
# ---------------------------------------------------------------------------

def traceless_stress(d: np.ndarray, grid: Grid, bc: str) -> np.ndarray:
    """Traceless elastic stress, shape (2, 2, nx, ny):

        0.5 * [[|d1 d|^2 - |d2 d|^2,  2 <d1 d, d2 d>],
               [2 <d1 d, d2 d>,       |d2 d|^2 - |d1 d|^2]]

    The (1,1) entry is stored as the negation of the (0,0) entry, so the
    pointwise trace is exactly zero.
    """
    g = ops.gradient(d, grid, bc)  # (3, 2, nx, ny)
    t00 = 0.5 * (ops.dot3(g[:, 0], g[:, 0]) - ops.dot3(g[:, 1], g[:, 1]))
    t01 = ops.dot3(g[:, 0], g[:, 1])
    return np.stack([np.stack([t00, t01]), np.stack([t01, -t00])])


def stress_pairing(d: np.ndarray, grid: Grid, bc_d: str, phi: TestFunction) -> float:
    """<traceless stress(d), grad phi> by quadrature."""
    T = traceless_stress(d, grid, bc_d)
    pf = phi.field
    gphi = ops.gradient(pf.values, grid, pf.bc)  # (2, 2, nx, ny), [i, j] = d_j phi_i
    return float(np.sum(T * gphi * grid.quad_weights()))


# ---------------------------------------------------------------------------
# weak-form residuals
# ---------------------------------------------------------------------------

class WeakFormTracker:
    """Accumulates the time-integrated weak-form pairings of both equations
    against static test functions, including the realized stochastic
    integrals, so the residual of the weak formulation can be evaluated at
    any time along a path.

    At finite relaxation the |grad d|^2 d term of the limit equation is
    represented by -f_eps(d); the substitution is recorded in the residual
    keys ('penalty' component).
    """

    def __init__(self, grid: Grid, params: Params, u_tests=(), d_tests=()):
        self.grid = grid
        self.params = params
        self.u_tests = list(u_tests)
        self.d_tests = list(d_tests)
        self._u_pre = []
        for tf in self.u_tests:
            f = tf.field
            self._u_pre.append(
                (
                    f.values,
                    ops.gradient(f.values, grid, f.bc),
                    ops.laplacian(f.values, grid, f.bc),
                )
            )
        self._d_pre = []
        for tf in self.d_tests:
            f = tf.field
            self._d_pre.append(
                (
                    f.values,
                    ops.gradient(f.values, grid, f.bc),
                    ops.laplacian(f.values, grid, f.bc),
                )
            )
        self._w = grid.quad_weights()
        self.initialized = False

    def initialize(self, u0: np.ndarray, d0: np.ndarray) -> None:
        self.pair_u0 = [ops.inner(u0, p[0], self.grid) for p in self._u_pre]
        self.pair_d0 = [ops.inner(d0, p[0], self.grid) for p in self._d_pre]
        self.acc_u = np.zeros(len(self.u_tests))
        self.acc_d = np.zeros(len(self.d_tests))
        self.initialized = True

    def accumulate(self, u, d, noise_u, dxh, dxhxh, f, dt, dW2) -> None:
        p = self.params
        w = self._w
        if self.u_tests:
            # the traceless stress of the current d, shared across tests
            T = traceless_stress(d, self.grid, self.grid.bc_director)
        for k, (phi, gphi, lphi) in enumerate(self._u_pre):
            adv = np.sum(u[:, None] * u[None, :] * gphi * w)
            visc = p.mu * ops.inner(u, lphi, self.grid)
            stress = p.lam * np.sum(T * gphi * w)
            self.acc_u[k] += dt * (adv + visc + stress)
            if noise_u is not None:
                self.acc_u[k] += ops.inner(phi, noise_u, self.grid)
        for k, (psi, gpsi, lpsi) in enumerate(self._d_pre):
            adv = np.sum(d[:, None] * u[None, :] * gpsi * w)
            lap = p.gamma * ops.inner(d, lpsi, self.grid)
            pen = p.gamma * ops.inner(-f, psi, self.grid)
            strat = 0.5 * p.xi2**2 * ops.inner(dxhxh, psi, self.grid)
            self.acc_d[k] += dt * (adv + lap + pen + strat)
            self.acc_d[k] += p.xi2 * ops.inner(dxh, psi, self.grid) * dW2

    def residual_u(self, u_now: np.ndarray) -> dict[str, float]:
        out = {}
        for k, tf in enumerate(self.u_tests):
            now = ops.inner(u_now, self._u_pre[k][0], self.grid)
            out[tf.name] = now - self.pair_u0[k] - float(self.acc_u[k])
        return out

    def residual_d(self, d_now: np.ndarray) -> dict[str, float]:
        out = {}
        for k, tf in enumerate(self.d_tests):
            now = ops.inner(d_now, self._d_pre[k][0], self.grid)
            out[tf.name] = now - self.pair_d0[k] - float(self.acc_d[k])
        return out


# ---------------------------------------------------------------------------
# multiplier (Pohozaev) residuals
# ---------------------------------------------------------------------------

X_CHOICES = ("radial", "x1", "shear")


def _ball_weights(grid: Grid, center, r: float, sub: int = 8) -> np.ndarray:
    """Inclusion weights of the ball B_r(center) on node-centered cells.

    Cells well inside / outside get weight 1 / 0; cells cut by the circle
    get the sampled area fraction (sub x sub subsamples).  Plain cell-center
    inclusion makes the multiplier residual oscillate at O(h) with grid
    alignment; the area fractions restore a clean decay.
    """
    x0, y0 = center
    X, Y = grid.meshgrid()
    dx = X - x0
    dy = Y - y0
    if grid.periodic:
        dx = dx - grid.lx * np.round(dx / grid.lx)
        dy = dy - grid.ly * np.round(dy / grid.ly)
    dist = np.hypot(dx, dy)
    half_diag = 0.5 * np.hypot(grid.hx, grid.hy)
    w = (dist <= r).astype(float)
    band = np.abs(dist - r) <= half_diag
    if np.any(band):
        off = (np.arange(sub) + 0.5) / sub - 0.5
        ox, oy = np.meshgrid(off * grid.hx, off * grid.hy, indexing="ij")
        bx = dx[band][:, None] + ox.ravel()[None, :]
        by = dy[band][:, None] + oy.ravel()[None, :]
        w[band] = np.mean(bx**2 + by**2 <= r**2, axis=1)
    return w


def _bilinear(values: np.ndarray, grid: Grid, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of (..., nx, ny) samples at interior points."""
    fx = px / grid.hx
    fy = py / grid.hy
    ix = np.clip(np.floor(fx).astype(int), 0, grid.nx - 2)
    iy = np.clip(np.floor(fy).astype(int), 0, grid.ny - 2)
    tx = fx - ix
    ty = fy - iy
    v00 = values[..., ix, iy]
    v10 = values[..., ix + 1, iy]
    v01 = values[..., ix, iy + 1]
    v11 = values[..., ix + 1, iy + 1]
    return (
        v00 * (1 - tx) * (1 - ty)
        + v10 * tx * (1 - ty)
        + v01 * (1 - tx) * ty
        + v11 * tx * ty
    )


@dataclass
class PohozaevReport:
    """Every term of the multiplier identity on B_r(center):

        boundary_kinetic + bulk_stress + bulk_div + boundary_energy = rhs

    boundary_kinetic = int_{dB} <X.grad d, nu.grad d>,
    bulk_stress      = -int_B <grad d (x) grad d, grad X>,
    bulk_div         =  int_B div X * e_eps,
    boundary_energy  = -int_{dB} e_eps <X, nu>,
    rhs              =  int_B <X.grad d, lap d - f_eps(d)>.
    """

    center: tuple[float, float]
    r: float
    choice: str
    boundary_kinetic: float
    bulk_stress: float
    bulk_div: float
    boundary_energy: float
    rhs: float
    residual: float


def _x_field(choice: str, px: np.ndarray, py: np.ndarray, center) -> tuple[np.ndarray, np.ndarray]:
    x0, y0 = center
    if choice == "radial":
        return px - x0, py - y0
    if choice == "x1":
        return px - x0, np.zeros_like(py)
    if choice == "shear":
        return np.zeros_like(px), px - x0
    raise ValueError(f"X choice must be one of {X_CHOICES}")


def pohozaev_residual(
    d: np.ndarray,
    grid: Grid,
    eps: float,
    center: tuple[float, float],
    r: float,
    choice: str = "radial",
    bc: str | None = None,
    n_theta: int | None = None,
) -> PohozaevReport:
    """Evaluate the multiplier identity on B_r(center) for one X choice.

    Bulk integrals use cell inclusion with area fractions on the cut cells;
    the circle integrals use the midpoint rule with bilinearly interpolated
    fields.  The elliptic residual tau = lap d - f_eps(d) is built from the
    same discrete operators as everything else, so the report's residual is
    pure discretization defect, decaying at first order or better under
    refinement.
    """
    if bc is None:
        bc = grid.bc_director
    x0, y0 = center
    if not grid.contains_ball(x0, y0, r, margin_cells=1):
        raise GeometryError(f"ball B_{r}({x0}, {y0}) not inside the domain with margin")

    g = ops.gradient(d, grid, bc)  # (3, 2, nx, ny)
    e_density = 0.5 * np.sum(g * g, axis=(-4, -3)) + penalty_density(d, eps)
    tau = ops.laplacian(d, grid, bc) - gl_force(d, eps)

    w = grid.quad_weights() * _ball_weights(grid, (x0, y0), r)

    X, Y = grid.meshgrid()
    Xf1, Xf2 = _x_field(choice, X, Y, center)
    xdotgrad = Xf1 * g[:, 0] + Xf2 * g[:, 1]  # (3, nx, ny)

    sigma = np.sum(g[:, :, None, :, :] * g[:, None, :, :, :], axis=0)
    grad_x = {"radial": np.eye(2), "x1": np.array([[1.0, 0.0], [0.0, 0.0]]),
              "shear": np.array([[0.0, 0.0], [1.0, 0.0]])}[choice]
    div_x = float(np.trace(grad_x))

    bulk_stress = -float(np.sum(sigma * grad_x[:, :, None, None] * w))
    bulk_div = div_x * float(np.sum(e_density * w))
    rhs = float(np.sum(ops.dot3(xdotgrad, tau) * w))

    if n_theta is None:
        n_theta = max(64, int(np.ceil(2.0 * np.pi * r / min(grid.hx, grid.hy))))
    theta = (np.arange(n_theta) + 0.5) * (2.0 * np.pi / n_theta)
    px = x0 + r * np.cos(theta)
    py = y0 + r * np.sin(theta)
    nu1, nu2 = np.cos(theta), np.sin(theta)
    g_c = _bilinear(g, grid, px, py)  # (3, 2, n_theta)
    e_c = _bilinear(e_density, grid, px, py)
    Xc1, Xc2 = _x_field(choice, px, py, center)
    xg = Xc1 * g_c[:, 0] + Xc2 * g_c[:, 1]
    ng = nu1 * g_c[:, 0] + nu2 * g_c[:, 1]
    darc = r * (2.0 * np.pi / n_theta)
    boundary_kinetic = float(np.sum(np.sum(xg * ng, axis=0)) * darc)
    boundary_energy = -float(np.sum(e_c * (Xc1 * nu1 + Xc2 * nu2)) * darc)

    residual = boundary_kinetic + bulk_stress + bulk_div + boundary_energy - rhs
    return PohozaevReport(
        center=(x0, y0),
        r=r,
        choice=choice,
        boundary_kinetic=boundary_kinetic,
        bulk_stress=bulk_stress,
        bulk_div=bulk_div,
        boundary_energy=boundary_energy,
        rhs=rhs,
        residual=residual,
    )


# ---------------------------------------------------------------------------
# local energy and defect detection
# ---------------------------------------------------------------------------

def _energy_density(d: np.ndarray, grid: Grid, eps: float, bc: str) -> np.ndarray:
    g = ops.gradient(d, grid, bc)
    return 0.5 * np.sum(g * g, axis=(-4, -3)) + penalty_density(d, eps)


def _wrapped_dist_sq(grid: Grid, x0: float, y0: float) -> np.ndarray:
    X, Y = grid.meshgrid()
    dx = X - x0
    dy = Y - y0
    if grid.periodic:
        dx = dx - grid.lx * np.round(dx / grid.lx)
        dy = dy - grid.ly * np.round(dy / grid.ly)
    return dx**2 + dy**2


def local_energy(
    d: np.ndarray, grid: Grid, eps: float, center: tuple[float, float], r: float,
    bc: str | None = None,
) -> float:
    """Relaxation energy 0.5 |grad d|^2 + F_eps integrated over the discrete
    ball (cell-center inclusion; periodic distance on the torus)."""
    if bc is None:
        bc = grid.bc_director
    e = _energy_density(d, grid, eps, bc)
    mask = _wrapped_dist_sq(grid, *center) <= r**2
    return float(np.sum(e * grid.quad_weights() * mask))


@dataclass
class DefectReport:
    """Candidate concentration set: scan centers whose local energy on a
    ball of radius r exceeds the threshold, merged over overlaps.  At fixed
    relaxation parameter the set is a finite-eps proxy for the limit
    concentration set, not the limit object itself."""

    r: float
    delta0_sq: float
    centers: list[tuple[float, float, float]] = field(default_factory=list)  # (x, y, energy)

    @property
    def count(self) -> int:
        return len(self.centers)


def defect_detect(
    d: np.ndarray,
    grid: Grid,
    eps: float,
    r: float,
    delta0_sq: float,
    bc: str | None = None,
    stride: int = 2,
) -> DefectReport:
    """Scan a coarse lattice of centers, flag local energies above the
    threshold, and merge overlapping hits by greedy non-maximum suppression
    (deterministic; larger thresholds give subsets)."""
    if bc is None:
        bc = grid.bc_director
    e_w = _energy_density(d, grid, eps, bc) * grid.quad_weights()
    xs = grid.x
    ys = grid.y

    hits: list[tuple[float, float, float]] = []
    for i in range(0, grid.nx, stride):
        for j in range(0, grid.ny, stride):
            x0, y0 = xs[i], ys[j]
            if not grid.periodic and not grid.contains_ball(x0, y0, r, margin_cells=0):
                continue
            mask = _wrapped_dist_sq(grid, x0, y0) <= r**2
            energy = float(np.sum(e_w * mask))
            if energy > delta0_sq:
                hits.append((energy, x0, y0))

    hits.sort(key=lambda t: (-t[0], t[1], t[2]))
    centers: list[tuple[float, float, float]] = []
    for energy, x0, y0 in hits:
        clash = False
        for _, cx, cy in [(c[2], c[0], c[1]) for c in centers]:
            dx, dy = x0 - cx, y0 - cy
            if grid.periodic:
                dx -= grid.lx * round(dx / grid.lx)
                dy -= grid.ly * round(dy / grid.ly)
            if dx * dx + dy * dy <= (2.0 * r) ** 2:
                clash = True
                break
        if not clash:
            centers.append((x0, y0, energy))
    return DefectReport(r=r, delta0_sq=delta0_sq, centers=centers)


def default_defect_threshold(grid: Grid, eps: float, r: float | None = None) -> float:
    """Default concentration threshold: 0.3 times the local energy of an
    isolated synthetic vortex (core two cells wide) on a ball of radius 8h.
    The threshold scale is a calibration choice, config-overridable."""
    from .initial import vortex_director

    h = max(grid.hx, grid.hy)
    if r is None:
        r = 8.0 * h
    x0, y0 = 0.5 * grid.lx, 0.5 * grid.ly
    ref = vortex_director(grid, x0, y0, core=2.0 * h)
    return 0.3 * local_energy(ref, grid, eps, (x0, y0), r, bc="neumann")


# ---------------------------------------------------------------------------
# coupled relaxation-parameter sweep
# ---------------------------------------------------------------------------

@dataclass
class SweepResult:
    """Per-eps, per-checkpoint observables of a shared-noise sweep, plus the
    Cauchy differences of the stress pairings between consecutive eps."""

    eps_list: list[float]
    times: np.ndarray
    phi_names: list[str]
    penalty: np.ndarray        # (n_eps, n_check)
    dev_norm: np.ndarray       # (n_eps, n_check)  || |d|^2 - 1 ||
    defect_count: np.ndarray   # (n_eps, n_check)
    pairings: np.ndarray       # (n_eps, n_check, n_phi)
    sup_penalty: np.ndarray    # (n_eps,)

    def cauchy(self, i_check: int = -1) -> np.ndarray:
        """|pairing(eps_k) - pairing(eps_{k+1})| at one checkpoint,
        shape (n_eps - 1, n_phi)."""
        p = self.pairings[:, i_check, :]
        return np.abs(np.diff(p, axis=0))


def epsilon_sweep(
    grid: Grid,
    params: Params,
    eps_list,
    seed: int,
    S: NoiseOperatorS,
    h: MagneticField,
    u0: np.ndarray,
    d0: np.ndarray,
    phis: list[TestFunction],
    *,
    checkpoint_every: int = 50,
    defect_r: float | None = None,
    delta0_sq: float | None = None,
    track_budget: bool = False,
) -> SweepResult:
    """Run the system once per eps on one shared Wiener path (same seed and
    dt for every eps, so the realizations are coupled), recording stress
    pairings, penalty mass, sphere deviation and defect counts."""
    eps_list = list(eps_list)
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    if defect_r is None:
        defect_r = 8.0 * max(grid.hx, grid.hy)
    if delta0_sq is None:
        delta0_sq = default_defect_threshold(grid, eps_list[0], defect_r)

    all_series = []
    for eps in eps_list:
        p_eps = Params(**{**vars(params), "eps": eps})
        driver = WienerDriver(seed, S.n_modes)

        def hook(state):
            pair = {
                f"pairing_{tf.name}": stress_pairing(state.d, grid, grid.bc_director, tf)
                for tf in phis
            }
            rep = defect_detect(state.d, grid, p_eps.eps, defect_r, delta0_sq)
            pair["defect_count"] = float(rep.count)
            return pair

        res = simulate_path(
            grid, p_eps, u0, d0, S, h, driver,
            checkpoint_every=checkpoint_every,
            track_budget=track_budget,
            checkpoint_hook=hook,
        )
        all_series.append(res.series)

    times = all_series[0].columns["t"]
    n_check = len(times)
    n_phi = len(phis)
    penalty = np.stack([s.columns["penalty"] for s in all_series])
    dev = np.stack([s.columns["dev_norm"] for s in all_series])
    defects = np.stack([s.columns["defect_count"] for s in all_series])
    pairings = np.empty((len(eps_list), n_check, n_phi))
    for a, s in enumerate(all_series):
        for k, tf in enumerate(phis):
            pairings[a, :, k] = s.columns[f"pairing_{tf.name}"]
    return SweepResult(
        eps_list=eps_list,
        times=times,
        phi_names=[tf.name for tf in phis],
        penalty=penalty,
        dev_norm=dev,
        defect_count=defects,
        pairings=pairings,
        sup_penalty=penalty.max(axis=1),
    )


# ---------------------------------------------------------------------------
# expectation-level growth check
# ---------------------------------------------------------------------------

@dataclass
class GronwallReport:
    t_half: float
    t_full: float
    mean_half: float
    mean_full: float
    se_half: float
    se_full: float
    growth_rate_bound: float
    growth_ok: bool
    second_moment: float
    second_moment_half_sample: float
    second_moment_stable: bool


def gronwall_bound_check(
    series_list: list[PathSeries], params: Params, S: NoiseOperatorS, h: MagneticField
) -> GronwallReport:
    """Sample-level check of the exponential-in-time energy bound.

    Per path X(T) = sup_{t<=T} total + mu*int||grad u||^2 + lam*gamma*int
    ||lap d - f||^2 must stay finite; the growth comparison between T/2 and
    T applies to the sup-energy alone (the dissipation integral grows even
    without noise), against the rate C computed from the noise constants
    (linear-growth constant of the noise operator and the magnetic field
    bound).  The p = 2 sample moment is checked finite and stable under
    halving the path count.
    """
    M = len(series_list)
    if M < 2:
        raise ValueError("need at least 2 paths")
    t = series_list[0].columns["t"]
    i_half = int(np.searchsorted(t, t[-1] / 2.0))
    i_half = min(max(i_half, 1), len(t) - 1)

    def path_quantity(s: PathSeries, i_end: int) -> float:
        c = s.columns
        sup = float(np.max(c["total"][: i_end + 1]))
        diss = params.mu * c["int_diss_u"][i_end] + params.lam * params.gamma * c["int_diss_d"][i_end]
        return sup + float(diss)

    x_half = np.array([path_quantity(s, i_half) for s in series_list])
    x_full = np.array([path_quantity(s, len(t) - 1) for s in series_list])
    sup_half = np.array([float(np.max(s.columns["total"][: i_half + 1])) for s in series_list])
    sup_full = np.array([float(np.max(s.columns["total"])) for s in series_list])
    m_half, m_full = float(x_half.mean()), float(x_full.mean())
    se_half = float(x_half.std(ddof=1) / np.sqrt(M))
    se_full = float(x_full.std(ddof=1) / np.sqrt(M))

    c_rate = 0.5 * params.xi1**2 * S.linear_growth_constant() + 2.0 * params.lam * params.xi2**2 * h.max_abs**2 + 1.0
    dt_gap = float(t[-1] - t[i_half])
    ms_half, ms_full = float(sup_half.mean()), float(sup_full.mean())
    slack = 3.0 * (
        float(sup_full.std(ddof=1) / np.sqrt(M)) / max(ms_full, 1e-300)
        + float(sup_half.std(ddof=1) / np.sqrt(M)) / max(ms_half, 1e-300)
    )
    growth_ok = bool(
        np.isfinite(m_full)
        and np.log(max(ms_full, 1e-300) / max(ms_half, 1e-300)) <= c_rate * dt_gap + slack
    )

    m2 = float(np.mean(x_full**2))
    m2_half_sample = float(np.mean(x_full[: M // 2] ** 2))
    m2_stable = bool(0.5 <= (m2_half_sample + 1e-300) / (m2 + 1e-300) <= 2.0)
    return GronwallReport(
        t_half=float(t[i_half]),
        t_full=float(t[-1]),
        mean_half=m_half,
        mean_full=m_full,
        se_half=se_half,
        se_full=se_full,
        growth_rate_bound=c_rate,
        growth_ok=growth_ok,
        second_moment=m2,
        second_moment_half_sample=m2_half_sample,
        second_moment_stable=m2_stable,
    )
