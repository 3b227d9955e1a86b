"""Seeded Wiener drivers, the Hilbert-Schmidt noise operator, and the
magnetic field.

The velocity noise is a truncated cylindrical Wiener process: N independent
Brownian modes B_i acting through a diagonal operator

    S(u)(e_i) = sigma0 * i^{-q} * P(psi_i u + g_i),

with P the Leray projection, psi_i smooth scalar shapes and g_i optional
divergence-free additive seeds.  The director noise uses one extra scalar
Brownian motion.  The driver is counter-based (Philox) and keyed only by
(seed, n_modes), so increment streams are bit-identical across eps and grid
choices; that is what makes coupled eps-sweeps meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import operators as ops
from .grids import Grid
from .projection import PROJ_TOL, leray_project

_SPLITMIX_GAMMA = np.uint64(0x9E3779B97F4A7C15)


def split_seed(base_seed: int, index: int) -> int:
    """Derive the seed of path ``index`` from ``base_seed`` (splitmix64 mix).

    Distinct indices give distinct, decorrelated 64-bit seeds without any
    coordination between paths.
    """
    with np.errstate(over="ignore"):
        z = np.uint64(base_seed & 0xFFFFFFFFFFFFFFFF) + _SPLITMIX_GAMMA * np.uint64(index + 1)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return int(z)


class WienerDriver:
    """Increment source for the N velocity modes and the director motion.

    One driver owns one path.  Each step draws N+1 standard normals from a
    Philox stream keyed by the seed; increments are the normals scaled by
    sqrt(dt), so the stream position is dt-independent and two runs with the
    same (seed, n_modes) see bit-identical noise regardless of grid or eps.
    """

    def __init__(self, seed: int, n_modes: int):
        if n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        self.seed = int(seed)
        self.n_modes = int(n_modes)
        self._gen = np.random.Generator(np.random.Philox(key=self.seed))
        self.step = 0

    def sample_normals(self) -> np.ndarray:
        """Next row of N+1 standard normals; advances the stream."""
        z = self._gen.standard_normal(self.n_modes + 1)
        self.step += 1
        return z

    def sample_increments(self, dt: float) -> tuple[np.ndarray, float]:
        """Wiener increments ({dB_i}, dW2) for one step of size dt."""
        if dt < 0:
            raise ValueError("dt must be nonnegative")
        z = self.sample_normals() * np.sqrt(dt)
        return z[: self.n_modes], float(z[self.n_modes])

    def normal_table(self, n_steps: int) -> np.ndarray:
        """(n_steps, N+1) standard normals; used to couple dt refinements
        by pairwise summation on one Brownian path."""
        z = self._gen.standard_normal((n_steps, self.n_modes + 1))
        self.step += n_steps
        return z


def coarsen_normals(table: np.ndarray, factor: int) -> np.ndarray:
    """Aggregate a fine-step standard-normal table onto a step ``factor``
    times coarser, preserving the underlying Brownian path: normals sum in
    blocks and rescale by 1/sqrt(factor) (increments scale by sqrt(dt))."""
    n = table.shape[0]
    if n % factor:
        raise ValueError("table length must be divisible by the coarsening factor")
    out = table.reshape(n // factor, factor, table.shape[1]).sum(axis=1)
    return out / np.sqrt(factor)


@dataclass
class MagneticField:
    """External field h acting on the director, bounded with bounded first
    differences (a discrete stand-in for H^2 regularity)."""

    grid: Grid
    values: np.ndarray
    descriptor: str = ""

    @classmethod
    def constant(cls, grid: Grid, h: tuple[float, float, float]) -> "MagneticField":
        vals = np.zeros((3, grid.nx, grid.ny))
        vals[0], vals[1], vals[2] = h
        return cls(grid, vals, descriptor=f"const:{h[0]},{h[1]},{h[2]}")

    @classmethod
    def wave(cls, grid: Grid, amps: tuple[float, float, float]) -> "MagneticField":
        """Smooth non-constant field: a spatially varying h makes the
        director-noise ledger a genuine (non-degenerate) martingale, since
        with constant h the integral of <d x h, lap d> vanishes identically.
        """
        X, Y = grid.meshgrid()
        ax, ay = 2.0 * np.pi / grid.lx, 2.0 * np.pi / grid.ly
        a, b, c = amps
        vals = np.stack(
            [
                a * np.cos(ax * X) * np.cos(ay * Y),
                b * np.sin(ax * X + 0.5),
                c * (1.0 + 0.5 * np.sin(ax * X) * np.sin(ay * Y)),
            ]
        )
        return cls(grid, vals, descriptor=f"wave:{a},{b},{c}")

    @property
    def max_abs(self) -> float:
        return float(np.max(np.linalg.norm(self.values, axis=0)))

    def check_bounded(self, bound: float = 1e6) -> bool:
        g = ops.gradient(self.values, self.grid, "neumann" if not self.grid.periodic else "periodic")
        return bool(np.all(np.isfinite(self.values)) and ops.norm_linf(g) < bound)


def default_mode_shapes(grid: Grid, n_modes: int) -> np.ndarray:
    """Smooth scalar shapes psi_i, shape (N, nx, ny).

    Bounded domains use cos(i pi x/lx) cos(i pi y/ly); periodic grids use the
    periodized frequencies 2 pi i / l so the shapes stay smooth across the
    seam (the mode shapes are an implementation choice, not constrained
    beyond smoothness).
    """
    X, Y = grid.meshgrid()
    idx = np.arange(1, n_modes + 1)
    if grid.periodic:
        ax = 2.0 * np.pi * idx / grid.lx
        ay = 2.0 * np.pi * idx / grid.ly
    else:
        ax = np.pi * idx / grid.lx
        ay = np.pi * idx / grid.ly
    return np.cos(ax[:, None, None] * X) * np.cos(ay[:, None, None] * Y)


class NoiseOperatorS:
    """Diagonal Hilbert-Schmidt noise operator, immutable and shareable.

    Lipschitz continuity and the linear-growth bound hold by construction:
    the projection is an L2 contraction, so

        sum_i ||S(u)(e_i)||^2 <= C (1 + ||u||^2)

    with C = 2 sigma0^2 max(sum i^{-2q} |psi_i|_inf^2, sum i^{-2q} ||g_i||^2).
    """

    def __init__(
        self,
        grid: Grid,
        n_modes: int = 8,
        sigma0: float = 1.0,
        q: float = 1.5,
        shapes: np.ndarray | None = None,
        additive: np.ndarray | None = None,
        proj_tol: float = PROJ_TOL,
    ):
        if n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        if sigma0 < 0:
            raise ValueError("sigma0 must be nonnegative")
        self.grid = grid
        self.n_modes = int(n_modes)
        self.sigma0 = float(sigma0)
        self.q = float(q)
        self.proj_tol = proj_tol
        self.shapes = default_mode_shapes(grid, n_modes) if shapes is None else np.asarray(shapes, float)
        if self.shapes.shape != (n_modes, grid.nx, grid.ny):
            raise ValueError("shapes must have shape (N, nx, ny)")
        if additive is None:
            additive = np.zeros((n_modes, 2, grid.nx, grid.ny))
        self.additive = np.asarray(additive, float)
        if self.additive.shape != (n_modes, 2, grid.nx, grid.ny):
            raise ValueError("additive seeds must have shape (N, 2, nx, ny)")
        self._has_additive = bool(np.any(self.additive))
        self.decay = self.sigma0 * np.arange(1, n_modes + 1, dtype=float) ** (-self.q)

    def _pre_projection(self, u: np.ndarray) -> np.ndarray:
        # (N, 2, nx, ny) stack of psi_i u + g_i, scaled mode by mode
        stack = self.shapes[:, None, :, :] * u[None, :, :, :] + self.additive
        return self.decay[:, None, None, None] * stack

    def mode_fields(self, u: np.ndarray) -> np.ndarray:
        """All S(u)(e_i), shape (N, 2, nx, ny), each divergence-free."""
        stack = self._pre_projection(u)
        out = np.empty_like(stack)
        for i in range(self.n_modes):
            out[i], _ = leray_project(stack[i], self.grid, tol=self.proj_tol)
        return out

    def mix_increments(self, u: np.ndarray, dB: np.ndarray) -> np.ndarray:
        """Mode sum sum_i dB_i sigma0 i^{-q} (psi_i u + g_i) BEFORE projection.

        By linearity, projecting this once equals summing the projected
        modes; the coupled stepper folds it into its own projection.
        """
        dB = np.asarray(dB)
        if dB.shape[-1] != self.n_modes:
            raise ValueError(f"expected {self.n_modes} increments, got {dB.shape[-1]}")
        wts = self.decay * dB
        mix = np.tensordot(wts, self.shapes, axes=(-1, 0))[..., None, :, :] * u
        if self._has_additive:
            mix = mix + np.tensordot(wts, self.additive, axes=(-1, 0))
        return mix

    def apply_increments(self, u: np.ndarray, dB: np.ndarray) -> np.ndarray:
        """sum_i S(u)(e_i) dB_i, divergence-free within the projection tol."""
        out, _ = leray_project(self.mix_increments(u, dB), self.grid, tol=self.proj_tol)
        return out

    def hs_norm_sq(self, u: np.ndarray):
        """Squared Hilbert-Schmidt norm sum_i ||S(u)(e_i)||^2.

        Accepts a batched velocity (..., 2, nx, ny) and returns per-path
        values with the leading axes preserved.
        """
        if u.ndim == 3 and self.grid.periodic:
            # one batched spectral projection across all modes
            from .projection import _project_periodic_fft

            proj, _ = _project_periodic_fft(self._pre_projection(u), self.grid,
                                            need_pressure=False)
            return float(np.sum(proj * proj * self.grid.quad_weights()))
        if u.ndim == 3:
            proj = self.mode_fields(u)
            return float(np.sum(proj * proj * self.grid.quad_weights()))
        # batched paths: loop modes, project each mode across the batch
        total = 0.0
        for i in range(self.n_modes):
            v = self.decay[i] * (self.shapes[i] * u + self.additive[i])
            proj, _ = leray_project(v, self.grid, tol=self.proj_tol, need_pressure=False)
            total = total + ops.pair_vec(proj, proj, self.grid)
        return total

    def linear_growth_constant(self) -> float:
        """C with hs_norm_sq(u) <= C (1 + ||u||^2) for every u."""
        wsq = self.decay**2
        shape_part = float(np.sum(wsq * np.max(np.abs(self.shapes), axis=(-2, -1)) ** 2))
        w = self.grid.quad_weights()
        add_part = float(np.sum(wsq * np.sum(self.additive**2 * w, axis=(-3, -2, -1))))
        return 2.0 * max(shape_part, add_part, 1e-300)


def apply_noise_d(d: np.ndarray, h: np.ndarray, dW2: float) -> np.ndarray:
    """Director noise increment (d x h) dW2, pointwise."""
    return ops.cross(d, h) * dW2


def k2_norm(coeffs) -> float:
    """Norm of a coefficient sequence in the enlarged space K2:
    sqrt(sum_i c_i^2 / i^2), i starting at 1."""
    c = np.asarray(coeffs, dtype=float)
    if c.size == 0:
        return 0.0
    i = np.arange(1, c.size + 1, dtype=float)
    return float(np.sqrt(np.sum((c / i) ** 2)))


def k2_truncation_tail(n_modes: int) -> float:
    """K2 norm of the dropped tail of a unit-coefficient sequence:
    sqrt(pi^2/6 - sum_{i<=N} 1/i^2).  Quantifies the mode truncation."""
    head = np.sum(1.0 / np.arange(1, n_modes + 1, dtype=float) ** 2)
    return float(np.sqrt(max(np.pi**2 / 6.0 - head, 0.0)))
