"""Leray projection onto discretely divergence-free fields.

The projection removes the central-difference divergence: it solves the
composite pressure Poisson problem L p = div v where L = div(grad(.)) is the
*wide* Laplacian (central differences applied twice), so that u = v - grad p
satisfies div u = 0 in the same discrete sense that :func:`divergence`
measures.  Using the compact 5-point stencil here instead would leave an
O(h^2) divergence floor.

Periodic grids get two interchangeable solvers for the same linear system:
a direct spectral solve with modified wavenumbers (default, exact) and
matrix-free conjugate gradients (the cross-check route).  Bounded (no-slip)
grids solve the interior system with a homogeneous-Neumann pressure closure
via sparse least squares; only the interior divergence is controllable there
because the boundary rows use one-sided stencils.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grids import Grid
from .operators import deriv, divergence, inner, norm_linf

PROJ_TOL = 1e-10


class ProjectionError(RuntimeError):
    """Pressure solve failed to reach the requested divergence tolerance."""

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved residual {achieved:.3e})")
        self.achieved = achieved


def _modified_wavenumbers(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    key = "wavenumbers"
    if key not in grid._cache:
        mx = np.rint(np.fft.fftfreq(grid.nx) * grid.nx).astype(int)
        my = np.arange(grid.ny // 2 + 1)
        s1 = np.sin(2.0 * np.pi * mx / grid.nx) / grid.hx
        s2 = np.sin(2.0 * np.pi * my / grid.ny) / grid.hy
        # Nyquist columns are exact kernel modes of the central difference
        s1[np.abs(mx) * 2 == grid.nx] = 0.0
        if grid.ny % 2 == 0:
            s2[-1] = 0.0
        grid._cache[key] = (s1[:, None], s2[None, :])
    return grid._cache[key]


def _project_periodic_fft(
    v: np.ndarray, grid: Grid, need_pressure: bool = True
) -> tuple[np.ndarray, np.ndarray | None]:
    s1, s2 = _modified_wavenumbers(grid)
    vhat = np.fft.rfft2(v, axes=(-2, -1))
    dhat = 1j * (s1 * vhat[..., 0, :, :] + s2 * vhat[..., 1, :, :])
    denom = s1 * s1 + s2 * s2
    with np.errstate(divide="ignore", invalid="ignore"):
        phat = np.where(denom > 0.0, -dhat / denom, 0.0)
    uhat = vhat
    uhat[..., 0, :, :] -= 1j * s1 * phat
    uhat[..., 1, :, :] -= 1j * s2 * phat
    u = np.fft.irfft2(uhat, s=(grid.nx, grid.ny), axes=(-2, -1))
    p = np.fft.irfft2(phat, s=(grid.nx, grid.ny), axes=(-2, -1)) if need_pressure else None
    return u, p


def _wide_laplacian_periodic(p: np.ndarray, grid: Grid) -> np.ndarray:
    out = (np.roll(p, -2, axis=-2) - 2.0 * p + np.roll(p, 2, axis=-2)) / (4.0 * grid.hx**2)
    out += (np.roll(p, -2, axis=-1) - 2.0 * p + np.roll(p, 2, axis=-1)) / (4.0 * grid.hy**2)
    return out


def _project_periodic_cg(
    v: np.ndarray, grid: Grid, tol: float, maxiter: int
) -> tuple[np.ndarray, np.ndarray]:
    b = divergence(v, grid, "periodic")
    b -= b.mean()
    # CG on the positive-semidefinite operator -L; the right-hand side is
    # orthogonal to the (constant + Nyquist) kernel by construction.
    p = np.zeros_like(b)
    r = -b.copy()
    z = r.copy()
    rs = np.vdot(r, r).real
    for _ in range(maxiter):
        if norm_linf(r) <= tol:
            break
        az = -_wide_laplacian_periodic(z, grid)
        alpha = rs / np.vdot(z, az).real
        p += alpha * z
        r -= alpha * az
        rs_new = np.vdot(r, r).real
        z = r + (rs_new / rs) * z
        rs = rs_new
    else:
        raise ProjectionError("pressure CG did not converge", norm_linf(r))
    p -= p.mean()
    gp = np.stack([deriv(p, grid, 0, "periodic"), deriv(p, grid, 1, "periodic")])
    return v - gp, p


def _bounded_1d_blocks(n: int, h: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """1-D blocks of the bounded pressure system.

    B: all-node pressure -> central pressure gradient at the n-2 interior
       nodes (boundary pressures are free unknowns; that is the natural,
       weakly-imposed homogeneous Neumann condition).
    D: interior corrections (zero at the wall) -> central divergence rows.
    S: selection of interior nodes.
    """
    m = n - 2
    B = np.zeros((m, n))
    D = np.zeros((m, m))
    S = np.zeros((m, n))
    for r in range(m):
        i = r + 1
        B[r, i + 1] += 1.0 / (2.0 * h)
        B[r, i - 1] -= 1.0 / (2.0 * h)
        S[r, i] = 1.0
        if r + 1 < m:
            D[r, r + 1] += 1.0 / (2.0 * h)
        if r - 1 >= 0:
            D[r, r - 1] -= 1.0 / (2.0 * h)
    return B, D, S


def _bounded_solver(grid: Grid):
    """Cached pieces of the bounded projection.

    The map A takes pressures on all nodes to the central divergence (at
    interior nodes) of the interior-supported correction grad p.  A is onto
    (verified by rank at build time for small grids, structural otherwise),
    so the minimum-norm pressure solves A A^T y = b exactly; A A^T is SPD
    and factorized once per grid.
    """
    key = "leray_bounded"
    if key not in grid._cache:
        Bx, Dx, Sx = _bounded_1d_blocks(grid.nx, grid.hx)
        By, Dy, Sy = _bounded_1d_blocks(grid.ny, grid.hy)
        A = (
            sp.kron(sp.csr_matrix(Dx @ Bx), sp.csr_matrix(Sy))
            + sp.kron(sp.csr_matrix(Sx), sp.csr_matrix(Dy @ By))
        ).tocsr()
        gram = (A @ A.T).tocsc()
        lu = spla.splu(gram)
        grid._cache[key] = (A, lu)
    return grid._cache[key]


def interior_divergence_max(u: np.ndarray, grid: Grid) -> float:
    d = divergence(u, grid, "periodic" if grid.periodic else "none")
    if grid.periodic:
        return norm_linf(d)
    return norm_linf(d[1:-1, 1:-1])


def _project_bounded(
    v: np.ndarray, grid: Grid, tol: float, maxiter: int
) -> tuple[np.ndarray, np.ndarray]:
    A, lu = _bounded_solver(grid)
    u = v.copy()
    u[:, 0, :] = u[:, -1, :] = 0.0
    u[:, :, 0] = u[:, :, -1] = 0.0
    b0 = divergence(u, grid, "none")[1:-1, 1:-1].ravel()

    # minimum-norm pressure via the Gram factorization, with iterative
    # refinement to wash out the squared conditioning of A A^T
    p_flat = np.zeros(grid.nx * grid.ny)
    r = b0.copy()
    for _ in range(4):
        if norm_linf(r.reshape(grid.nx - 2, grid.ny - 2)) <= 0.01 * tol:
            break
        p_flat += A.T @ lu.solve(r)
        r = b0 - A @ p_flat

    p = p_flat.reshape(grid.nx, grid.ny)
    u[0, 1:-1, 1:-1] -= (p[2:, 1:-1] - p[:-2, 1:-1]) / (2.0 * grid.hx)
    u[1, 1:-1, 1:-1] -= (p[1:-1, 2:] - p[1:-1, :-2]) / (2.0 * grid.hy)
    achieved = interior_divergence_max(u, grid)
    if achieved > tol:
        raise ProjectionError("bounded pressure solve stalled", achieved)
    p = p - inner(p, np.ones_like(p), grid) / grid.area
    return u, p


def leray_project(
    v: np.ndarray,
    grid: Grid,
    tol: float = PROJ_TOL,
    maxiter: int | None = None,
    method: str = "auto",
    need_pressure: bool = True,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Project v onto the divergence-free space; returns (u, p), u = v - grad p.

    ``method``: 'auto' (spectral on periodic grids), 'fft', or 'cg'.
    ``need_pressure=False`` skips reconstructing p (stepping hot path).
    Raises :class:`ProjectionError` with the achieved residual if the solver
    cannot reach ``tol``.
    """
    if not np.all(np.isfinite(v)):
        raise ValueError("leray_project: input contains non-finite values")
    grid.check_values(v)
    if maxiter is None:
        maxiter = 60 * max(grid.nx, grid.ny)
    if grid.periodic:
        if method in ("auto", "fft"):
            return _project_periodic_fft(v, grid, need_pressure=need_pressure)
        if method == "cg":
            return _project_periodic_cg(v, grid, tol, maxiter)
        raise ValueError(f"unknown projection method {method!r}")
    if v.ndim > 3:
        lanes = [_project_bounded(v[m], grid, tol, maxiter) for m in range(v.shape[0])]
        return np.stack([u for u, _ in lanes]), np.stack([p for _, p in lanes])
    return _project_bounded(v, grid, tol, maxiter)
