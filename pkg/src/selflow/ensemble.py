"""Monte-Carlo orchestration: independent paths, merged statistics, and the
coupled relaxation-parameter sweep averaged over paths.

Per-path seeds derive from the base seed through a splitmix64 mix of the
path index.  Results are collected into arrays indexed by path, then
reduced in index order, so the statistics are bit-identical no matter in
which order (or on how many threads) the paths actually executed.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import (
    RunConfig,
    build_grid,
    build_initial_d,
    build_initial_u,
    build_magnetic_field,
    build_noise_operator,
    build_params,
    parse_eps_list,
)
from .diagnostics import SweepResult, WeakFormTracker, epsilon_sweep
from .fields import TestFunction, director_test_function, solenoidal_test_function
from .noise import WienerDriver, split_seed
from .pathrun import PathResult, PathSeries, simulate_batch, simulate_path

STAT_FIELDS = ("kinetic", "dirichlet", "penalty", "total", "ledger1", "ledger2",
               "dev_norm", "max_abs_d")


@dataclass
class EnsembleSpec:
    """How many paths, how they are seeded, and what gets tracked."""

    n_paths: int
    base_seed: int = 0
    checkpoint_every: int = 50
    track_budget: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")

    def path_seed(self, index: int) -> int:
        return split_seed(self.base_seed, index)


@dataclass
class EnsembleStats:
    """Per-checkpoint sample statistics of the tracked scalars, plus path
    suprema (sup over checkpoints, an under-estimate of the continuous-time
    sup at coarse checkpointing)."""

    times: np.ndarray
    n_paths: int
    mean: dict[str, np.ndarray]
    var: dict[str, np.ndarray]
    se: dict[str, np.ndarray]
    min: dict[str, np.ndarray]
    max: dict[str, np.ndarray]
    sup_total_mean: float
    sup_total_se: float

    def ledger_ci(self, name: str, i: int = -1, z: float = 3.0) -> tuple[float, float]:
        """(sample mean, z * standard error) of a ledger at checkpoint i."""
        return float(self.mean[name][i]), float(z * self.se[name][i])


@dataclass
class EnsembleResult:
    stats: EnsembleStats
    series: list[PathSeries]
    seeds: list[int]


def run_path(config: RunConfig, seed: int, *, track_invariants: bool = False,
             weak_tracker: WeakFormTracker | None = None,
             normals_table: np.ndarray | None = None,
             checkpoint_hook=None) -> PathResult:
    """One path, fully determined by (config, seed)."""
    grid = build_grid(config)
    u0 = build_initial_u(config, grid)
    d0 = build_initial_d(config, grid)
    params = build_params(config, grid, umax=float(np.max(np.abs(u0))))
    S = build_noise_operator(config, grid)
    h = build_magnetic_field(config, grid)
    driver = WienerDriver(seed, config.modes)
    if weak_tracker is None and config.track_weak:
        weak_tracker = default_weak_tracker(grid, params)
    return simulate_path(
        grid, params, u0, d0, S, h, driver,
        checkpoint_every=config.checkpoint_every,
        track_budget=config.track_budget,
        track_invariants=track_invariants or config.track_invariants,
        weak_tracker=weak_tracker,
        normals_table=normals_table,
        checkpoint_hook=checkpoint_hook,
    )


def default_weak_tracker(grid, params) -> WeakFormTracker:
    u_tests = [solenoidal_test_function(grid, 1, 1, name="phi11"),
               solenoidal_test_function(grid, 2, 1, name="phi21")]
    d_tests = [director_test_function(grid, 1, 1, component=0, name="psi0"),
               director_test_function(grid, 1, 1, component=2, name="psi2")]
    return WeakFormTracker(grid, params, u_tests, d_tests)


def default_sweep_test_functions(grid) -> list[TestFunction]:
    return [
        solenoidal_test_function(grid, 1, 1, name="phi11"),
        solenoidal_test_function(grid, 2, 1, name="phi21"),
        solenoidal_test_function(grid, 1, 2, name="phi12"),
    ]


def run_ensemble(spec: EnsembleSpec, config: RunConfig,
                 order: list[int] | None = None, batch_size: int = 16) -> EnsembleResult:
    """Independent paths with derived seeds, merged into EnsembleStats.

    Paths are grouped into fixed index-contiguous batches that advance in
    lockstep (vectorized over a leading path axis).  ``order`` permutes only
    the execution order of those work units (a reproducibility probe);
    results are stored by path index, so the output does not depend on it.
    Bounded grids fall back to one path per work unit.
    """
    cfg_paths = RunConfig(**{**vars(config)})
    cfg_paths.checkpoint_every = spec.checkpoint_every
    cfg_paths.track_budget = spec.track_budget

    n = spec.n_paths
    seeds = [spec.path_seed(i) for i in range(n)]
    results: list[PathSeries | None] = [None] * n

    grid = build_grid(cfg_paths)
    if not grid.periodic:
        batch_size = 1
    groups = [list(range(a, min(a + batch_size, n))) for a in range(0, n, batch_size)]

    u0 = build_initial_u(cfg_paths, grid)
    d0 = build_initial_d(cfg_paths, grid)
    params = build_params(cfg_paths, grid, umax=float(np.max(np.abs(u0))))
    S = build_noise_operator(cfg_paths, grid)
    h = build_magnetic_field(cfg_paths, grid)

    def work(g: int) -> None:
        idx = groups[g]
        if len(idx) == 1 and not grid.periodic:
            results[idx[0]] = run_path(cfg_paths, seeds[idx[0]]).series
            return
        drivers = [WienerDriver(seeds[i], cfg_paths.modes) for i in idx]
        series = simulate_batch(
            grid, params, u0, d0, S, h, drivers,
            checkpoint_every=spec.checkpoint_every,
            track_budget=spec.track_budget,
        )
        for i, s in zip(idx, series):
            results[i] = s

    group_order = list(range(len(groups))) if order is None else list(order)
    if spec.threads > 1:
        with ThreadPoolExecutor(max_workers=spec.threads) as ex:
            list(ex.map(work, group_order))
    else:
        for g in group_order:
            work(g)

    series = [s for s in results]  # index order regardless of execution order
    return EnsembleResult(stats=reduce_stats(series, spec), series=series, seeds=seeds)


def reduce_stats(series: list[PathSeries], spec: EnsembleSpec) -> EnsembleStats:
    times = series[0].columns["t"]
    n = len(series)
    mean, var, se, mn, mx = {}, {}, {}, {}, {}
    for name in STAT_FIELDS:
        stack = np.stack([s.columns[name] for s in series])  # (M, n_check)
        mean[name] = stack.mean(axis=0)
        v = stack.var(axis=0, ddof=1) if n > 1 else np.zeros(stack.shape[1])
        var[name] = v
        se[name] = np.sqrt(v / n)
        mn[name] = stack.min(axis=0)
        mx[name] = stack.max(axis=0)
    sups = np.array([s.sup_total() for s in series])
    sup_se = float(sups.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return EnsembleStats(
        times=times,
        n_paths=n,
        mean=mean,
        var=var,
        se=se,
        min=mn,
        max=mx,
        sup_total_mean=float(sups.mean()),
        sup_total_se=sup_se,
    )


@dataclass
class CoupledSweepResult:
    """Cauchy differences of the stress pairings, averaged over paths."""

    eps_list: list[float]
    phi_names: list[str]
    per_path: list[SweepResult]
    cauchy_mean: np.ndarray  # (n_eps-1, n_phi)
    cauchy_se: np.ndarray


def coupled_sweep(spec: EnsembleSpec, config: RunConfig,
                  eps_list: list[float] | None = None) -> CoupledSweepResult:
    """Per-path coupled sweeps (one shared Wiener path per sweep), with the
    pairing Cauchy differences averaged across paths."""
    if eps_list is None:
        eps_list = parse_eps_list(config.sweep_eps)
    grid = build_grid(config)
    u0 = build_initial_u(config, grid)
    d0 = build_initial_d(config, grid)
    params = build_params(config, grid, umax=float(np.max(np.abs(u0))))
    S = build_noise_operator(config, grid)
    h = build_magnetic_field(config, grid)
    phis = default_sweep_test_functions(grid)

    per_path = []
    for i in range(spec.n_paths):
        res = epsilon_sweep(
            grid, params, eps_list, spec.path_seed(i), S, h, u0, d0, phis,
            checkpoint_every=spec.checkpoint_every,
            track_budget=spec.track_budget,
        )
        per_path.append(res)
    if len(eps_list) < 2:
        empty = np.zeros((0, len(phis)))
        return CoupledSweepResult(eps_list, [p.name for p in phis], per_path, empty, empty)
    stack = np.stack([r.cauchy() for r in per_path])  # (M, n_eps-1, n_phi)
    mean = stack.mean(axis=0)
    se = (
        stack.std(axis=0, ddof=1) / np.sqrt(spec.n_paths)
        if spec.n_paths > 1
        else np.zeros_like(mean)
    )
    return CoupledSweepResult(eps_list, [p.name for p in phis], per_path, mean, se)
