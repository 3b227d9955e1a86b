"""Drive paths from t = 0 to T, emitting checkpoint records.

Two runners share one stepping core: :func:`simulate_path` advances a single
path (with optional weak-form tracking and per-step invariant monitors), and
:func:`simulate_batch` advances many independent paths at once as one
leading-axis array state, which is how ensembles stay affordable in pure
numpy.  Everything downstream (budget residuals, ensembles, sweeps) consumes
the :class:`PathSeries` produced here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import operators as ops
from .dynamics import (
    Params,
    SimState,
    check_stability,
    gl_force,
    penalty_density,
    step_coupled,
)
from .noise import MagneticField, NoiseOperatorS, WienerDriver

RECORD_FIELDS = (
    "t",
    "kinetic",
    "dirichlet",
    "penalty",
    "total",
    "dissipation_u",
    "dissipation_d",
    "hs",
    "strat_drift",
    "ledger1",
    "ledger2",
    "int_diss_u",
    "int_diss_d",
    "int_hs",
    "int_strat",
    "max_abs_d",
    "dev_norm",
)


@dataclass
class EnergyRecord:
    """Energy decomposition and budget terms at one instant.

    ``hs`` carries its 0.5 xi1^2 prefactor; ``strat_drift`` is the bare
    0.5 (<grad d, grad((d x h) x h)> + ||grad(d x h)||^2) without constants.
    The int_* entries are the running left-endpoint time integrals
    accumulated by the stepper.
    """

    t: float
    kinetic: float
    dirichlet: float
    penalty: float
    total: float
    dissipation_u: float
    dissipation_d: float
    hs: float
    strat_drift: float
    ledger1: float
    ledger2: float
    int_diss_u: float = 0.0
    int_diss_d: float = 0.0
    int_hs: float = 0.0
    int_strat: float = 0.0
    max_abs_d: float = 0.0
    dev_norm: float = 0.0


def record_columns(state: SimState, params: Params, S: NoiseOperatorS,
                   h: MagneticField) -> dict:
    """Every energy-identity term at the current state; batch-transparent
    (per-path values when the state carries a leading path axis)."""
    grid, u, d = state.grid, state.u, state.d
    kinetic = 0.5 * ops.pair_vec(u, u, grid)
    dirichlet = 0.5 * ops.dirichlet_form_vec(d, d, grid)
    pen = ops.pair_scalar(penalty_density(d, params.eps), 1.0, grid)
    tau = ops.laplacian(d, grid, state.bc_d()) - gl_force(d, params.eps)
    dxh = ops.cross(d, h.values)
    dxhxh = ops.cross(dxh, h.values)
    hs = 0.5 * params.xi1**2 * (S.hs_norm_sq(u) if params.xi1 != 0.0 else 0.0)
    strat = 0.5 * (
        ops.dirichlet_form_vec(d, dxhxh, grid) + ops.dirichlet_form_vec(dxh, dxh, grid)
    )
    dev_sq = ops.dot3(d, d) - 1.0
    led = state.ledgers
    shape = np.shape(kinetic)
    return {
        "t": state.t,
        "kinetic": kinetic,
        "dirichlet": dirichlet,
        "penalty": pen,
        "total": kinetic + params.lam * (dirichlet + pen),
        "dissipation_u": ops.dirichlet_form_vec(u, u, grid),
        "dissipation_d": ops.pair_vec(tau, tau, grid),
        "hs": hs,
        "strat_drift": strat,
        "ledger1": led.noise_u + np.zeros(shape),
        "ledger2": led.noise_d + np.zeros(shape),
        "int_diss_u": led.int_diss_u + np.zeros(shape),
        "int_diss_d": led.int_diss_d + np.zeros(shape),
        "int_hs": led.int_hs + np.zeros(shape),
        "int_strat": led.int_strat + np.zeros(shape),
        "max_abs_d": np.sqrt(np.max(ops.dot3(d, d), axis=(-2, -1))),
        "dev_norm": np.sqrt(np.maximum(ops.pair_scalar(dev_sq, dev_sq, grid), 0.0)),
    }


def energy_record(state: SimState, params: Params, S: NoiseOperatorS,
                  h: MagneticField) -> EnergyRecord:
    """Pure single-path evaluation of every energy-identity term."""
    cols = record_columns(state, params, S, h)
    return EnergyRecord(**{k: float(v) for k, v in cols.items()})


@dataclass
class InvariantSink:
    """Per-step monitors: worst divergence and advection-pairing defect."""

    max_divergence: float = 0.0
    max_adv_ratio: float = 0.0

    def record_advection(self, pairing: float, u_norm: float) -> None:
        self.max_adv_ratio = max(self.max_adv_ratio, abs(pairing) / (1.0 + u_norm**3))

    def record_divergence(self, div_inf: float) -> None:
        self.max_divergence = max(self.max_divergence, div_inf)


@dataclass
class PathSeries:
    """Checkpoint table for one path: one array per record field, plus any
    extra columns contributed by a checkpoint hook."""

    columns: dict[str, np.ndarray] = field(default_factory=dict)

    def __getattr__(self, name):
        try:
            return self.columns[name]
        except KeyError as exc:
            raise AttributeError(name) from exc

    def __len__(self):
        return len(self.columns["t"])

    def sup_total(self) -> float:
        return float(np.max(self.columns["total"]))


@dataclass
class PathResult:
    series: PathSeries
    state: SimState
    seed: int
    invariants: InvariantSink | None = None
    weak_tracker: object | None = None


def _resolve_steps(params: Params, n_steps: int | None) -> int:
    if n_steps is None:
        n_steps = max(1, int(round(params.T / params.dt)))
    return n_steps


def simulate_path(
    grid,
    params: Params,
    u0: np.ndarray,
    d0: np.ndarray,
    S: NoiseOperatorS,
    h: MagneticField,
    driver: WienerDriver,
    *,
    checkpoint_every: int = 50,
    n_steps: int | None = None,
    track_budget: bool = True,
    track_invariants: bool = False,
    weak_tracker=None,
    normals_table: np.ndarray | None = None,
    checkpoint_hook=None,
) -> PathResult:
    """Step one path to T and collect checkpoint records.

    Raises the stepper's stability / blow-up errors with the failing time
    attached.  Deterministic in (inputs, driver seed).
    """
    n_steps = _resolve_steps(params, n_steps)
    check_stability(params, grid, umax=float(np.max(np.abs(u0))))
    state = SimState.initial(grid, u0, d0)
    if weak_tracker is not None:
        weak_tracker.initialize(u0, d0)
    sink = InvariantSink() if track_invariants else None
    d_bc = d0 if grid.bc_director == "dirichlet" else None

    rows: list[EnergyRecord] = []
    extras: dict[str, list] = {}

    def emit():
        rows.append(energy_record(state, params, S, h))
        if checkpoint_hook is not None:
            for key, val in checkpoint_hook(state).items():
                extras.setdefault(key, []).append(val)

    emit()
    for step in range(n_steps):
        normals = None if normals_table is None else normals_table[step]
        step_coupled(
            state,
            params,
            driver,
            S,
            h,
            normals=normals,
            track_budget=track_budget,
            weak_tracker=weak_tracker,
            invariant_sink=sink,
            d_bc_values=d_bc,
        )
        if (step + 1) % checkpoint_every == 0 or step + 1 == n_steps:
            emit()

    columns = {name: np.array([getattr(r, name) for r in rows]) for name in RECORD_FIELDS}
    for key, vals in extras.items():
        columns[key] = np.array(vals)
    return PathResult(PathSeries(columns), state, driver.seed, sink, weak_tracker)


def simulate_batch(
    grid,
    params: Params,
    u0: np.ndarray,
    d0: np.ndarray,
    S: NoiseOperatorS,
    h: MagneticField,
    drivers: list[WienerDriver],
    *,
    checkpoint_every: int = 50,
    n_steps: int | None = None,
    track_budget: bool = False,
    rng_chunk: int = 256,
) -> list[PathSeries]:
    """Advance len(drivers) independent paths in lockstep as one batched
    state (leading path axis).  Each path consumes its own driver stream
    exactly as the single-path runner would, so lane m reproduces
    simulate_path with drivers[m] up to floating-point associativity of the
    batched kernels (bit-identical in practice; asserted in the tests).
    """
    n_steps = _resolve_steps(params, n_steps)
    m = len(drivers)
    check_stability(params, grid, umax=float(np.max(np.abs(u0))))
    u = np.broadcast_to(u0, (m,) + u0.shape).copy()
    d = np.broadcast_to(d0, (m,) + d0.shape).copy()
    state = SimState(grid, 0.0, u, d)
    d_bc = d0 if grid.bc_director == "dirichlet" else None

    rows: list[dict] = [record_columns(state, params, S, h)]
    chunk: np.ndarray | None = None
    chunk_base = 0
    for step in range(n_steps):
        if chunk is None or step - chunk_base >= chunk.shape[0]:
            chunk_base = step
            size = min(rng_chunk, n_steps - step)
            chunk = np.stack([drv.normal_table(size) for drv in drivers], axis=1)
        normals = chunk[step - chunk_base]  # (m, N+1)
        step_coupled(
            state, params, None, S, h,
            normals=normals,
            track_budget=track_budget,
            d_bc_values=d_bc,
        )
        if (step + 1) % checkpoint_every == 0 or step + 1 == n_steps:
            rows.append(record_columns(state, params, S, h))

    out = []
    for lane in range(m):
        columns = {}
        for name in RECORD_FIELDS:
            vals = [row[name] for row in rows]
            columns[name] = np.array(
                [v[lane] if np.ndim(v) else v for v in vals], dtype=float
            )
        out.append(PathSeries(columns))
    return out
