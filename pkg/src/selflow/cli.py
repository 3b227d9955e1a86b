"""Command-line driver: config parsing, run orchestration, artifact output.

Subcommands: ``simulate``, ``ensemble``, ``sweep`` (each take a config
file), ``diagnose`` (takes a director snapshot), ``selftest``.  Exit codes:
0 success, 1 validation error, 2 numerical failure, 3 I/O error.  All
randomness flows from config seeds; nothing is drawn from the environment.
The SELFLOW_OUT environment variable overrides out.dir.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    RunConfig,
    build_grid,
    canonical_dump,
    config_hash,
    parse_config,
    parse_eps_list,
)
from .diagnostics import (
    budget_residual_series,
    default_defect_threshold,
    defect_detect,
    pohozaev_residual,
)
from .dynamics import BlowUpError, StabilityError
from .ensemble import (
    EnsembleSpec,
    coupled_sweep,
    default_sweep_test_functions,
    run_ensemble,
    run_path,
)
from .fields import SnapshotError, read_snapshot, write_snapshot, Field
from .grids import GridError
from .pathrun import RECORD_FIELDS
from .projection import ProjectionError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3

FORMAT_VERSION = 1


def _load_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _make_run_dir(cfg: RunConfig, tag: str) -> Path:
    base = os.environ.get("SELFLOW_OUT", cfg.out_dir)
    run_dir = Path(base) / f"{tag}-{config_hash(cfg)}"
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def _write_manifest(run_dir: Path, cfg: RunConfig, seeds: list[int], extra: dict | None = None) -> None:
    lines = [
        f"format_version = {FORMAT_VERSION}",
        f"selflow_version = {__version__}",
        f"config_hash = {config_hash(cfg)}",
        "seeds = " + ",".join(str(s) for s in seeds),
    ]
    for key, val in (extra or {}).items():
        lines.append(f"{key} = {val}")
    (run_dir / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (run_dir / "config.cfg").write_text(canonical_dump(cfg), encoding="utf-8")


def _write_series_csv(path: Path, series, extra_cols: dict | None = None) -> None:
    cols = dict(series.columns)
    if extra_cols:
        cols.update(extra_cols)
    names = [n for n in RECORD_FIELDS if n in cols]
    names += [n for n in cols if n not in names]
    data = np.column_stack([cols[n] for n in names])
    np.savetxt(path, data, delimiter=",", header=",".join(names), comments="")


def cmd_simulate(cfg: RunConfig) -> int:
    result = run_path(cfg, cfg.seed, track_invariants=cfg.track_invariants)
    run_dir = _make_run_dir(cfg, "simulate")
    _write_manifest(run_dir, cfg, [cfg.seed])
    grid = result.state.grid
    extra = {}
    if cfg.track_budget:
        extra["budget_residual"] = budget_residual_series(result.series, _params_of(cfg))
    _write_series_csv(run_dir / "energy.csv", result.series, extra)
    write_snapshot(run_dir / "u_final.fld", Field(grid, result.state.u, "periodic" if grid.periodic else "noslip"))
    write_snapshot(run_dir / "d_final.fld", Field(grid, result.state.d, grid.bc_director))
    if result.weak_tracker is not None:
        ru = result.weak_tracker.residual_u(result.state.u)
        rd = result.weak_tracker.residual_d(result.state.d)
        with open(run_dir / "weak.csv", "w", encoding="utf-8") as fh:
            fh.write("# director weak form uses -f_eps(d) for the |grad d|^2 d term at finite eps\n")
            fh.write("test_function,residual\n")
            for name, val in {**ru, **rd}.items():
                fh.write(f"{name},{val!r}\n")
    print(f"simulate: wrote {run_dir}")
    return EXIT_OK


def _params_of(cfg: RunConfig):
    from .config import build_params

    grid = build_grid(cfg)
    return build_params(cfg, grid)


def cmd_ensemble(cfg: RunConfig, threads: int) -> int:
    spec = EnsembleSpec(
        n_paths=cfg.paths,
        base_seed=cfg.seed,
        checkpoint_every=cfg.checkpoint_every,
        track_budget=cfg.track_budget,
        threads=threads,
    )
    result = run_ensemble(spec, cfg)
    run_dir = _make_run_dir(cfg, "ensemble")
    _write_manifest(run_dir, cfg, result.seeds, {"paths": cfg.paths})
    stats = result.stats
    names = sorted(stats.mean)
    header = ["t"] + [f"{n}_{s}" for n in names for s in ("mean", "se", "min", "max")]
    cols = [stats.times]
    for n in names:
        cols += [stats.mean[n], stats.se[n], stats.min[n], stats.max[n]]
    np.savetxt(run_dir / "ensemble.csv", np.column_stack(cols),
               delimiter=",", header=",".join(header), comments="")
    paths_dir = run_dir / "paths"
    paths_dir.mkdir(exist_ok=True)
    for i, series in enumerate(result.series):
        _write_series_csv(paths_dir / f"path_{i:03d}.csv", series)
    m1, ci1 = stats.ledger_ci("ledger1")
    m2, ci2 = stats.ledger_ci("ledger2")
    print(f"ensemble: {cfg.paths} paths, ledger1 = {m1:.3e} (3se {ci1:.3e}), "
          f"ledger2 = {m2:.3e} (3se {ci2:.3e})")
    print(f"ensemble: wrote {run_dir}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, threads: int) -> int:
    spec = EnsembleSpec(
        n_paths=cfg.paths,
        base_seed=cfg.seed,
        checkpoint_every=cfg.checkpoint_every,
        track_budget=cfg.track_budget,
        threads=threads,
    )
    eps_list = parse_eps_list(cfg.sweep_eps)
    result = coupled_sweep(spec, cfg, eps_list)
    run_dir = _make_run_dir(cfg, "sweep")
    _write_manifest(run_dir, cfg, [spec.path_seed(i) for i in range(cfg.paths)],
                    {"eps_list": cfg.sweep_eps})
    first = result.per_path[0]
    with open(run_dir / "sweep.csv", "w", encoding="utf-8") as fh:
        head = "path,eps,t,penalty,dev_norm,defect_count," + ",".join(
            f"pairing_{n}" for n in result.phi_names
        )
        fh.write(head + "\n")
        for p, sweep in enumerate(result.per_path):
            for a, eps in enumerate(sweep.eps_list):
                for c, t in enumerate(sweep.times):
                    row = [p, eps, t, sweep.penalty[a, c], sweep.dev_norm[a, c],
                           sweep.defect_count[a, c]] + list(sweep.pairings[a, c])
                    fh.write(",".join(repr(float(v)) for v in row) + "\n")
    with open(run_dir / "cauchy.csv", "w", encoding="utf-8") as fh:
        fh.write("eps_hi,eps_lo," + ",".join(result.phi_names) + "\n")
        for gap in range(result.cauchy_mean.shape[0]):
            row = [eps_list[gap], eps_list[gap + 1]] + list(result.cauchy_mean[gap])
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    print(f"sweep: eps {eps_list}, sup penalty per eps "
          f"{[float(s) for s in first.sup_penalty]}")
    print(f"sweep: wrote {run_dir}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    f = read_snapshot(args.snapshot, args.lx, args.ly)
    if f.k != 3:
        print("diagnose: snapshot must hold a 3-component director", file=sys.stderr)
        return EXIT_VALIDATION
    grid = f.grid
    eps = args.eps
    did_something = False
    if args.pohozaev or not (args.defects or args.pairings):
        did_something = True
        x0, y0 = 0.5 * grid.lx, 0.5 * grid.ly
        r = args.radius or 0.25 * min(grid.lx, grid.ly)
        print("pohozaev: choice,boundary_kinetic,bulk_stress,bulk_div,"
              "boundary_energy,rhs,residual")
        for choice in ("radial", "x1", "shear"):
            rep = pohozaev_residual(f.values, grid, eps, (x0, y0), r, choice, bc=f.bc)
            print(f"pohozaev: {choice},{rep.boundary_kinetic!r},{rep.bulk_stress!r},"
                  f"{rep.bulk_div!r},{rep.boundary_energy!r},{rep.rhs!r},{rep.residual!r}")
    if args.defects:
        did_something = True
        r = args.radius or 8.0 * max(grid.hx, grid.hy)
        thr = args.threshold or default_defect_threshold(grid, eps, r)
        rep = defect_detect(f.values, grid, eps, r, thr, bc=f.bc)
        print(f"defects: count = {rep.count} (r = {r!r}, delta0_sq = {thr!r})")
        for x, y, energy in rep.centers:
            print(f"defects: center,{x!r},{y!r},{energy!r}")
    if args.pairings:
        did_something = True
        from .diagnostics import stress_pairing

        for tf in default_sweep_test_functions(grid):
            val = stress_pairing(f.values, grid, f.bc, tf)
            print(f"pairings: {tf.name},{val!r}")
    return EXIT_OK if did_something else EXIT_VALIDATION


def cmd_selftest() -> int:
    """Invariant suite on small fixtures; prints one line per check."""
    from . import selftest

    failures = selftest.run_all(verbose=True)
    return EXIT_OK if failures == 0 else EXIT_NUMERICAL


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="selflow", description=__doc__)
    parser.add_argument("--threads", type=int, default=1,
                        help="cap on parallel paths (ensemble/sweep)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "ensemble", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("config")
    p_diag = sub.add_parser("diagnose")
    p_diag.add_argument("snapshot")
    p_diag.add_argument("--eps", type=float, default=0.2)
    p_diag.add_argument("--lx", type=float, default=1.0)
    p_diag.add_argument("--ly", type=float, default=1.0)
    p_diag.add_argument("--radius", type=float, default=None)
    p_diag.add_argument("--threshold", type=float, default=None)
    p_diag.add_argument("--pohozaev", action="store_true")
    p_diag.add_argument("--defects", action="store_true")
    p_diag.add_argument("--pairings", action="store_true")
    sub.add_parser("selftest")

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK

    t0 = time.monotonic()
    try:
        if args.command == "selftest":
            return cmd_selftest()
        if args.command == "diagnose":
            return cmd_diagnose(args)
        cfg = _load_config(args.config)
        if args.command == "simulate":
            code = cmd_simulate(cfg)
        elif args.command == "ensemble":
            code = cmd_ensemble(cfg, args.threads)
        else:
            code = cmd_sweep(cfg, args.threads)
        print(f"{args.command}: done in {time.monotonic() - t0:.1f} s")
        return code
    except ConfigError as exc:
        for ln, msg in exc.problems:
            print(f"config error: line {ln}: {msg}" if ln else f"config error: {msg}",
                  file=sys.stderr)
        return EXIT_VALIDATION
    except (BlowUpError, StabilityError, ProjectionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (GridError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, SnapshotError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def entrypoint() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entrypoint()
