"""End-to-end command-line behavior: subcommands, exit codes, artifacts."""

import numpy as np

from selflow.cli import main
from selflow.fields import Field, write_snapshot
from selflow.grids import Grid
from selflow.initial import constant_director, vortex_director

TINY = """
sim.grid = 16x16
sim.eps = 0.3
sim.T = 0.002
noise.seed = 5
noise.modes = 4
noise.sigma0 = 0.3
init.u = taylor-green:1,0.2
init.d = unit-smooth:0.4
out.checkpoint_every = 10
"""


def write_cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def out_env(tmp_path, monkeypatch):
    out = tmp_path / "out"
    monkeypatch.setenv("SELFLOW_OUT", str(out))
    return out


class TestSimulate:
    def test_artifacts(self, tmp_path, monkeypatch, capsys):
        out = out_env(tmp_path, monkeypatch)
        code = main(["simulate", write_cfg(tmp_path, TINY)])
        assert code == 0
        runs = list(out.iterdir())
        assert len(runs) == 1
        run = runs[0]
        assert (run / "config.cfg").exists()
        assert (run / "energy.csv").exists()
        assert (run / "u_final.fld").exists()
        assert (run / "d_final.fld").exists()
        manifest = (run / "manifest.txt").read_text()
        assert "format_version = 1" in manifest
        assert "seeds = 5" in manifest
        header = (run / "energy.csv").read_text().splitlines()[0]
        assert header.startswith("t,kinetic,dirichlet,penalty,total")
        assert "budget_residual" in header

    def test_validation_failure_no_output_dir(self, tmp_path, monkeypatch):
        out = out_env(tmp_path, monkeypatch)
        code = main(["simulate", write_cfg(tmp_path, "sim.eps = -4\n")])
        assert code == 1
        assert not out.exists()

    def test_missing_config_is_io_error(self, tmp_path, monkeypatch):
        out_env(tmp_path, monkeypatch)
        assert main(["simulate", str(tmp_path / "nope.cfg")]) == 3

    def test_numerical_failure_exit_code(self, tmp_path, monkeypatch):
        out_env(tmp_path, monkeypatch)
        cfg = TINY + "sim.dt = 1.0\n"
        assert main(["simulate", write_cfg(tmp_path, cfg)]) == 2

    def test_weak_tracking_artifact(self, tmp_path, monkeypatch):
        out = out_env(tmp_path, monkeypatch)
        code = main(["simulate", write_cfg(tmp_path, TINY + "track.weak = true\n")])
        assert code == 0
        run = next(out.iterdir())
        weak = (run / "weak.csv").read_text().splitlines()
        assert weak[0].startswith("#")  # finite-eps substitution note
        assert weak[1] == "test_function,residual"
        assert len(weak) >= 4


class TestEnsemble:
    def test_summary_and_paths(self, tmp_path, monkeypatch):
        out = out_env(tmp_path, monkeypatch)
        cfg = TINY + "ensemble.paths = 4\nrun.mode = ensemble\ntrack.budget = false\n"
        assert main(["ensemble", write_cfg(tmp_path, cfg)]) == 0
        run = next(out.iterdir())
        assert (run / "ensemble.csv").exists()
        paths = sorted((run / "paths").iterdir())
        assert len(paths) == 4
        manifest = (run / "manifest.txt").read_text()
        assert "paths = 4" in manifest


class TestSweep:
    def test_tables(self, tmp_path, monkeypatch):
        out = out_env(tmp_path, monkeypatch)
        cfg = TINY + "sweep.eps = 0.3,0.15\nensemble.paths = 1\ntrack.budget = false\n"
        assert main(["sweep", write_cfg(tmp_path, cfg)]) == 0
        run = next(out.iterdir())
        sweep = (run / "sweep.csv").read_text().splitlines()
        assert sweep[0].startswith("path,eps,t,penalty,dev_norm,defect_count")
        cauchy = (run / "cauchy.csv").read_text().splitlines()
        assert cauchy[0].startswith("eps_hi,eps_lo")
        assert len(cauchy) == 2


class TestDiagnose:
    def test_constant_director_all_zero_report(self, tmp_path, capsys):
        grid = Grid(32, 32, bc_velocity="noslip", bc_director="neumann")
        snap = tmp_path / "const.fld"
        write_snapshot(snap, Field(grid, constant_director(grid, (0, 0, 1)), "neumann"))
        assert main(["diagnose", str(snap), "--pohozaev"]) == 0
        lines = [l for l in capsys.readouterr().out.splitlines()
                 if l.startswith("pohozaev:") and not l.startswith("pohozaev: choice")]
        assert len(lines) == 3
        for line in lines:
            residual = float(line.split(",")[-1])
            assert abs(residual) <= 1e-12

    def test_defects_on_vortex(self, tmp_path, capsys):
        grid = Grid(64, 64, bc_velocity="noslip", bc_director="neumann")
        snap = tmp_path / "vortex.fld"
        d = vortex_director(grid, 0.5, 0.5, 2 * grid.hx)
        write_snapshot(snap, Field(grid, d, "neumann"))
        assert main(["diagnose", str(snap), "--defects"]) == 0
        out = capsys.readouterr().out
        assert "defects: count = 1" in out

    def test_pairings(self, tmp_path, capsys):
        grid = Grid(32, 32)
        snap = tmp_path / "d.fld"
        write_snapshot(snap, Field(grid, constant_director(grid, (1, 0, 0)), "periodic"))
        assert main(["diagnose", str(snap), "--pairings"]) == 0
        out = capsys.readouterr().out
        assert out.count("pairings:") == 3

    def test_velocity_snapshot_rejected(self, tmp_path):
        grid = Grid(16, 16)
        snap = tmp_path / "u.fld"
        write_snapshot(snap, Field(grid, np.zeros((2, 16, 16)), "periodic"))
        assert main(["diagnose", str(snap)]) == 1


class TestSelftest:
    def test_exit_zero(self, capsys):
        assert main(["selftest"]) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out
        assert out.count("PASS") >= 10
