"""Command-line interface and figure-rendering tests.

CLI behavior is exercised through ``main(argv)`` so exit codes and
console output are pinned without spawning subprocesses.
"""

import numpy as np
import pytest

from cornres.cli import main
from cornres.errors import ParamError
from cornres.fem import FemSolution, HalfPlaneX, solve_problem
from cornres.mesh import build_annulus_mesh
from cornres.plots import plot_field, plot_sweep
from cornres.spectral import Contrast
from cornres.sweep import SweepConfig, SweepRecord, run_sweep

HALF = Contrast(1.0, -0.5)


@pytest.fixture()
def small_config(tmp_path):
    out_dir = tmp_path / "out"
    path = tmp_path / "cfg.txt"
    path.write_text(
        "kappa = -0.9999\n"
        "delta_min = 0.3\n"
        "delta_max = 0.8\n"
        "num_delta = 12\n"
        "n_t = 16\n"
        "n_theta = 16\n"
        f"out_dir = {out_dir}\n"
    )
    return path, out_dir


class TestExitCodes:
    def test_config_error_is_exit_one(self, capsys):
        assert main(["sweep", "--kappa", "-1"]) == 1
        assert "config error" in capsys.readouterr().err

    def test_missing_contrast_is_exit_one(self, capsys):
        assert main(["spectral"]) == 1
        assert "contrast is required" in capsys.readouterr().err

    def test_flag_outside_unit_interval_is_exit_one(self, capsys):
        assert main(["solve", "--kappa", "-0.5", "--delta", "2.0"]) == 1
        assert "(0, 1)" in capsys.readouterr().err

    def test_unreadable_config_is_exit_one(self, tmp_path, capsys):
        missing = tmp_path / "nope.txt"
        assert main(["spectral", "--config", str(missing)]) == 1
        assert "cannot read config" in capsys.readouterr().err

    def test_argparse_errors_are_exit_one(self):
        with pytest.raises(SystemExit) as err:
            main(["not-a-command"])
        assert err.value.code == 1
        with pytest.raises(SystemExit) as err:
            main(["solve", "--kappa", "-0.5"])  # missing required --delta
        assert err.value.code == 1


class TestSpectralCommand:
    def test_critical_contrast_prints_mode_data(self, capsys):
        assert main(["spectral", "--kappa", "-0.5"]) == 0
        out = capsys.readouterr().out
        assert "mu = 0.61269792506" in out
        assert "c_phi" in out
        assert "+0 +0.61269792506i" in out

    def test_outside_interval_reports_regime(self, capsys):
        assert main(["spectral", "--kappa", "-2.0"]) == 0
        out = capsys.readouterr().out
        assert "no oscillating pair" in out


class TestResonancesCommand:
    def test_table_matches_closed_form(self, capsys):
        assert main(["resonances", "--kappa", "-0.5", "--count", "2"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "n, delta_n"
        n1, d1 = out[1].split(", ")
        n2, d2 = out[2].split(", ")
        assert (n1, n2) == ("1", "2")
        assert float(d1) == pytest.approx(0.005931524858649769, rel=1e-12)
        assert float(d2) == pytest.approx(float(d1) ** 2, rel=1e-12)

    def test_outside_interval_is_config_error(self, capsys):
        assert main(["resonances", "--kappa", "-2.0"]) == 1
        assert "critical interval" in capsys.readouterr().err


class TestSolveCommand:
    def test_writes_field_and_reports_norms(self, small_config, capsys):
        config, out_dir = small_config
        code = main(
            ["solve", "--config", str(config), "--delta", "0.4", "--figure"]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "h1_seminorm" in out and "smallest_singular" in out
        vtk = out_dir / "field_delta_0.4.vtk"
        png = out_dir / "field_delta_0.4.png"
        assert vtk.exists() and png.exists()
        text = vtk.read_text()
        assert "DATASET UNSTRUCTURED_GRID" in text
        assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


class TestSweepCommand:
    def test_full_artifact_set(self, small_config, capsys):
        config, out_dir = small_config
        assert main(["sweep", "--config", str(config)]) == 0
        out = capsys.readouterr().out
        assert "solved 12 of 12" in out or "near-singular" in out
        csv_path = out_dir / "sweep.csv"
        png_path = out_dir / "sweep.png"
        assert csv_path.exists() and png_path.exists()
        header = csv_path.read_bytes().decode("ascii").splitlines()[0]
        assert header.startswith("delta,one_minus_delta,")
        assert png_path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_emit_fields_writes_one_vtk_per_solved_point(
        self, small_config, capsys
    ):
        config, out_dir = small_config
        assert main(["sweep", "--config", str(config), "--emit-fields"]) == 0
        fields = sorted(out_dir.glob("field_*.vtk"))
        csv_rows = (
            (out_dir / "sweep.csv").read_text().strip().splitlines()[1:]
        )
        solved = sum(1 for row in csv_rows if row.endswith("Ok"))
        assert len(fields) == solved

    def test_flag_overrides_config_contrast(self, small_config, capsys):
        config, out_dir = small_config
        assert main(["sweep", "--config", str(config), "--kappa", "-1.5"]) == 0
        out = capsys.readouterr().out
        assert "no peaks detected" in out


class TestCheckCommands:
    def test_kernel_check_passes_inside_interval(self, capsys):
        assert main(["kernel-check", "--kappa", "-0.5"]) == 0
        out = capsys.readouterr().out
        assert "kernel mode confirmed" in out

    def test_kernel_check_outside_interval_is_config_error(self, capsys):
        assert main(["kernel-check", "--kappa", "-2.0"]) == 1
        assert "critical interval" in capsys.readouterr().err

    def test_coercivity_check_reports_floor(self, capsys):
        code = main(
            ["coercivity-check", "--kappa", "-0.2", "--delta", "0.3",
             "--n-t", "16", "--n-minus", "8"]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "t-plus" in out and "coercivity floor" in out

    def test_coercivity_check_negative_side(self, capsys):
        code = main(
            ["coercivity-check", "--kappa", "-2.0", "--delta", "0.3",
             "--n-t", "16", "--n-minus", "8"]
        )
        assert code == 0
        assert "t-minus" in capsys.readouterr().out


class TestPlots:
    def test_sweep_figure_renders(self, tmp_path):
        cfg = SweepConfig(
            contrast=HALF, delta_min=0.3, delta_max=0.5, num_delta=4,
            n_t=16, n_theta=16,
        )
        records = run_sweep(cfg)
        path = tmp_path / "sweep.png"
        out = plot_sweep(records, HALF, str(path), peaks=[0.4])
        assert out == str(path)
        assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_sweep_figure_marks_near_singular(self, tmp_path):
        records = [
            SweepRecord(delta=0.3, one_minus_delta=0.7, h1_seminorm=1.0,
                        l2_norm=0.1, smallest_singular=1e-3),
            SweepRecord(delta=0.4, one_minus_delta=0.6,
                        status="NearSingular"),
            SweepRecord(delta=0.5, one_minus_delta=0.5, h1_seminorm=2.0,
                        l2_norm=0.2, smallest_singular=1e-3),
        ]
        path = tmp_path / "ns.png"
        plot_sweep(records, HALF, str(path))
        assert path.exists()

    def test_sweep_figure_needs_solved_records(self, tmp_path):
        records = [
            SweepRecord(delta=0.4, one_minus_delta=0.6, status="NearSingular")
        ]
        with pytest.raises(ParamError):
            plot_sweep(records, HALF, str(tmp_path / "x.png"))

    def test_field_figure_renders(self, tmp_path):
        mesh = build_annulus_mesh(0.4, 8, 8)
        solution = solve_problem(mesh, HALF, HalfPlaneX(0.5, 100.0))
        path = tmp_path / "field.png"
        plot_field(solution, str(path), title="demo")
        assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_field_figure_guards(self, tmp_path):
        mesh = build_annulus_mesh(0.4, 8, 8)
        orphan = FemSolution(
            mesh=None, values=np.zeros(3), pivot_floor=1.0, residual=0.0
        )
        with pytest.raises(ParamError):
            plot_field(orphan, str(tmp_path / "x.png"))
        mismatched = FemSolution(
            mesh=mesh, values=np.zeros(3), pivot_floor=1.0, residual=0.0
        )
        with pytest.raises(ParamError):
            plot_field(mismatched, str(tmp_path / "y.png"))
