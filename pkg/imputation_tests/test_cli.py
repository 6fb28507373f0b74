import json
import logging

import numpy as np
import pytest

from manifold_imputation import __version__, cli
from manifold_imputation._grid import GridFunction, GridMask, UniformGrid
from manifold_imputation._io import read_grid_csv, read_json, read_tagged_points, write_grid_csv
from manifold_imputation._types import PointTag
from manifold_imputation._verify import VerificationReport, VerifyRow


@pytest.fixture(autouse=True)
def restore_logging():
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture
def disk_files(output_dir):
    argv = ["generate", "--shape", "disk-grid", "-N", "16", "--output-dir", str(output_dir)]
    code = cli.main(argv)
    assert code == cli.EXIT_OK
    return output_dir / "disk-grid.csv", output_dir / "disk-grid.truth.json"


class TestParser:
    def test_version(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            cli.main(["--version"])
        assert excinfo.value.code == 0
        assert __version__ in capsys.readouterr().out

    def test_command_is_required(self):
        with pytest.raises(SystemExit):
            cli.main([])

    def test_manifold_accepts_admissibility_multiplier(self):
        args = cli.build_parser().parse_args(
            ["impute-manifold", "--admissibility-multiplier", "3", "--rank-tolerance", "1e-9"]
        )
        assert args.admissibility_multiplier == 3.0
        assert args.rank_tolerance == 1e-9
        assert not hasattr(args, "derivative_bound")

    def test_shape_params_must_be_json(self, output_dir):
        with pytest.raises(SystemExit):
            cli.main(["generate", "--shape", "plane", "--shape-params", "{bad"])


class TestGenerate:
    def test_grid_dataset(self, disk_files, output_dir):
        data_path, truth_path = disk_files
        assert (output_dir / "disk-grid.exact.csv").is_file()
        truth = read_json(truth_path)
        assert truth["points_per_axis"] == 16
        assert truth["noise"] == 0.0
        assert read_grid_csv(data_path).mask.n_unknown == truth["unknown_points"]
        run_config = read_json(output_dir / "run_config.json")
        assert run_config["command"] == "generate"
        assert run_config["N"] == 16

    def test_cloud_from_config_file(self, tmp_path, output_dir):
        config = tmp_path / "sphere.json"
        config.write_text(
            json.dumps({"shape": "sphere", "shape_params": {"count": 200}, "seed": 3}),
            encoding="utf-8",
        )
        code = cli.main(["generate", "--config", str(config), "--output-dir", str(output_dir)])
        assert code == cli.EXIT_OK
        text = (output_dir / "sphere.csv").read_text()
        assert text.startswith("# ambient=3 intrinsic=2")
        assert read_json(output_dir / "sphere.truth.json")["seed"] == 3


class TestImputeGrid:
    def test_variational(self, disk_files, tmp_path):
        data_path, truth_path = disk_files
        out = tmp_path / "variational"
        code = cli.main(
            [
                "impute-grid",
                "--input", str(data_path),
                "--truth", str(truth_path),
                "-k", "2",
                "--output-dir", str(out),
            ]
        )
        assert code == cli.EXIT_OK
        completed = read_grid_csv(out / "completed.csv")
        assert completed.is_complete
        diagnostics = read_json(out / "diagnostics.json")
        assert diagnostics["backend"] == "variational"
        assert diagnostics["cols"] == read_grid_csv(data_path).mask.n_unknown
        assert 0 <= diagnostics["max_error_unknown"] < 0.5
        stencils = read_json(out / "affected_stencils.json")
        assert stencils[0]["minimality_holds"] is not None

    def test_spectral(self, disk_files, tmp_path):
        data_path, _ = disk_files
        out = tmp_path / "spectral"
        code = cli.main(
            ["impute-grid", "--input", str(data_path), "--backend", "spectral"]
            + ["--output-dir", str(out)]
        )
        assert code == cli.EXIT_OK
        assert read_json(out / "diagnostics.json")["scheme"] == "hyperbolic-corner"
        lines = (out / "coefficients.csv").read_text().splitlines()
        assert lines[0] == "k_0,k_1,abs_c"
        assert len(lines) == 16 * 16 + 1

    def test_solver_flags_reach_run_config(self, disk_files, tmp_path):
        data_path, _ = disk_files
        out = tmp_path / "flags"
        code = cli.main(
            ["impute-grid", "--input", str(data_path), "--backend", "spectral"]
            + ["--derivative-bound", "2.5", "--rank-tolerance", "1e-10"]
            + ["--box-origin", "0", "0", "--output-dir", str(out)]
        )
        assert code == cli.EXIT_OK
        config = read_json(out / "run_config.json")
        assert config["derivative_bound"] == 2.5
        assert config["rank_tolerance"] == 1e-10
        assert config["box_origin"] == [0.0, 0.0]

    def test_missing_input_file(self, output_dir, capsys):
        code = cli.main(["impute-grid", "--input", "absent.csv", "--output-dir", str(output_dir)])
        assert code == cli.EXIT_INPUT_ERROR
        error = read_json(output_dir / "error.json")
        assert error["error"] == "InputFormatError"
        assert error["path"] == "absent.csv"
        assert "InputFormatError" in capsys.readouterr().err

    def test_configuration_error_before_output(self, output_dir, capsys):
        code = cli.main(["impute-grid", "--output-dir", str(output_dir)])
        assert code == cli.EXIT_INPUT_ERROR
        assert not (output_dir / "error.json").exists()
        assert "needs an input file" in capsys.readouterr().err

    def test_hole_at_the_border_is_a_method_failure(self, output_dir, tmp_path):
        grid = UniformGrid(1, 12)
        known = np.ones(12, dtype=bool)
        known[1] = False
        path = write_grid_csv(
            tmp_path / "edge.csv", GridFunction.from_function(grid, np.sin, GridMask(known))
        )
        code = cli.main(["impute-grid", "--input", str(path), "--output-dir", str(output_dir)])
        assert code == cli.EXIT_METHOD_FAILURE
        error = read_json(output_dir / "error.json")
        assert error["error"] == "MarginViolation"
        assert error["axis"] == 0

    def test_unknown_log_level(self, output_dir):
        code = cli.main(
            ["impute-grid", "--input", "x.csv", "--log-level", "LOUD"]
            + ["--output-dir", str(output_dir)]
        )
        assert code == cli.EXIT_INPUT_ERROR


class TestImputeManifold:
    def test_plane(self, output_dir, tmp_path):
        assert cli.main(["generate", "--shape", "plane", "--output-dir", str(output_dir)]) == 0
        out = tmp_path / "filled"
        code = cli.main(
            [
                "impute-manifold",
                "--input", str(output_dir / "plane.csv"),
                "--truth", str(output_dir / "plane.truth.json"),
                "--output-dir", str(out),
            ]
        )
        assert code == cli.EXIT_OK
        points, tags = read_tagged_points(out / "points.csv")
        assert PointTag.IMPUTED in tags
        assert points.shape == (len(tags), 3)
        assert read_json(out / "diagnostics.json")["truth"]["max_imputed_distance"] < 1e-6

    def test_no_hole(self, output_dir, tmp_path, capsys):
        params = json.dumps({"extent": 0.6, "hole_radius": 0.0})
        cli.main(
            ["generate", "--shape", "plane", "--shape-params", params]
            + ["--output-dir", str(output_dir)]
        )
        out = tmp_path / "filled"
        code = cli.main(
            ["impute-manifold", "--input", str(output_dir / "plane.csv"), "--output-dir", str(out)]
        )
        assert code == cli.EXIT_OK
        assert "No hole detected" in capsys.readouterr().out
        assert (out / "points.csv").read_text().strip() == "x_1,x_2,x_3,tag"
        assert read_json(out / "diagnostics.json")["notice"] == "no hole detected"


class TestVerifyAndBench:
    @pytest.mark.parametrize("passed, expected", [(True, 0), (False, 1)])
    def test_verify_exit_code(self, monkeypatch, output_dir, passed, expected):
        report = VerificationReport(
            rows=[
                VerifyRow("sum identity", passed=passed, measured=1e-12, bound=1e-10),
                VerifyRow("growth", passed=False, measured=2.0, bound=1.0, informational=True),
            ]
        )
        monkeypatch.setattr(cli, "run_verification", lambda seed, quick: report)
        assert cli.main(["verify", "--output-dir", str(output_dir)]) == expected
        assert read_json(output_dir / "verify.json")["all_passed"] is passed
        assert "sum identity" in (output_dir / "verify.txt").read_text()

    def test_unknown_experiment(self, output_dir):
        code = cli.main(["bench", "--experiment", "nope", "--output-dir", str(output_dir)])
        assert code == cli.EXIT_INPUT_ERROR
        assert "Unknown experiment" in read_json(output_dir / "error.json")["message"]
