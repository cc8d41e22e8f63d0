import numpy as np
import pytest

from crossdiff.cli import (
    eval_expression,
    load_config,
    main,
    verify_battery,
)
from crossdiff.errors import ConfigError
from crossdiff.grid import Grid
from crossdiff.model import build_system_spec

BENCH = """
[system]
d = 1
k = [1.0, 2.0]
a = [1.0, 1.0]

[initial]
u1 = "1 + 0.3*cos(x)"
u2 = "1 + 0.3*sin(x)"

[solver]
N = 64
t_end = 0.01

[output]
format = "csv"
"""


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "bench.toml"
    path.write_text(BENCH)
    return path


class TestExpressions:
    def test_basic_evaluation(self):
        g = Grid(d=1, N=32)
        x = g.axes()[0]
        np.testing.assert_allclose(
            eval_expression("2 + 0.5*sin(x)", g), 2 + 0.5 * np.sin(x)
        )
        np.testing.assert_allclose(eval_expression("exp(0) * pi", g), np.pi * np.ones(32))

    def test_two_dimensional_names(self):
        g = Grid(d=2, N=16)
        X, Y = g.meshgrid()
        np.testing.assert_allclose(eval_expression("cos(x)*sin(y)", g), np.cos(X) * np.sin(Y))

    def test_rejects_arbitrary_code(self):
        g = Grid(d=1, N=32)
        for bad in ("__import__('os')", "x.sum()", "open('f')", "[1,2]", "lambda: 1"):
            with pytest.raises(ConfigError):
                eval_expression(bad, g)

    def test_rejects_unknown_names(self):
        g = Grid(d=1, N=32)
        with pytest.raises(ConfigError):
            eval_expression("y + 1", g)  # no y in one dimension


class TestLoadConfig:
    def test_benchmark_config(self, config_path):
        spec, grid, u0, cfg, out = load_config(config_path)
        assert spec.n == 2
        assert grid.N == 64
        assert cfg.t_end == pytest.approx(0.01)
        assert u0.shape == (2, 64)
        assert out["format"] == "csv"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.toml")

    def test_bad_coefficient_reports_section(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text(BENCH.replace("k = [1.0, 2.0]", "k = [1.0, -2.0]"))
        with pytest.raises(ConfigError, match=r"\[system\]"):
            load_config(path)

    def test_missing_initial_expression(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text(BENCH.replace('u2 = "1 + 0.3*sin(x)"', ""))
        with pytest.raises(ConfigError, match="u2"):
            load_config(path)


class TestSubcommands:
    def test_run_writes_report(self, config_path, tmp_path, capsys):
        out = tmp_path / "rep"
        code = main(["run", str(config_path), "--out", str(out)])
        assert code == 0
        assert (out / "report.json").exists()
        assert "report written" in capsys.readouterr().out

    def test_run_config_error_exit_2(self, tmp_path, capsys):
        path = tmp_path / "bad.toml"
        path.write_text(BENCH.replace("k = [1.0, 2.0]", "k = [1.0, -2.0]"))
        assert main(["run", str(path)]) == 2

    def test_run_positivity_lost_exit_3(self, tmp_path, capsys):
        path = tmp_path / "zero.toml"
        path.write_text(BENCH.replace('u1 = "1 + 0.3*cos(x)"', 'u1 = "1 + cos(x)"'))
        assert main(["run", str(path)]) == 3
        assert "t = 0" in capsys.readouterr().err

    def test_verify_passes_benchmark(self, config_path, capsys):
        assert main(["verify", str(config_path)]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out

    def test_verify_report_roundtrip(self, config_path, tmp_path, capsys):
        out = tmp_path / "rep"
        main(["run", str(config_path), "--out", str(out), "--mode", "both"])
        assert main(["verify", "--report", str(out)]) == 0

    def test_compare_prints_distances(self, config_path, tmp_path, capsys):
        out = tmp_path / "cmp"
        assert main(["compare", str(config_path), "--out", str(out)]) == 0
        assert "cross" in capsys.readouterr().out

    def test_deterministic_output(self, config_path, tmp_path):
        out1 = tmp_path / "r1"
        out2 = tmp_path / "r2"
        main(["run", str(config_path), "--out", str(out1)])
        main(["run", str(config_path), "--out", str(out2)])
        f1 = sorted((out1 / "snapshots").iterdir())
        f2 = sorted((out2 / "snapshots").iterdir())
        assert [p.name for p in f1] == [p.name for p in f2]
        for a, b in zip(f1, f2):
            assert a.read_bytes() == b.read_bytes()


class TestBattery:
    def test_general_spec_battery(self):
        spec = build_system_spec({"B": [[1.0, 1.0], [1.0, 1.0]], "d": 1})
        ok, rows = verify_battery(spec, samples=50)
        assert ok, rows

    def test_skewed_coefficients_fail(self):
        spec = build_system_spec({"k": [1.0, 2.0, 3.0], "a": [1.0] * 3, "d": 1})
        ok, rows = verify_battery(spec, samples=20, skew_A1=1e-6)
        assert not ok
        failed = [name for name, passed, _, _ in rows if not passed]
        assert any("symmetr" in name for name in failed)

    def test_skewed_general_fails(self):
        # kernel dimension 2 so the hyperbolic first-order block is a genuine
        # 2x2 matrix and the upper-triangular perturbation breaks its symmetry
        B = [
            [1.0, 1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 1.0],
            [0.0, 0.0, 1.0, 1.0],
        ]
        spec = build_system_spec({"B": B, "d": 1})
        ok, rows = verify_battery(spec, samples=20, skew_A1=1e-6)
        assert not ok
        failed = [name for name, passed, _, _ in rows if not passed]
        assert any("symmetr" in name for name in failed)
