import hashlib
import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from defectbeam.cli import ConfigError, ExpressionError, load_config, main, parse_expression, read_table, run
from defectbeam.cli.output import EB_HEADER, TIMO_HEADER, write_table

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

CANTILEVER = """\
[model]
kind = euler-bernoulli
[geometry]
L = 1
n_elements = 16
[coefficients]
b = 1
c = 0
[loads]
f0 = 1
[bc.left]
w = 0
w1 = 0
"""

GRADIENT = """\
[model]
kind = euler-bernoulli
[geometry]
L = 1
n_elements = 32
[coefficients]
b = 1
c = 0.001
[loads]
f0 = sin(pi*x)
[bc.left]
w = 0
w2 = 0
[bc.right]
w = 0
w2 = 0
"""


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestExpressions:
    def test_sine(self):
        assert parse_expression("sin(pi*x)")(0.5) == pytest.approx(1.0)

    def test_polynomial(self):
        assert parse_expression("x^2 - 1")(2.0) == pytest.approx(3.0)

    def test_unknown_identifier(self):
        with pytest.raises(ExpressionError) as info:
            parse_expression("foo(x)")
        assert info.value.column == 1

    def test_syntax_column(self):
        with pytest.raises(ExpressionError) as info:
            parse_expression("1 + * x")
        assert info.value.column == 5

    def test_unbalanced(self):
        with pytest.raises(ExpressionError):
            parse_expression("sin(x")

    def test_power_right_associative(self):
        assert parse_expression("2^3^2")(0.0) == pytest.approx(512.0)

    def test_unary_minus(self):
        assert parse_expression("-x^2")(3.0) == pytest.approx(-9.0)

    def test_vectorised(self):
        x = np.linspace(0, 1, 5)
        np.testing.assert_allclose(parse_expression("exp(x)*cos(x)")(x), np.exp(x) * np.cos(x))

    @settings(max_examples=50)
    @given(a=st.floats(-100, 100), b=st.floats(-100, 100), x=st.floats(-5, 5))
    def test_affine_matches_python(self, a, b, x):
        expr = parse_expression(f"{a!r} + {b!r}*x")
        assert expr(x) == pytest.approx(a + b * x, rel=1e-12, abs=1e-12)


class TestConfig:
    def test_exclusive_coefficients(self, tmp_path):
        text = CANTILEVER + "[constitutive]\nE = 1\nF = 0\nG = 1\nH = 0\n"
        with pytest.raises(ConfigError) as info:
            load_config(write(tmp_path, text))
        assert "constitutive" in str(info.value)

    def test_line_diagnostic(self, tmp_path):
        text = CANTILEVER.replace("c = 0", "c = oops")
        with pytest.raises(ConfigError) as info:
            load_config(write(tmp_path, text))
        assert "run.ini:8" in str(info.value)
        assert "[coefficients] c" in str(info.value)

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write(tmp_path, CANTILEVER + "[output]\ncolour = red\n"))

    def test_keys_case_sensitive(self, tmp_path):
        cfg = load_config(write(tmp_path, CANTILEVER.replace("L = 1", "L = 2")))
        assert cfg.length == 2.0

    def test_eb_rejects_shear_load(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write(tmp_path, CANTILEVER.replace("f0 = 1", "f0 = 1\nf1 = 2")))

    def test_bad_expression_reports_column(self, tmp_path):
        with pytest.raises(ConfigError) as info:
            load_config(write(tmp_path, CANTILEVER.replace("f0 = 1", "f0 = 1 + bar")))
        assert "column 5" in str(info.value)

    def test_constitutive_section(self, tmp_path):
        text = CANTILEVER.replace("[coefficients]\nb = 1\nc = 0\n", "[constitutive]\nE = 1\nF = 0\nG = 1\nH = 0\n")
        text = text.replace("L = 1", "L = 1\nl = 0.1")
        cfg = load_config(write(tmp_path, text))
        assert cfg.coefficient_source["kind"] == "constitutive"
        assert cfg.coeffs.b > 0

    def test_table_load(self, tmp_path):
        xs = np.linspace(0, 1, 11)
        write_table(tmp_path / "f0.csv", ("x", "value"), {"x": xs, "value": 1 + xs})
        cfg = load_config(write(tmp_path, CANTILEVER.replace("f0 = 1", "f0_table = f0.csv")))
        assert cfg.loads.f0(np.array([0.35]))[0] == pytest.approx(1.35)

    def test_shipped_configs_validate(self):
        for path in sorted(CONFIGS.glob("*.ini")):
            load_config(path)


class TestHash:
    def test_output_dir_not_semantic(self, tmp_path):
        a = load_config(write(tmp_path, CANTILEVER + "[output]\ndir = a\n", "a.ini"))
        b = load_config(write(tmp_path, CANTILEVER + "[output]\ndir = b\nplot = true\n", "b.ini"))
        assert a.hash == b.hash

    def test_comments_and_spacing_not_semantic(self, tmp_path):
        a = load_config(write(tmp_path, CANTILEVER, "a.ini"))
        b = load_config(write(tmp_path, "# note\n" + CANTILEVER.replace("f0 = 1", "f0   =   1.0"), "b.ini"))
        assert a.hash == b.hash

    @settings(max_examples=20, deadline=None)
    @given(c=st.floats(1e-4, 0.1), n=st.integers(4, 64))
    def test_semantic_change_changes_hash(self, tmp_path_factory, c, n):
        tmp = tmp_path_factory.mktemp("h")
        base = load_config(write(tmp, GRADIENT))
        other = load_config(write(tmp, GRADIENT.replace("c = 0.001", f"c = {c!r}")
                                  .replace("n_elements = 32", f"n_elements = {n}"), "o.ini"))
        assert (base.hash == other.hash) == (c == 0.001 and n == 32)

    def test_analysis_is_semantic(self, tmp_path):
        cfg = load_config(write(tmp_path, CANTILEVER))
        assert replace(cfg, analysis="defects").hash != cfg.hash


class TestRun:
    def test_cantilever_report(self, tmp_path):
        rep = run(load_config(write(tmp_path, CANTILEVER)), tmp_path / "out")
        md = rep.summary["max_deflection"]
        assert md["max_abs"] == pytest.approx(0.125, abs=1e-12)
        assert md["x"] == pytest.approx(1.0)
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["config_hash"] == rep.config_hash

    def test_eb_header(self, tmp_path):
        run(load_config(write(tmp_path, CANTILEVER)), tmp_path / "out")
        first = (tmp_path / "out" / "fields.csv").read_text().splitlines()[0]
        assert tuple(first.split(",")) == EB_HEADER

    def test_timoshenko_header(self, tmp_path):
        cfg = load_config(CONFIGS / "timoshenko_defects.ini")
        run(replace(cfg, analysis="solve"), tmp_path)
        first = (tmp_path / "fields.csv").read_text().splitlines()[0]
        assert tuple(first.split(",")) == TIMO_HEADER

    def test_sweep_rows(self, tmp_path):
        cfg = replace(load_config(write(tmp_path, GRADIENT + "[sweep]\nratios = 0.1, 0.01, 0.001, 0.0001\n"
                                                           "n_elements = 64\n")), analysis="sweep")
        rep = run(cfg, tmp_path / "out")
        assert "slope" in rep.summary
        table = read_table(tmp_path / "out" / "sweep.csv")
        assert len(table["ratio"]) == 4

    def test_round_trip_bit_exact(self, tmp_path):
        rep = run(load_config(write(tmp_path, GRADIENT)), tmp_path / "out")
        header, cols = rep.tables["fields.csv"]
        back = read_table(tmp_path / "out" / "fields.csv")
        assert tuple(back) == header
        for name in header:
            np.testing.assert_array_equal(back[name], np.asarray(cols[name], dtype=float))

    @settings(max_examples=30)
    @given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=20))
    def test_table_round_trip_property(self, tmp_path_factory, values):
        path = tmp_path_factory.mktemp("t") / "t.csv"
        write_table(path, ("v",), {"v": values})
        np.testing.assert_array_equal(read_table(path)["v"], np.array(values))

    def test_deterministic_outputs(self, tmp_path):
        cfg = replace(load_config(write(tmp_path, GRADIENT)), analysis="defects")
        run(cfg, tmp_path / "a", plot=True)
        run(cfg, tmp_path / "b", plot=True)
        for name in ("fields.csv", "defects.csv", "fields.svg"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_manifest(self, tmp_path):
        rep = run(load_config(write(tmp_path, GRADIENT)), tmp_path / "out", plot=True)
        names = {f["name"] for f in rep.files}
        assert {"fields.csv", "fields.svg", "report.json"} <= names
        for f in rep.files:
            p = tmp_path / "out" / f["name"]
            assert p.stat().st_size > 0
            if "sha256" in f:
                assert hashlib.sha256(p.read_bytes()).hexdigest() == f["sha256"]

    def test_check_writes_nothing(self, tmp_path):
        cfg = replace(load_config(write(tmp_path, CANTILEVER)), analysis="check")
        rep = run(cfg, tmp_path / "out")
        assert rep.files == []
        assert not (tmp_path / "out").exists()


class TestMain:
    def test_ok(self, tmp_path, capsys):
        cfg = write(tmp_path, CANTILEVER)
        assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        assert (tmp_path / "o" / "fields.csv").exists()

    def test_check_prints_hash(self, tmp_path, capsys):
        cfg = write(tmp_path, CANTILEVER)
        assert main(["check", "--config", str(cfg)]) == 0
        expected = replace(load_config(cfg), analysis="check").hash
        assert capsys.readouterr().out.strip() == f"ok {expected}"

    def test_validation_exit(self, tmp_path, capsys):
        text = CANTILEVER + "[constitutive]\nE = 1\nF = 0\nG = 1\nH = 0\n"
        assert main(["check", "--config", str(write(tmp_path, text))]) == 2
        assert "run.ini" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["check", "--config", str(tmp_path / "none.ini")]) == 2

    def test_solver_exit(self, tmp_path, capsys):
        # a free-free beam keeps its rigid modes
        text = CANTILEVER.replace("[bc.left]\nw = 0\nw1 = 0\n", "")
        assert main(["solve", "--config", str(write(tmp_path, text)), "--out", str(tmp_path / "o")]) == 3
        assert "solver error" in capsys.readouterr().err

    def test_acceptance_exit(self, tmp_path, capsys):
        text = (CONFIGS / "eb_convergence.ini").read_text().replace("min_order = 4", "min_order = 50")
        text = text.replace("meshes = 32, 64, 128, 256", "meshes = 8, 16")
        assert main(["convergence", "--config", str(write(tmp_path, text)), "--out", str(tmp_path / "o")]) == 4
        assert "FAIL" in capsys.readouterr().err

    def test_mms_pass(self, tmp_path):
        out = tmp_path / "o"
        assert main(["mms", "--config", str(CONFIGS / "eb_convergence.ini"), "--out", str(out)]) == 0
        assert json.loads((out / "report.json").read_text())["passed"] is True

    def test_threads_flag_bit_identical(self, tmp_path):
        text = GRADIENT + "[sweep]\nratios = 0.01, 0.001\nn_elements = 64\n"
        cfg = write(tmp_path, text)
        assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "a"), "--threads", "1"]) == 0
        assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "b"), "--threads", "2"]) == 0
        assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()
