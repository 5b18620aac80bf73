import json
import subprocess
import sys

import pytest

from elmd.cli import bundled_model, bundled_models, dumps, main, parse_config
from elmd.errors import ConfigError


def run(tmp_path, *args):
    out = tmp_path / "report.json"
    code = main([*args, "--out", str(out)])
    return code, json.loads(out.read_text()), out


def test_bundled_models_present():
    assert {"cp", "merton", "p1_exponential", "arbitrage_delta1", "negative_control"} <= set(bundled_models())


def test_analyze_cp(tmp_path):
    code, rep, _ = run(tmp_path, "analyze", "--config", str(bundled_model("cp")))
    assert code == 0
    assert rep["status"] == "ok"
    assert rep["bounds"] == {"ell": "-inf", "r": 2.0, "case": "P3"}
    assert rep["growth"]["p_tilde"] == pytest.approx(1 / 3, abs=1e-10)
    assert list(rep)[:3] == ["tool", "model", "seed"]


def test_analyze_arbitrage_exit_code(tmp_path):
    code, rep, _ = run(tmp_path, "analyze", "--config", str(bundled_model("arbitrage_delta1")))
    assert code == 2
    assert rep["status"] == "arbitrage"
    assert rep["viability"]["status"] == "arbitrage_plus"


def test_verify_cp_small(tmp_path):
    code, rep, _ = run(tmp_path, "verify", "--config", str(bundled_model("cp")), "--paths", "5000",
                       "--steps", "8")
    assert code == 0, rep["verification_failed"]
    assert all(r["pass"] for r in rep["verification"])


def test_verify_arbitrage_runs_demo(tmp_path):
    code, rep, _ = run(tmp_path, "verify", "--config", str(bundled_model("arbitrage_delta1")), "--paths", "5000")
    assert code == 0
    assert [r["name"] for r in rep["verification"]] == ["arbitrage_demo"]


def test_bad_config_reports_field(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{"a": 0.1, "c": -1, "kappa": {"type": "empty"}}')
    code, rep, _ = run(tmp_path, "analyze", "--config", str(cfg))
    assert code == 1
    assert rep["status"] == "error" and "'c'" in rep["error"]["message"]
    assert "ConfigError" in capsys.readouterr().err


def test_malformed_json_position(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{"a": 0.1,\n "c": }')
    code, rep, _ = run(tmp_path, "analyze", "--config", str(cfg))
    assert code == 1
    assert "line 2" in rep["error"]["message"]


def test_unknown_field_rejected():
    with pytest.raises(ConfigError, match="unknown"):
        parse_config({"a": 0.1, "kappa": {"type": "empty"}, "drift": 1})


def test_nonfinite_values_serialized():
    text = dumps({"x": float("inf"), "y": float("-inf"), "z": float("nan")})
    assert json.loads(text) == {"x": "+inf", "y": "-inf", "z": "nan"}


def test_curve_and_path_dump(tmp_path):
    curve = tmp_path / "curve.csv"
    code, _, out = run(tmp_path, "analyze", "--config", str(bundled_model("cp")), "--curve", str(curve),
                       "--dump-paths", "2", "--paths", "100")
    assert code == 0
    assert curve.read_text().splitlines()[0] == "p,g,dg"
    assert len(curve.read_text().splitlines()) == 1001
    p0 = out.with_name("report.path0.csv").read_text().splitlines()
    assert p0[0] == "t,S,L,X_tilde,Z"
    assert out.with_name("report.path1.csv").exists()


def test_workers_byte_identical(tmp_path):
    texts = []
    for w in ("1", "4"):
        out = tmp_path / f"r{w}.json"
        main(["verify", "--config", str(bundled_model("cp")), "--paths", "9000", "--steps", "8",
              "--workers", w, "--out", str(out)])
        texts.append(out.read_bytes())
    assert texts[0] == texts[1]


def test_module_entry_point(tmp_path):
    out = tmp_path / "r.json"
    proc = subprocess.run([sys.executable, "-m", "elmd", "analyze", "--config", str(bundled_model("merton")),
                           "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(out.read_text())["growth"]["p_tilde"] == pytest.approx(1.25, abs=1e-10)


def test_negative_control_exit_code(tmp_path):
    code, rep, _ = run(tmp_path, "verify", "--config", str(bundled_model("negative_control")), "--paths", "20000")
    assert code == 3
    assert "tv_terminal" in rep["verification_failed"]
