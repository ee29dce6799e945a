import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest
from numpy.testing import assert_allclose

from exterior_expansion.cli import ConfigError, main, parse_config, parse_real, render_csv

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def _stderr_json(err):
    return json.loads(err.strip().splitlines()[-1])


@pytest.mark.parametrize("command", ["radial", "expand", "verify", "theorem2"])
def test_shipped_configs_pass(command, capsys):
    assert main([command, "--config", str(CONFIGS / f"{command}.json")]) == 0
    out = capsys.readouterr().out
    assert out


def test_radial_first_integral(capsys):
    assert main(["radial", "--config", str(CONFIGS / "radial.json")]) == 0
    rows = _rows(capsys.readouterr().out)
    assert len(rows) == 40
    assert max(float(r["first_integral_check"]) for r in rows) <= 1e-9


def test_radial_c_zero_is_quadratic(tmp_path, capsys):
    cfg = _write(tmp_path, {"tau": "pi/2", "n": 3, "C0": 0.0, "c": 0.0, "num": 5})
    assert main(["radial", "--config", cfg]) == 0
    rows = _rows(capsys.readouterr().out)
    W = [float(r["W"]) for r in rows]
    upp = [float(r["u_second"]) for r in rows]
    assert_allclose(W, W[0], rtol=0, atol=1e-15)
    assert_allclose(upp, upp[0], rtol=0, atol=1e-15)


def test_csv_byte_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    cfg = str(CONFIGS / "radial.json")
    assert main(["radial", "--config", cfg, "--out", str(a)]) == 0
    assert main(["radial", "--config", cfg, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_csv_seventeen_digits():
    text = render_csv(["x"], [[1.0 / 3.0]])
    assert text == "x\n0.33333333333333331\n"
    assert float(text.split()[1]) == 1.0 / 3.0


def test_expand_coefficient_and_slopes(capsys):
    assert main(["expand", "--config", str(CONFIGS / "expand.json")]) == 0
    rows = _rows(capsys.readouterr().out)
    first = [r for r in rows if r["quantity"] == "c_minus" and r["j"] == "1"][0]
    assert_allclose(float(first["value"]), -1.0 / 3.0, rtol=1e-12)
    slopes = [r for r in rows if r["quantity"] == "remainder_slope"]
    assert len(slopes) == 3
    for r in slopes:
        J = int(r["j"])
        assert abs(float(r["value"]) - (2 - 3 * (J + 1))) <= 0.1


def test_expand_c_zero_has_zero_tail(tmp_path, capsys):
    cfg = _write(tmp_path, {"tau": 0.0, "n": 3, "C0": 0.0, "c": 0.0, "format": "json"})
    assert main(["expand", "--config", cfg]) == 0
    out = json.loads(capsys.readouterr().out)
    assert all(x == 0.0 for x in out["tail_coefficients"])
    assert out["remainder_slopes"] == []


def test_verify_json_pass(capsys):
    assert main(["verify", "--config", str(CONFIGS / "verify.json")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["pass"] is True
    assert out["failed"] == []


def test_verify_perturbed_coefficient_fails(tmp_path, capsys):
    cfg = _write(tmp_path, {"tau": 0.0, "n": 3, "C0": 0.0, "c": 1.0, "format": "json",
                            "perturb": {"target": "coefficient", "j": 2, "relative": 0.01}})
    assert main(["verify", "--config", cfg]) == 1
    out = json.loads(capsys.readouterr().out)
    assert out["pass"] is False
    assert "remainder_slopes" in out["failed"]


def test_verify_perturbed_constant_fails(tmp_path, capsys):
    cfg = _write(tmp_path, {"tau": "pi/2", "n": 3, "C0": 0.0, "c": 1.0, "format": "json",
                            "perturb": {"target": "C0", "relative": 1e-3}})
    assert main(["verify", "--config", cfg]) == 1
    out = json.loads(capsys.readouterr().out)
    assert "pde_residual" in out["failed"]


def test_theorem2_pure_monopole(capsys):
    assert main(["theorem2", "--config", str(CONFIGS / "theorem2.json")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["pass"] is True
    assert out["amplitude_error"] <= 1e-5
    assert out["remainder_slope"] <= -3.8
    for entry in out["coefficients"]:
        if entry["k"] > 0:
            assert abs(entry["value"]) <= 1e-5


def test_theorem2_quadratic_solution(tmp_path, capsys):
    cfg = _write(tmp_path, {"tau": "pi/2", "n": 3, "C0": 0.0, "c": 0.0, "format": "json"})
    assert main(["theorem2", "--config", cfg]) == 0
    out = json.loads(capsys.readouterr().out)
    assert max(abs(e["value"]) for e in out["coefficients"]) <= 1e-10


def test_c_beyond_range_is_input_error(tmp_path, capsys):
    cfg = _write(tmp_path, {"tau": "pi/2", "n": 3, "C0": 0.0, "c": 100.0})
    assert main(["radial", "--config", cfg]) == 2
    captured = capsys.readouterr()
    assert captured.out == ""
    err = _stderr_json(captured.err)
    assert err["exit_code"] == 2
    assert err["error"]["bound"] == "Xi_2"
    assert "Xi_2" in err["error"]["message"]


@pytest.mark.parametrize("bad", [
    {"tau": 0.0, "n": 3, "C0": 0.0, "wibble": 1},
    {"tau": 0.0, "n": 2, "C0": 0.0},
    {"tau": 0.0, "n": 3},
    {"tau": "pi/x", "n": 3, "C0": 0.0},
    {"tau": 0.0, "n": 3, "C0": 0.0, "format": "xml"},
    {"tau": 0.0, "n": 3, "C0": 0.0, "r_range": [10.0, 2.0]},
    {"tau": 2.0, "n": 3, "C0": 0.0},
    {"tau": "pi/2", "n": 3, "C0": 10.0},
])
def test_bad_config_exit_2(tmp_path, capsys, bad):
    cfg = _write(tmp_path, bad)
    assert main(["radial", "--config", cfg]) == 2
    err = _stderr_json(capsys.readouterr().err)
    assert err["exit_code"] == 2 and err["error"]["message"]


@pytest.mark.parametrize("flags", [
    ["--tolerance-scale", "0"],
    ["--tolerance-scale", "-1"],
    ["--jobs", "0"],
    ["--format", "xml"],
])
def test_bad_flags_exit_2(capsys, flags):
    assert main(["radial", "--config", str(CONFIGS / "radial.json")] + flags) == 2
    assert _stderr_json(capsys.readouterr().err)["exit_code"] == 2


def test_missing_config_file(tmp_path, capsys):
    assert main(["radial", "--config", str(tmp_path / "nope.json")]) == 2
    assert _stderr_json(capsys.readouterr().err)["error"]["type"] == "ConfigError"


def test_unknown_command(capsys):
    assert main(["integrate", "--config", "x.json"]) == 2
    assert _stderr_json(capsys.readouterr().err)["error"]["code"] == "usage"


def test_tolerance_scale_loosens(tmp_path, capsys):
    cfg = _write(tmp_path, {"tau": 0.0, "n": 3, "C0": 0.0, "c": 1.0, "format": "json",
                            "perturb": {"target": "coefficient", "j": 2, "relative": 0.01}})
    assert main(["verify", "--config", cfg, "--tolerance-scale", "1e6"]) == 0


def test_sweep_parallel_files(tmp_path, capsys):
    out = tmp_path / "run.json"
    code = main(["verify", "--config", str(CONFIGS / "sweep_verify.json"), "--jobs", "2",
                 "--out", str(out)])
    assert code == 0
    summary = _stderr_json(capsys.readouterr().err)["sweep"]
    assert [s["exit_code"] for s in summary] == [0, 0, 0]
    for i in range(3):
        data = json.loads((tmp_path / f"run.{i}.json").read_text())
        assert data["pass"] is True


def test_sweep_worst_exit_code(tmp_path, capsys):
    cfg = _write(tmp_path, {"tau": "pi/2", "n": 3, "C0": 0.0, "c": 1.0,
                            "sweep": [{"c": 0.5}, {"c": 100.0}]})
    assert main(["radial", "--config", cfg, "--out", str(tmp_path / "o.csv")]) == 2
    summary = _stderr_json(capsys.readouterr().err)["sweep"]
    assert summary[0]["exit_code"] == 0
    assert summary[1]["error"]["bound"] == "Xi_2"
    assert (tmp_path / "o.0.csv").exists() and not (tmp_path / "o.1.csv").exists()


def test_parse_real_pi_forms():
    assert_allclose(parse_real("pi/6", "t"), 0.5235987755982988, rtol=1e-15)
    assert_allclose(parse_real("3*pi/8", "t"), 1.1780972450961724, rtol=1e-15)
    assert_allclose(parse_real("-pi", "t"), -3.141592653589793, rtol=1e-15)
    with pytest.raises(ConfigError):
        parse_real(True, "t")
    with pytest.raises(ConfigError):
        parse_real("inf", "t")


def test_config_command_mismatch():
    with pytest.raises(ConfigError):
        parse_config({"command": "expand", "tau": 0.0, "n": 3, "C0": 0.0}, "radial")


def test_module_entry_point(tmp_path):
    cfg = _write(tmp_path, {"tau": 0.0, "n": 3, "C0": 0.0, "c": 1.0, "num": 3})
    proc = subprocess.run([sys.executable, "-m", "exterior_expansion", "radial", "--config", cfg],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0] == "r,u,u_prime,u_second,W,first_integral_check"
