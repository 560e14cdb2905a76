import json
import math
import subprocess
import sys

import pytest

from exprays.cli import parse_complex, preprocess_argv, build_parser, run_command
from exprays.render import read_ppm

C_MIS = f"{math.log(2 * math.pi)!r}+{math.pi / 2!r}i"
PAIR = "| 0 1; | 1 0"


def run(capsys, *argv):
    code = run_command(list(argv))
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 1
    return code, json.loads(out[0])


def test_parse_complex():
    assert parse_complex("-2+0i") == -2
    assert parse_complex("1.5-3j") == 1.5 - 3j
    assert parse_complex("(1+2i)") == 1 + 2j
    assert parse_complex("i") == 1j and parse_complex("-i") == -1j


def test_negative_values_are_glued():
    argv = preprocess_argv(["land-ray", "--c", "-2+0i", "--address", "| 0"], build_parser())
    assert argv == ["land-ray", "--c=-2+0i", "--address", "| 0"]


def test_trace_ray_output(tmp_path, capsys):
    out = tmp_path / "ray.json"
    code, summary = run(capsys, "trace-ray", "--c", "-2+0i", "--address", "| 0", "--tmin", "0.05",
                        "--tmax", "20", "--samples", "200", "--out", str(out))
    assert code == 0 and summary["status"] == "ok" and summary["samples"] == 200
    d = json.loads(out.read_text())
    assert d["kind"] == "RayTrace" and len(d["samples"]) == 200
    assert all(s["err"] < 1e-9 for s in d["samples"])


def test_land_ray_summary(capsys):
    code, summary = run(capsys, "land-ray", "--c", "-2+0i", "--address", "| 0")
    assert code == 0 and summary["status"] == "Landed"
    assert abs(summary["re"] - 1.14619322062) < 1e-9


def test_numeric_failure_exit_code(capsys):
    code, summary = run(capsys, "land-ray", "--c", f"20+{2 * math.pi!r}i", "--address", "| 1")
    assert code == 2 and summary["status"] == "SingularObstruction"
    code, summary = run(capsys, "locate", "--c", C_MIS, "--address", PAIR, "--z", "0.4974708587998524+2.523622599862715i")
    assert code == 2 and summary["error"] == "OnBoundary"


def test_usage_errors(capsys):
    assert run(capsys, "land-ray", "--c", "x", "--address", "| 0")[0] == 1
    assert run(capsys, "land-ray", "--c", "-2", "--address", "| 0 1 |")[0] == 1
    assert run(capsys)[0] == 1
    assert run(capsys, "no-such-command")[0] == 1
    assert run(capsys, "build-graph", "--c", "-2")[0] == 1


def test_config_file(tmp_path, capsys):
    (tmp_path / "base.cfg").write_text("c = -2+0i\n")
    (tmp_path / "job.cfg").write_text("include base.cfg\naddress = | 0\n")
    code, summary = run(capsys, "--config", str(tmp_path / "job.cfg"), "land-ray")
    assert code == 0 and abs(summary["re"] - 1.14619322062) < 1e-9
    # flags win over the file
    code, summary = run(capsys, "--config", str(tmp_path / "job.cfg"), "land-ray", "--c", "-3")
    assert code == 0 and abs(summary["re"] - 1.14619322062) > 1e-3


def test_puzzle_commands(tmp_path, capsys):
    code, s = run(capsys, "build-puzzle", "--c", C_MIS, "--address", PAIR, "--level", "1",
                  "--check", "--out", str(tmp_path / "p.json"))
    assert code == 0 and s["pieces"] == 5 and s["checks"] == {"nesting": True, "markov": True}
    code, s = run(capsys, "certify-nonrecurrence", "--c", C_MIS, "--address", PAIR, "--nmax", "2")
    assert code == 0 and s["result"] == "Certified" and s["level"] == 1
    code, s = run(capsys, "compare-combinatorics", "--c", C_MIS, "--c2", "-2", "--address", PAIR)
    assert s["result"] == "Distinguished" and s["level"] == 0
    (tmp_path / "graph.txt").write_text("# the period-2 pair\n| 0 1\n| 1 0\n")
    code, s = run(capsys, "build-graph", "--c", C_MIS, "--addresses-file", str(tmp_path / "graph.txt"))
    assert code == 0 and s["classes"] == [["| 0 1", "| 1 0"]]


def test_parameter_and_wake_commands(capsys):
    code, s = run(capsys, "land-param-ray", "--address", "| 0")
    assert code == 0 and s["status"] == "Landed" and abs(s["re"] + 1) < 1e-6
    for method in ("dynamical", "parametric"):
        code, s = run(capsys, "wake-test", "--c", C_MIS, "--plus", "| 0 1", "--minus", "| 1 0",
                      "--method", method)
        assert code == 0 and s["inside"] == "Inside"


def test_hyperbolicity_and_bridge_commands(capsys):
    code, s = run(capsys, "orbit-sample", "--c", "-2", "--M", "50")
    assert abs(s["min_distance"] - math.exp(-2)) < 1e-12 and s["recurrent"] is False
    code, s = run(capsys, "growth-report", "--c", C_MIS, "--kmax", "5")
    assert s["positive"] and s["k_bar"] == 1
    code, s = run(capsys, "angle-map", "--theta", "1/3", "--D", "2")
    assert s["address"] == "| 0 1"
    code, s = run(capsys, "angle-map", "--address", "| 1", "--D", "3")
    assert s["theta"] == "1/2"
    code, s = run(capsys, "renorm-indicator", "--address", "| 0", "--qmax", "2", "--kmax", "2")
    assert s["rows"] == [{"q": 1, "witnesses": [1, 2]}, {"q": 2, "witnesses": [1, 2]}]
    code, s = run(capsys, "compare-landing", "--c-poly", "-1", "--c-exp", C_MIS, "--pairs",
                  "| 0 1, | 1 0")
    assert s["pairs"][0]["agree"] is True
    code, s = run(capsys, "find-orbits", "--c", "-2", "--period", "1", "--seeds", "1.0;-1.8")
    assert s["count"] == 2


def test_render_command(tmp_path, capsys):
    ray = tmp_path / "ray.json"
    run(capsys, "trace-ray", "--c", "-2+0i", "--address", "| 0", "--tmin", "0.05", "--tmax", "20",
        "--samples", "50", "--out", str(ray))
    img = tmp_path / "img.ppm"
    code, s = run(capsys, "render", "--plane", "dynamical", "--c", "-2+0i", "--viewport", "0,0,8,6",
                  "--res", "800x600", "--overlay", str(ray), "--out", str(img))
    assert code == 0
    assert img.read_bytes()[:2] == b"P6"
    assert read_ppm(img).shape == (600, 800, 3)
    assert run(capsys, "render", "--res", "10x10", "--overlay", str(tmp_path / "missing.json"),
               "--out", str(img))[0] == 1


def test_console_entry_point():
    p = subprocess.run([sys.executable, "-m", "exprays.cli", "angle-map", "--theta", "1/4"],
                       capture_output=True, text=True)
    assert p.returncode == 0 and json.loads(p.stdout)["address"] == "0 1 | 0"
