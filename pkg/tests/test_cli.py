import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from morseflow.cli import main
from morseflow.config import landscape_from_dict, load_config
from morseflow.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _run(*argv, out):
    return main([*argv, "--out", str(out)])


def test_critical_report(tmp_path, capsys):
    assert _run("critical", "--config", str(CONFIGS / "torus2_skew.json"), out=tmp_path) == 0
    rec = json.loads((tmp_path / "critical.json").read_text())
    kinds = sorted(p["kind"] for p in rec["points"])
    assert kinds == ["maximum", "minimum", "saddle", "saddle"]
    assert "Euler sum 0" in capsys.readouterr().out


def test_critical_csv(tmp_path):
    assert _run("critical", "--config", str(CONFIGS / "circle_3.json"), "--format", "csv", out=tmp_path) == 0
    lines = (tmp_path / "critical.csv").read_text().splitlines()
    assert lines[0] == "id,kind,index,value,x1,gap_rel"
    assert len(lines) == 7


def test_graph_exit_codes(tmp_path, capsys):
    assert _run("graph", "--config", str(CONFIGS / "circle_3.json"), out=tmp_path / "c") == 0
    assert (tmp_path / "c" / "graph.dot").read_text().count(" -- ") == 6
    assert _run("graph", "--config", str(CONFIGS / "line_2.json"), "--format", "json",
                out=tmp_path / "l") == 0
    assert len(json.loads((tmp_path / "l" / "graph.json").read_text())["edges"]) == 4
    assert _run("graph", "--config", str(CONFIGS / "torus2_sep.json"), out=tmp_path / "s") == 3
    assert "SADDLE_HIT" in capsys.readouterr().out
    assert not (tmp_path / "s" / "graph.dot").exists()


def test_tie_exit_code(tmp_path):
    cfg = tmp_path / "tie.json"
    cfg.write_text(json.dumps({"manifold": {"kind": "torus", "periods": ["2*pi", "2*pi"]},
                               "F": "cos(x1) + cos(x2)"}))
    assert _run("critical", "--config", str(cfg), out=tmp_path) == 2
    assert _run("graph", "--config", str(cfg), out=tmp_path) == 2
    assert _run("concentrate", "--config", str(cfg), "--samples", "100", out=tmp_path) == 2


def test_concentrate_reports(tmp_path):
    args = ["concentrate", "--config", str(CONFIGS / "torus2_skew.json"),
            "--deltas", "0.4,0.2", "--samples", "100", "--seed", "4"]
    assert _run(*args, "--threads", "1", out=tmp_path / "a") == 0
    assert _run(*args, "--threads", "2", out=tmp_path / "b") == 0
    for name in ("concentration.csv", "concentration.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert _run("concentrate", "--config", str(CONFIGS / "torus2_sep.json"), "--samples", "100",
                out=tmp_path / "c") == 3


def test_config_params_are_defaults(tmp_path):
    cfg = json.loads((CONFIGS / "torus2_skew_explicit.json").read_text())
    cfg.update({"samples": 100, "deltas": [0.3, 0.15]})
    path = tmp_path / "explicit.json"
    path.write_text(json.dumps(cfg))
    assert _run("concentrate", "--config", str(path), out=tmp_path) == 0
    rec = json.loads((tmp_path / "concentration.json").read_text())
    assert [r["delta"] for r in rec["rows"]] == [0.3, 0.15]
    assert {r["N"] for r in rec["rows"]} == {100}


def test_usage_errors(tmp_path, capsys):
    assert _run("critical", "--config", str(tmp_path / "missing.json"), out=tmp_path) == 1
    assert _run("critical", out=tmp_path) == 1
    assert _run("concentrate", "--config", str(CONFIGS / "torus2_skew.json"), "--samples", "50",
                out=tmp_path) == 1
    assert _run("critical", "--config", str(CONFIGS / "torus2_skew.json"), "--seed", "-1",
                out=tmp_path) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert _run("critical", "--config", str(bad), out=tmp_path) == 1
    assert "error" in capsys.readouterr().err


def test_property_subcommands(tmp_path):
    assert _run("perturb-check", "--pairs", "20", out=tmp_path) == 0
    assert json.loads((tmp_path / "perturb_check.json").read_text())[0]["passed"] is True
    assert _run("linear-check", "--samples", "20000", out=tmp_path) == 0
    assert (tmp_path / "linear_ratio2.csv").read_text().startswith("delta,ratio\n")


def test_scaling_subcommand(tmp_path):
    assert _run("scaling", "--config", str(CONFIGS / "box_quad.json"), "--samples", "1000",
                out=tmp_path) == 0
    rec = json.loads((tmp_path / "scaling.json").read_text())
    assert rec["predicted_exponent"] == pytest.approx(1.0)
    assert _run("scaling", "--config", str(CONFIGS / "box_quad.json"), "--samples", "1000",
                "--tolerance", "0.0001", out=tmp_path) == 4


def test_outputs_leave_no_temporaries(tmp_path):
    _run("critical", "--config", str(CONFIGS / "circle_1.json"), out=tmp_path)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["critical.json"]


def test_console_script(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "morseflow.cli", "critical", "--config",
                           str(CONFIGS / "circle_1.json"), "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "2 critical points" in proc.stdout


def test_config_parsing():
    L = landscape_from_dict({"manifold": {"kind": "box", "bounds": [[-1, 1], ["-pi", "pi"]]},
                             "F": "x1^2 + cos(x2)", "metric": [["2", "0"], ["0", "1 + x1^2"]],
                             "density": "1 + x2^2", "tolerances": {"capture_radius": 1e-4}})
    assert L.n == 2 and L.tolerances.capture_radius == 1e-4
    assert np.allclose(L.manifold.bounds()[1], [1.0, np.pi])
    cfg = load_config(CONFIGS / "torus2_skew_explicit.json")
    assert cfg.params["maximum"] == 3 and cfg.landscape.manifold.periodic


@pytest.mark.parametrize("data", [
    {},
    {"F": "x1"},
    {"F": "builtin:nope"},
    {"F": "x1 +", "manifold": {"kind": "circle"}},
    {"F": "x1", "manifold": {"kind": "sphere"}},
    {"F": "x1", "manifold": {"kind": "circle"}, "dimension": 2},
    {"F": "x1", "manifold": {"kind": "circle"}, "tolerances": {"bogus": 1}},
    {"F": "x1", "manifold": {"kind": "circle", "period": "x1"}},
    {"F": "x1", "manifold": {"kind": "circle"}, "metric": "flat"},
])
def test_config_errors(data):
    with pytest.raises(ConfigError):
        landscape_from_dict(data)
