import json
import subprocess
import sys

import pytest

from weightlab import __version__
from weightlab._jsonio import config_hash
from weightlab.cli import COMMANDS, main

FAST = {
    "maximal": {"function": {"family": "indicator", "lo": 0.0, "hi": 0.5}, "level": 6, "csv": True},
    "weight-report": {"weight": {"kind": "power", "alpha": 0.5}, "p0": 1, "q0": 4, "level": 10},
    "czd": {"function": {"family": "bump", "center": 0.4, "width": 0.2}, "alpha": 0.5, "level": 7, "csv": True},
    "czd-grad": {"function": {"family": "ramp", "a": 0.25, "b": 0.75}, "alpha": 0.5, "level": 7},
    "goodlambda": {"function": {"family": "indicator", "lo": 0.25, "hi": 0.5}, "level": 7},
    "extrapolate": {"p": 2, "q": 3, "weight": {"family": "power", "alpha": 0.5}, "level": 8},
    "modelop": {"suite": "smooth", "level": 7},
}


def _run(tmp_path, cmd, cfg, *extra):
    cfgfile = tmp_path / "cfg.json"
    cfgfile.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    code = main([cmd, "--config", str(cfgfile), "--out", str(out), *extra])
    return code, out


def test_every_command_covered():
    assert set(FAST) == set(COMMANDS)


@pytest.mark.parametrize("cmd", sorted(FAST))
def test_commands_succeed(cmd, tmp_path):
    code, out = _run(tmp_path, cmd, FAST[cmd])
    assert code == 0
    rep = json.loads((out / f"{cmd}.json").read_text())
    assert rep["exit_code"] == 0 and rep["version"] == __version__
    assert rep["config_hash"] == config_hash({"command": cmd, "config": FAST[cmd]})


def test_csv_outputs(tmp_path):
    _, out = _run(tmp_path, "maximal", FAST["maximal"])
    assert any(p.name.startswith("maximal_") and p.suffix == ".csv" for p in out.iterdir())
    (tmp_path / "c").mkdir()
    _, out2 = _run(tmp_path / "c", "czd", FAST["czd"])
    assert {"czd_good.csv", "czd_bad.csv"} <= {p.name for p in out2.iterdir()}


def test_schema_error_writes_nothing(tmp_path, capsys):
    cfg = dict(FAST["czd"], bogus=1)
    code, out = _run(tmp_path, "czd", cfg)
    assert code == 2 and not out.exists()
    assert "/bogus" in capsys.readouterr().err


def test_schema_type_error_pointer(tmp_path, capsys):
    code, out = _run(tmp_path, "czd", dict(FAST["czd"], alpha="big"))
    assert code == 2 and not out.exists()
    assert "/alpha" in capsys.readouterr().err


def test_malformed_json(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["maximal", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    bad.write_text("[1, 2]")
    assert main(["maximal", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert not (tmp_path / "o").exists()


def test_semantic_error_maps_to_schema(tmp_path):
    cfg = dict(FAST["czd"], function={"family": "nope"})
    code, out = _run(tmp_path, "czd", cfg)
    assert code == 2 and not out.exists()


def test_inconclusive_exit_code(tmp_path):
    cfg = {"weight": {"kind": "power", "alpha": 5.5}, "p0": 1, "q0": 4}
    code, out = _run(tmp_path, "weight-report", cfg, "--level", "10")
    assert code == 3
    rep = json.loads((out / "weight-report.json").read_text())
    assert rep["config"]["level"] == 10 and rep["exit_code"] == 3


def test_refusal_exit_code(tmp_path):
    cfg = {"p": 2, "q": 3, "weight": {"family": "power", "alpha": 3.0}, "level": 8}
    code, out = _run(tmp_path, "extrapolate", cfg)
    assert code == 4
    rep = json.loads((out / "extrapolate.json").read_text())
    assert rep["result"]["refused"] is True


def test_czd_height_above_max(tmp_path):
    cfg = dict(FAST["czd"], alpha=100.0)
    code, out = _run(tmp_path, "czd", cfg)
    assert code == 0
    assert json.loads((out / "czd.json").read_text())["result"]["cubes"] == []


def test_flag_overrides(tmp_path):
    code, out = _run(tmp_path, "maximal", FAST["maximal"], "--level", "5", "--family", "dyadic", "--seed", "9")
    assert code == 0
    cfg = json.loads((out / "maximal.json").read_text())["config"]
    assert cfg["level"] == 5 and cfg["family"] == "dyadic" and cfg["seed"] == 9


def test_module_entry_point(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(FAST["goodlambda"]))
    proc = subprocess.run(
        [sys.executable, "-m", "weightlab", "goodlambda", "--config", str(cfg), "--out", str(tmp_path / "o")],
        capture_output=True,
    )
    assert proc.returncode == 0 and (tmp_path / "o" / "goodlambda.json").exists()
