import json
import subprocess
import sys
from pathlib import Path

import pytest

from fracblow.cli import (
    EXIT_ENGINE,
    EXIT_F0_NONPOSITIVE,
    EXIT_HYPOTHESES_FAIL,
    EXIT_IO,
    EXIT_OK,
    ScenarioError,
    main,
    parse_scenario,
    run,
)

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def scenario(**kw):
    doc = {"name": "t", "mode": "certify", "family": {"family": "FBB", "b": 1}, "alpha": 0.5, "phi": "x-1", "u0": "0"}
    doc.update(kw)
    return json.dumps({k: v for k, v in doc.items() if v is not None})


@pytest.mark.parametrize(
    "text, message",
    [
        ('{"name": "t",\n "alpha": }', "line 2, column"),
        (scenario(alpha=1.5), "alpha out of range"),
        (scenario(alpha=0), "alpha out of range"),
        (scenario(L=-1), "L: must be > 0"),
        (scenario(phi=None), "phi: required"),
        (scenario(family={"family": "KdV"}), "unknown family"),
        (scenario(family={"family": "FBB", "z": 1}), "unknown keys"),
        (scenario(phi="x +"), "column"),
        (scenario(boundary={"kind": "tidal"}), "boundary.kind"),
        (scenario(mode="simulate", grid={"m": 4, "horizon": 1}), "grid.m"),
        (scenario(mode="simulate", grid={"m": 16}), "grid.horizon"),
        (scenario(mode="ode"), "ode.u0"),
        (scenario(u0={"file": "missing.csv"}), "does not exist"),
        ("[1, 2]", "JSON object"),
    ],
)
def test_parse_errors(text, message):
    with pytest.raises(ScenarioError, match=message.replace("+", r"\+")):
        parse_scenario(text)


def test_mode_mismatch():
    with pytest.raises(ScenarioError, match="mode"):
        parse_scenario(scenario(), mode="simulate")


def test_sampled_initial_data(tmp_path):
    (tmp_path / "u0.csv").write_text("x,u\n" + "".join(f"{i / 20},{-3 * (1 - i / 20)}\n" for i in range(21)))
    text = scenario(u0={"file": "u0.csv"}, boundary={"kind": "constant", "value": 0.5})
    sc = parse_scenario(text, tmp_path)
    assert run(sc, tmp_path) == EXIT_OK
    cert = json.loads((tmp_path / "t.certificate.json").read_text())
    assert cert["F0"] == pytest.approx(0.5, rel=1e-10)


@pytest.mark.parametrize(
    "name, code",
    [("rosenau-x-1", EXIT_OK), ("camassa-holm-zero", EXIT_OK), ("mkdv-x-1", EXIT_F0_NONPOSITIVE), ("ode-half", EXIT_OK)],
)
def test_shipped_scenarios(tmp_path, name, code):
    mode = "ode" if name.startswith("ode") else "certify"
    assert main([mode, "--scenario", str(SCENARIOS / f"{name}.json"), "--out", str(tmp_path)]) == code


def test_hypotheses_fail_code(tmp_path):
    sc = parse_scenario(scenario(phi="-x", family={"family": "FBB", "d": 1}))
    assert run(sc, tmp_path) == EXIT_HYPOTHESES_FAIL


def test_engine_error_code(tmp_path):
    text = scenario(
        mode="simulate", phi=None, family={"family": "FBB", "b": 1},
        bc={"left": [{"type": "dirichlet"}], "right": [{"type": "dirichlet"}]}, grid={"m": 16, "horizon": 1},
    )
    assert run(parse_scenario(text), tmp_path) == EXIT_ENGINE


def test_missing_scenario_file(tmp_path):
    assert main(["certify", "--scenario", str(tmp_path / "nope.json")]) == EXIT_IO


def test_worst_code_wins(tmp_path):
    args = ["certify", "--out", str(tmp_path)]
    for n in ("rosenau-x-1", "mkdv-x-1"):
        args += ["--scenario", str(SCENARIOS / f"{n}.json")]
    assert main(args) == EXIT_F0_NONPOSITIVE
    assert main(args + ["--scenario", str(tmp_path / "nope.json")]) == EXIT_IO


def test_simulate_writes_report(tmp_path):
    assert main(["simulate", "--scenario", str(SCENARIOS / "burgers-sine.json"), "--out", str(tmp_path)]) == EXIT_OK
    rep = json.loads((tmp_path / "burgers-sine.report.json").read_text())
    assert rep["max_principle"]["passed"] and rep["stop_reason"] == "horizon-reached"
    assert (tmp_path / "burgers-sine.csv").exists() and (tmp_path / "burgers-sine.report.json.meta.json").exists()


def test_outputs_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    paths = [str(SCENARIOS / f"{n}.json") for n in ("rosenau-x-1", "camassa-holm-zero")]
    for out, jobs in ((a, "1"), (b, "2")):
        argv = ["certify", "--out", str(out), "--jobs", jobs]
        for p in paths:
            argv += ["--scenario", p]
        assert main(argv) == EXIT_OK
    for f in sorted(a.glob("*.certificate.json")):
        assert f.read_bytes() == (b / f.name).read_bytes()


def test_audit_command(tmp_path):
    assert main(["audit", "--out", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "audit.json").read_text())
    assert doc["flagged"] == ["kdv-x", "burgers-robin-x", "bbm-x4", "ostrovsky-x2", "mkdv-exp", "mkdv-x-1"]


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "fracblow", "audit", "--out", str(tmp_path)], capture_output=True)
    assert r.returncode == 0
