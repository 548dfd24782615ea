import json
import subprocess
import sys

import numpy as np
import pytest

from curvfunc.cli import main


def run(tmp_path, command, cfg, *extra):
    path = tmp_path / f"{command}.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    code = main([command, "--config", str(path), "--out", str(out), *extra])
    return code, out


def load(path):
    return json.loads(path.read_text())


def test_curvature_flat(tmp_path):
    code, out = run(tmp_path, "curvature", {"model": {"family": "flat_torus", "n": 3,
                                                      "resolution": 16}})
    assert code == 0
    q = load(out / "report.json")["quantities"]
    assert q["S"]["value"] == 0 and q["lambda_g"]["value"] == 0
    for k in ("critical_residual", "trace_residual", "einstein_residual", "te_residual"):
        assert q[k]["value"] == 0 and q[k]["tolerance"] > 0


def test_curvature_unit_area_sphere(tmp_path):
    code, out = run(tmp_path, "curvature", {"model": {
        "family": "round_sphere", "n": 2, "resolution": 32, "order": "spectral",
        "unit_volume": True}})
    assert code == 0
    S = load(out / "report.json")["quantities"]["S"]
    assert abs(S["value"] - 64 * np.pi**2) / (64 * np.pi**2) < 1e-4
    assert S["passed"]


def test_curvature_s2_s3_not_einstein(tmp_path):
    code, out = run(tmp_path, "curvature", {"model": {
        "family": "product_spheres", "p": 2, "q": 3, "resolution": 16, "order": "spectral"}})
    assert code == 0
    q = load(out / "report.json")["quantities"]
    assert q["einstein_residual"]["value"] > 0
    assert q["einstein_residual"]["expected_zero"] is False


def test_every_number_has_a_tolerance(tmp_path):
    _, out = run(tmp_path, "curvature", {"model": {"family": "flat_torus", "n": 2,
                                                   "resolution": 16}})
    for entry in load(out / "report.json")["quantities"].values():
        assert "tolerance" in entry and "value" in entry


def test_verify_default_passes(tmp_path):
    code, out = run(tmp_path, "verify", {"seed": 42})
    rep = load(out / "verify.json")
    assert code == 0 and rep["all_passed"]
    assert set(rep["suites"]) == {"bianchi", "variational", "pairing", "decomposition",
                                  "kazdan-warner", "cauchy-schwarz"}
    for c in rep["checks"]:
        assert c["tolerance"] > 0


def test_verify_sign_canary(tmp_path):
    code, out = run(tmp_path, "verify", {"verify": {"suites": ["bianchi", "variational"],
                                                    "debug_laplacian_sign": True}})
    assert code == 1
    rep = load(out / "verify.json")
    assert rep["suites"] == {"bianchi": False, "variational": False}


def test_verify_empty_selection(tmp_path):
    code, _ = run(tmp_path, "verify", {"verify": {"suites": []}})
    assert code == 2
    code, _ = run(tmp_path, "verify", {"verify": {"suites": ["nope"]}})
    assert code == 2


def test_flow_gradient_monotone(tmp_path):
    code, out = run(tmp_path, "flow", {
        "seed": 3, "model": {"family": "perturbed_torus", "n": 2, "resolution": 16,
                             "amplitude": 0.05, "max_frequency": 1},
        "flow": {"kind": "gradient", "steps": 20, "dt": 1e-3}})
    assert code == 0
    data = np.genfromtxt(out / "trace.csv", delimiter=",", names=True)
    assert np.all(np.diff(data["S"]) <= 0)
    assert load(out / "final_report.json")["checks"]["S_increase"]["passed"]


def test_flow_yamabe_stationary(tmp_path):
    code, out = run(tmp_path, "flow", {
        "model": {"family": "flat_torus", "n": 3, "resolution": 16, "order": "spectral"},
        "flow": {"kind": "yamabe", "steps": 4, "dt": 1e-3}})
    assert code == 0
    data = np.loadtxt(out / "trace.csv", delimiter=",", skiprows=1)
    assert np.max(np.abs(data[:, 2:] - data[0, 2:])) < 1e-12


def test_flow_perturbed_short(tmp_path):
    code, out = run(tmp_path, "flow", {
        "seed": 42, "model": {"family": "conformal_torus", "n": 3, "resolution": 16,
                              "amplitude": 0.05, "max_frequency": 1},
        "flow": {"kind": "perturbed-yamabe", "steps": 5, "dt": 1e-3}})
    assert code == 0
    rep = load(out / "final_report.json")
    assert rep["checks"]["S_drift"]["passed"]
    assert rep["checks"]["orthogonality_defect"]["value"] < 1e-9
    header = (out / "trace.csv").read_text().splitlines()[0]
    assert header == "step,t,S,H,Vol,min_s,max_s,Lambda,v_norm,critical_residual,trace_residual,dt"


def test_flow_n4_is_config_error(tmp_path):
    code, _ = run(tmp_path, "flow", {
        "model": {"family": "conformal_torus", "n": 4, "resolution": 16},
        "flow": {"kind": "perturbed-yamabe", "steps": 1}})
    assert code == 2


@pytest.mark.parametrize("cfg", [
    {"flow": {"kind": "ricci", "steps": 1}, "model": {"family": "flat_torus", "n": 2}},
    {"flow": {"kind": "yamabe", "steps": -1}, "model": {"family": "flat_torus", "n": 2}},
    {"flow": {"kind": "yamabe", "steps": 1}},
    {"flow": {"kind": "yamabe", "steps": 1}, "model": {"family": "flat_torus", "n": 2,
                                                       "resolution": 15}},
    {"tolerances": {"residual": -1.0}},
])
def test_flow_config_errors(tmp_path, cfg):
    code, _ = run(tmp_path, "flow", cfg)
    assert code == 2


def test_bad_json_and_command_mismatch(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["curvature", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["curvature", "--config", str(tmp_path / "missing.json")]) == 2
    code, _ = run(tmp_path, "curvature", {"command": "flow"})
    assert code == 2


def test_trace_eq(tmp_path):
    code, out = run(tmp_path, "trace-eq", {"trace_eq": {
        "c": 1.0, "u0": [0.25, 0.5, 0.75], "periods": 20,
        "pde": {"resolution": 32, "order": 4}}})
    assert code == 0
    ode = load(out / "ode.json")
    periods = [o["period"] for o in ode["orbits"]]
    assert ode["periods_monotone_in_amplitude"] and periods[0] > periods[1] > periods[2]
    for o in ode["orbits"]:
        assert o["period_relative_error"]["value"] < 1e-6
    pde = load(out / "pde.json")
    assert pde["residual"]["value"] < 1e-8 and pde["nonconstant"]
    assert (out / "orbit_0.csv").read_text().startswith("t,u,v\n")
    assert (out / "pde_solution.csv").read_text().startswith("x,y,u\n")


def test_trace_eq_constant_orbit(tmp_path):
    code, out = run(tmp_path, "trace-eq", {"trace_eq": {"c": 1.0, "u0": [1.0], "periods": 3}})
    assert code == 0
    assert load(out / "ode.json")["orbits"][0]["period"] is None


def test_hessian(tmp_path):
    code, out = run(tmp_path, "hessian", {"seed": 1, "model": {
        "family": "conformal_torus", "n": 3, "resolution": 16, "amplitude": 0.05,
        "max_frequency": 1}})
    assert code == 0
    rep = load(out / "hessian.json")
    assert rep["relative_defect"]["passed"]


def test_out_precedence(tmp_path, monkeypatch):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": {"family": "flat_torus", "n": 2, "resolution": 16},
                               "out": str(tmp_path / "from_config")}))
    monkeypatch.setenv("CURVFUNC_OUT", str(tmp_path / "from_env"))
    assert main(["curvature", "--config", str(cfg)]) == 0
    assert (tmp_path / "from_env" / "report.json").exists()
    assert main(["curvature", "--config", str(cfg), "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "report.json").exists()
    monkeypatch.delenv("CURVFUNC_OUT")
    assert main(["curvature", "--config", str(cfg)]) == 0
    assert (tmp_path / "from_config" / "report.json").exists()


def test_seed_flag_changes_model(tmp_path):
    cfg = {"model": {"family": "perturbed_torus", "n": 2, "resolution": 16}}
    _, a = run(tmp_path, "curvature", cfg, "--seed", "1")
    sa = (a / "report.json").read_bytes()
    _, b = run(tmp_path, "curvature", cfg, "--seed", "2")
    assert sa != (b / "report.json").read_bytes()
    _, c = run(tmp_path, "curvature", cfg, "--seed", "1")
    assert sa == (c / "report.json").read_bytes()


def test_console_script(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": {"family": "flat_torus", "n": 2, "resolution": 16}}))
    r = subprocess.run([sys.executable, "-m", "curvfunc.cli", "curvature", "--config", str(cfg),
                        "--out", str(tmp_path / "o")], capture_output=True)
    assert r.returncode == 0
