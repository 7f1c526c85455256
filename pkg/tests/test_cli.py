import json

import numpy as np
import pytest

from pathtomo.cli import main
from pathtomo.correlations import KIND_PAIRS


@pytest.fixture
def plan(tmp_path):
    path = tmp_path / "plan.json"
    path.write_text(json.dumps({"durationSeconds": 36000, "fluxPerPulse": 1e-6, "seed": 7}))
    return path


def simulate(tmp_path, plan, state="ideal", name="recs.csv", *extra):
    out = tmp_path / name
    assert main(["simulate", "--plan", str(plan), "--state", state, "--out", str(out), *extra]) == 0
    return out


def test_simulate_writes_records_and_manifest(tmp_path, plan):
    out = simulate(tmp_path, plan)
    text = out.read_text()
    lines = text.splitlines()
    assert lines[0] == "# manifest=recs.csv.manifest.json"
    assert lines[1].startswith("pairKind,")
    man = json.loads((tmp_path / "recs.csv.manifest.json").read_text())
    assert man["command"] == "simulate" and man["seed"] == 7 and len(man["configHash"]) == 16
    again = simulate(tmp_path, plan, "ideal", "recs.csv")
    assert again.read_text() == text


def test_simulate_seed_override(tmp_path, plan):
    a = simulate(tmp_path, plan, "ideal", "a.csv", "--seed", "1").read_text().splitlines()[1:]
    b = simulate(tmp_path, plan, "ideal", "b.csv", "--seed", "2").read_text().splitlines()[1:]
    assert a != b


def test_bad_config_exit_code(tmp_path, plan):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"homReflectivity": 1.5}))
    assert main(["simulate", "--plan", str(plan), "--config", str(cfg), "--out", str(tmp_path / "x.csv")]) == 2
    assert main(["simulate", "--plan", str(plan), "--state", "nonsense", "--out", str(tmp_path / "x.csv")]) == 2
    assert main(["tomo", "--records", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "t.json")]) == 2


def test_generation_failure_exit_code(tmp_path):
    plan = tmp_path / "starved.json"
    plan.write_text(json.dumps({"fluxPerPulse": 1e-16, "staticSeconds": 1, "durationSeconds": 600}))
    assert main(["simulate", "--plan", str(plan), "--out", str(tmp_path / "x.csv")]) == 3


def test_tomo_modes(tmp_path, plan):
    recs = simulate(tmp_path, plan)
    out = tmp_path / "mle.json"
    assert main(["tomo", "--records", str(recs), "--out", str(out), "--seed", "0"]) == 0
    doc = json.loads(out.read_text())
    assert doc["fidelity"] > 0.97 and doc["trace"] == pytest.approx(1)
    assert min(doc["eigenvalues"]) > -1e-9 and doc["converged"]
    out = tmp_path / "lin.json"
    assert main(["tomo", "--mode", "linear", "--phi1", "0", "--phi2", "0.785",
                 "--records", str(recs), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["fidelity"] > 0.9 and len(doc["phases"]) == 2
    assert main(["tomo", "--mode", "linear", "--phi1", "0.3", "--phi2", "0.3",
                 "--records", str(recs), "--out", str(out)]) == 4
    assert main(["tomo", "--mode", "linear", "--records", str(recs), "--out", str(out)]) == 2


def test_tomo_vis(tmp_path, plan):
    recs = simulate(tmp_path, plan, "hom:0.5:0.9")
    out = tmp_path / "vis.json"
    assert main(["tomo", "--mode", "vis", "--records", str(recs), "--out", str(out), "--seed", "0"]) == 0
    doc = json.loads(out.read_text())
    assert doc["antisymPop"] == pytest.approx(0.05, abs=0.02)
    assert np.asarray(doc["matrix"]["real"]).shape == (4, 4)


def test_scan(tmp_path, plan):
    recs = simulate(tmp_path, plan)
    out = tmp_path / "scan.csv"
    assert main(["scan", "--records", str(recs), "--grid", "3x3", "--jobs", "1", "--seed", "0",
                 "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[1] == "phi1,phi2,fidelity,converged,singular" and len(rows) == 2 + 9
    summary = (tmp_path / "scan_summary.csv").read_text().splitlines()
    assert summary[1] == "separation,mean,std,count"
    empty = tmp_path / "empty.csv"
    assert main(["scan", "--records", str(recs), "--grid", "0x0", "--out", str(empty)]) == 0
    assert len(empty.read_text().splitlines()) == 2
    assert main(["scan", "--records", str(recs), "--grid", "three", "--out", str(empty)]) == 2


def _curves(tmp_path, state, *extra):
    out = tmp_path / f"{state.replace(':', '_')}.csv"
    assert main(["curves", "--state", state, "--out", str(out), *extra]) == 0
    data = np.genfromtxt(out, delimiter=",", names=True, skip_header=1)
    assert data.dtype.names == ("phi", *KIND_PAIRS)
    assert len(data) == 64
    return data


def test_curves(tmp_path):
    ideal = _curves(tmp_path, "ideal", "--raw")
    np.testing.assert_allclose(ideal["R01"], 0, atol=1e-15)
    mixed = _curves(tmp_path, "mixed")
    for kind in ("R33", "R34"):
        np.testing.assert_allclose(mixed[kind], mixed[kind][0], atol=1e-12)
    vis = _curves(tmp_path, "hom:0.5:0.5")
    assert np.all(vis["R01"] > 0)


def test_state_file(tmp_path):
    state = tmp_path / "state.json"
    state.write_text(json.dumps({"symBlock": {"real": np.diag([0.5, 0, 0.4]).tolist(), "imag": np.zeros((3, 3)).tolist()},
                                 "antisymPop": 0.1}))
    _curves(tmp_path, str(state))
