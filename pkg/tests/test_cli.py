import json

import numpy as np
import pytest

from wsmorse import __version__
from wsmorse.cli import main
from wsmorse.errors import ValidationError
from wsmorse.io import read_csv, write_csv
from wsmorse.scenario import BUILTINS, load_scenario, parse_scenario


def _write(tmp_path, text, name="s.scn"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


def test_parse_comments_and_defaults():
    sc = parse_scenario("# a comment\n\nscenario.name = x\njacobi.lambda = 2.5\n")
    assert sc.name == "x"
    assert sc["jacobi.lambda"] == 2.5
    assert sc.transverse_dim == 2


@pytest.mark.parametrize(
    "text",
    [
        "grid.Tt = 1\n",
        "grid.T = 1\ngrid.T = 2\n",
        "grid.T = abc\n",
        "just words\n",
        "grid.T = -1\n",
        "manifold.dim = 2\n",
        "manifold.kind = custom\n",
        "jacobi.dt = 0\n",
    ],
)
def test_parse_rejects(text):
    with pytest.raises(ValidationError):
        parse_scenario(text)


def test_scenario_hash_tracks_content():
    a = parse_scenario("grid.T = 1\n")
    b = parse_scenario("grid.T = 1.0\n")
    c = parse_scenario("grid.T = 2\n")
    assert a.hash == b.hash != c.hash
    assert a.with_overrides(seed=5).hash != a.hash


def test_builtins_load():
    for name in BUILTINS:
        assert load_scenario(name).name == name


def test_csv_roundtrip_is_exact(tmp_path):
    rows = np.random.default_rng(0).normal(size=(5, 3)) * 1e-7
    write_csv(tmp_path / "x.csv", ["tau", "sigma", "v"], rows, {"scenario_hash": "abc"})
    meta, header, back = read_csv(tmp_path / "x.csv")
    assert header == ["tau", "sigma", "v"]
    assert meta["scenario_hash"] == "abc" and meta["wsmorse_version"] == __version__
    assert np.array_equal(rows, back)


def test_flat_ring_jacobi(tmp_path):
    assert main(["jacobi", "--scenario", "flat_ring", "--out", str(tmp_path)]) == 0
    meta, header, rows = read_csv(tmp_path / "jacobi.csv")
    assert header == ["tau", "detA", "wronskian_norm"]
    assert "scenario_hash" in meta
    assert np.max(np.abs(rows[:, 1] - rows[:, 0] ** 2)) < 1e-8
    rec = json.loads((tmp_path / "jacobi.json").read_text())
    assert rec["conjugate_strings"] == []
    assert rec["scenario_hash"] == meta["scenario_hash"]


def test_flat_ring_simulate(tmp_path):
    scn = _write(tmp_path, BUILTINS["flat_ring"] + "output.every = 128\n")
    assert main(["simulate", "--scenario", scn, "--out", str(tmp_path)]) == 0
    _, header, rows = read_csv(tmp_path / "simulate.csv")
    assert header == ["tau", "gauge_res1", "gauge_res2", "geodesic_res", "energy"]
    assert rows.shape[0] == 257
    _, gh, grows = read_csv(tmp_path / "grid_000128.csv")
    assert gh[:2] == ["tau", "sigma"] and grows.shape == (128, 6)


def test_sphere_sweep(tmp_path):
    assert main(["sweep", "--scenario", "sphere_sweep", "--out", str(tmp_path)]) == 0
    recs = json.loads((tmp_path / "sweep.json").read_text())["records"]
    assert len(recs) == 3
    for rec in recs:
        first = rec["conjugate_strings"][0]
        assert abs(first["tau_star"] - np.pi / np.sqrt(rec["lambda"])) < 1e-6
        assert first["multiplicity"] == 2


def test_equator_index_has_certificate(tmp_path):
    assert main(["index", "--scenario", "equator_tube", "--out", str(tmp_path), "--seed", "3"]) == 0
    rec = json.loads((tmp_path / "index.json").read_text())
    assert rec["lambda"] == pytest.approx(-1.0, abs=1e-8)
    assert rec["certificate"] == pytest.approx(rec["I_VV"], rel=1e-5)
    assert rec["negative_mode"] is None


def test_index_negative_mode_and_determinism(tmp_path):
    scn = _write(tmp_path, "scenario.name = nm\njacobi.lambda = 1\njacobi.T = 4.7\nindex.trace = true\n")
    for d in ("a", "b"):
        assert main(["index", "--scenario", scn, "--out", str(tmp_path / d), "--eps", "0.3,0.1,0.03,0.01"]) == 0
    a = (tmp_path / "a" / "index.json").read_bytes()
    assert a == (tmp_path / "b" / "index.json").read_bytes()
    assert (tmp_path / "a" / "index_trace.csv").read_bytes() == (tmp_path / "b" / "index_trace.csv").read_bytes()
    nm = json.loads(a)["negative_mode"]
    assert nm["I_kJ"] == pytest.approx(-2 * np.pi * nm["c"], rel=1e-4)
    assert nm["I_total_limit"] == pytest.approx(-4 * np.pi * nm["c"], rel=1e-4)


def test_cfl_violation_exit_2(tmp_path, capsys):
    scn = _write(tmp_path, "grid.Nsigma = 64\nevolution.dt = 0.2\n")
    assert main(["simulate", "--scenario", scn, "--out", str(tmp_path)]) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert "CFL" in err["message"] and err["exit_code"] == 2
    assert json.loads((tmp_path / "error.json").read_text())["error"] == "CFLError"


def test_collapse_exit_3(tmp_path):
    scn = _write(tmp_path, "grid.T = 2.0\ngrid.Nsigma = 32\n")
    assert main(["simulate", "--scenario", scn, "--out", str(tmp_path)]) == 3
    assert json.loads((tmp_path / "error.json").read_text())["error"] == "DegenerateTubeError"


def test_bad_inputs_exit_2(tmp_path, monkeypatch):
    assert main(["jacobi", "--scenario", str(tmp_path / "missing.scn")]) == 2
    assert main(["jacobi", "--scenario", "sphere_sweep", "--out", str(tmp_path)]) == 2
    assert main(["acceptance", "nope"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["jacobi", "--scenario", "flat_ring", "--dt", "-1"])
    assert exc.value.code == 2
    monkeypatch.setenv("WSMORSE_THREADS", "zero")
    assert main(["sweep", "--scenario", "sphere_sweep", "--out", str(tmp_path)]) == 2


def test_thread_cap_respected(tmp_path, monkeypatch):
    monkeypatch.setenv("WSMORSE_THREADS", "1")
    assert main(["sweep", "--scenario", "sphere_sweep", "--out", str(tmp_path / "one")]) == 0
    monkeypatch.setenv("WSMORSE_THREADS", "3")
    assert main(["sweep", "--scenario", "sphere_sweep", "--out", str(tmp_path / "three")]) == 0
    assert (tmp_path / "one" / "sweep.json").read_bytes() == (tmp_path / "three" / "sweep.json").read_bytes()


def test_acceptance_json_is_reproducible(tmp_path):
    for d in ("a", "b"):
        code = main(["acceptance", "core", "--seed", "7", "--out", str(tmp_path / d)])
        assert code == 0
    a = (tmp_path / "a" / "acceptance.json").read_bytes()
    assert a == (tmp_path / "b" / "acceptance.json").read_bytes()
    assert len(json.loads(a)["criteria"]) == 10
