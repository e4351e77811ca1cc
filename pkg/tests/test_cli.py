import json
from pathlib import Path

import pytest

from chamber.cli import CONFIG_SCHEMA, main

A2 = '{"kind": "dunkl", "family": "A", "rank": 2, "k": [%s]}'
ONE_D = '{"kind": "custom", "faces": [{"normal": [1], "potential": {"kind": "log", "gamma": %s}}], "initial_point": [0.5]}'


def test_classify_strong_dunkl(capsys):
    assert main(["classify", "--model", A2 % 0.7]) == 0
    rows = capsys.readouterr().out.strip().splitlines()[1:]
    assert len(rows) == 3 and all(",Strong," in r for r in rows)


def test_classify_middle_dunkl_notes_non_simple(capsys):
    assert main(["classify", "--model", A2 % 0.3, "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert [r["class"] for r in doc["faces"]] == ["Middle"] * 3
    assert doc["faces"][1]["note"] and not doc["faces"][0]["note"]
    assert doc["format_version"] == 1


def test_classify_zero_face_weak(capsys):
    spec = '{"kind": "custom", "faces": [{"normal": [1]}], "initial_point": [1]}'
    assert main(["classify", "--model", spec]) == 0
    assert ",Weak," in capsys.readouterr().out


def test_schema_errors_exit_1(tmp_path, capsys):
    assert main(["classify", "--model", '{"kind": "bogus"}']) == 1
    assert main(["classify"]) == 1
    bad = tmp_path / "c.json"
    bad.write_text('{"model": {"kind": "wishart", "n": 2, "delta": 3}, "sim": {"dt": -1}}')
    assert main(["simulate", "--config", str(bad), "--seed", "1"]) == 1
    assert main(["nonsense"]) == 1


def test_seed_must_be_explicit(tmp_path):
    assert main(["simulate", "--model", ONE_D % 0.3, "--out", str(tmp_path)]) == 1


def test_simulate_is_reproducible(tmp_path):
    for d in ("a", "b"):
        assert main(["simulate", "--model", A2 % 0.3, "--seed", "42", "--horizon", "0.05",
                     "--dt", "1e-3", "--out", str(tmp_path / d)]) == 0
    for f in ("trajectory.csv", "summary.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_simulate_horizon_zero(tmp_path):
    assert main(["simulate", "--model", ONE_D % 0.3, "--seed", "1", "--horizon", "0", "--out", str(tmp_path)]) == 0
    lines = [l for l in (tmp_path / "trajectory.csv").read_text().splitlines() if not l.startswith("#")]
    assert lines[0] == "t,x_1,gap_1,L_1" and len(lines) == 2


def test_simulate_escape(tmp_path):
    assert main(["simulate", "--model", ONE_D % 1.0, "--seed", "1", "--horizon", "5", "--dt", "1e-3",
                 "--escape-radius", "0.6", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "summary.json").read_text())["termination"] == "escape"


def test_ensemble_outputs_and_verdict(tmp_path, capsys):
    assert main(["ensemble", "--model", ONE_D % 0.9, "--seed", "3", "--n", "20", "--horizon", "0.2",
                 "--dt", "1e-3", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "CONSISTENT" in out and "INCONSISTENT" not in out
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["format_version"] == 1 and rep["config"]["sim"]["seed"] == 3
    for f in ("hit_curve.csv", "min_gap_hist.csv"):
        assert (tmp_path / f).read_text().startswith("# format_version=1")


def test_ensemble_n_zero_is_usage_error(tmp_path):
    assert main(["ensemble", "--model", ONE_D % 0.9, "--seed", "3", "--n", "0", "--out", str(tmp_path)]) == 1


def test_validate_roots(tmp_path, capsys):
    assert main(["validate-roots", "--family", "B", "--rank", "3"]) == 0
    assert "|R+|=9" in capsys.readouterr().out
    assert main(["validate-roots", "--family", "I2", "--rank", "4", "--k", "0.3", "--k", "0.6",
                 "--format", "json"]) == 0
    assert json.loads(capsys.readouterr().out)["n_orbits"] == 2
    bad = tmp_path / "r.json"
    bad.write_text(json.dumps({"roots": [[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1]], "witness": [1, 2],
                               "k": [1, 1, 1, 1, 1]}))
    assert main(["validate-roots", "--roots-file", str(bad)]) == 3


def test_indeterminate_exit_code(monkeypatch, capsys):
    import numpy as np

    from chamber import cli, models
    from chamber.potentials import CallablePotential

    near = CallablePotential(lambda u: -0.505 * np.log(u), lambda u: -0.505 / u)
    real = models.build_model

    def fake(spec):
        m = real(spec)
        return models.PolyhedralModel(m.domain, {k: near for k in m.potentials}, m.initial_point, m.name)

    monkeypatch.setattr(cli, "build_model", fake)
    assert main(["classify", "--model", ONE_D % 0.5]) == 2


def test_list_models(capsys):
    assert main(["list-models"]) == 0
    assert "dunkl" in capsys.readouterr().out
    assert main(["list-models", "--schema"]) == 0
    assert json.loads(capsys.readouterr().out) == CONFIG_SCHEMA


def test_simulation_failure_exit_code(monkeypatch, tmp_path):
    from chamber import cli
    from chamber.integrator import SimulationError

    def boom(*a, **k):
        raise SimulationError("forced", 1, 0, 0)

    monkeypatch.setattr(cli, "simulate", boom)
    assert main(["simulate", "--model", ONE_D % 0.3, "--seed", "1", "--out", str(tmp_path)]) == 4


@pytest.mark.parametrize("path", sorted((Path(__file__).parents[1] / "configs").glob("*.json")), ids=lambda p: p.name)
def test_shipped_configs_classify(path):
    assert main(["classify", "--config", str(path)]) == 0
