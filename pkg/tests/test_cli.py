import csv
import io
import json

import numpy as np
import pytest

from ctcsim import cli


def test_grid_parsing():
    assert np.allclose(cli.parse_grid("0:1:0.25"), [0, 0.25, 0.5, 0.75, 1])
    assert np.allclose(cli.parse_grid("0.05:0.95:0.05")[-1], 0.95)
    for bad in ("1:0:0.1", "0:1:0", "0:1", "a:b:c"):
        with pytest.raises(cli.InvalidConfig):
            cli.parse_grid(bad)


def test_registry_matches_defaults():
    assert set(cli.REGISTRY) == set(cli.load_defaults())


def test_config_coercion_and_errors():
    p = cli.ScenarioConfig("spod", {"N": "100", "chi": "0.02"}).resolved()
    assert p["N"] == 100 and p["chi"] == 0.02
    with pytest.raises(cli.InvalidConfig):
        cli.ScenarioConfig("spod", {"N": "1.5"}).resolved()
    with pytest.raises(cli.InvalidConfig):
        cli.ScenarioConfig("spod", {"bogus": "1"}).resolved()
    with pytest.raises(cli.UnknownScenario):
        cli.run(cli.ScenarioConfig("nope"))


def test_run_writes_artifacts(tmp_path):
    res = cli.run(cli.ScenarioConfig("gravity", out=str(tmp_path)))
    body = json.loads((tmp_path / "gravity.json").read_text())
    assert body["scalars"]["delta_t"] == pytest.approx(res.scalars["delta_t"])
    assert body["metadata"]["seed"] == 0


def test_run_is_reproducible():
    a = cli.run(cli.ScenarioConfig("spod", {"trials": "5000"}, seed=4))
    b = cli.run(cli.ScenarioConfig("spod", {"trials": "5000"}, seed=4))
    assert a.to_json() == b.to_json()


def test_table_output(tmp_path):
    cli.run(cli.ScenarioConfig("eventop-g2", {"eta_grid": "0.2:0.8:0.3"}, out=str(tmp_path)))
    rows = list(csv.DictReader((tmp_path / "eventop-g2_g2.csv").open()))
    assert len(rows) == 3
    for r in rows:
        assert float(r["g2"]) == pytest.approx(float(r["g2_deutsch"]), abs=1e-9)


def test_sweep_merged_csv(tmp_path):
    _, merged = cli.sweep(cli.ScenarioConfig("ctc-bs-photon", out=str(tmp_path)), "eta=0:1:0.5")
    rows = list(csv.DictReader(io.StringIO(merged)))
    assert [float(r["eta"]) for r in rows] == [0.0, 0.5, 1.0]
    assert float(rows[1]["g2"]) == pytest.approx(4 / 3)
    assert (tmp_path / "ctc-bs-photon_sweep_eta.csv").exists()
    with pytest.raises(cli.InvalidConfig):
        cli.sweep(cli.ScenarioConfig("gisin"), "fixture=0:1:1")


def test_csv_round_trips_floats():
    x = 0.1 + 0.2
    text = cli.to_csv(["x"], [[x]])
    assert float(text.splitlines()[1]) == x


def test_main_exit_codes(capsys):
    assert cli.main(["list"]) == 0
    assert "grandfather" in capsys.readouterr().out
    assert cli.main(["run", "nope"]) == 2
    assert cli.main(["run", "gravity", "--set", "h"]) == 2
    assert cli.main(["run", "grandfather"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["scalars"]["td_to_mixed"] < 1e-8


@pytest.mark.parametrize("name", sorted(cli.REGISTRY))
def test_every_scenario_runs(name):
    overrides = {"spod": {"trials": "2000"}, "gisin": {"trials": "2000"},
                 "eventop-wigner": {"resolution": "11"}}.get(name, {})
    res = cli.run(cli.ScenarioConfig(name, overrides))
    assert res.scalars
    json.loads(res.to_json())


def test_config_file_then_flags(tmp_path, capsys):
    cfg = tmp_path / "g.ini"
    cfg.write_text("[gravity]\nh = 1000\nsigma_t = 1e-13\n")
    assert cli.main(["run", "gravity", "--config", str(cfg), "--set", "h=2000"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["params"] == {"h": 2000.0, "sigma_t": 1e-13}
    assert cli.main(["run", "gravity", "--config", str(tmp_path / "missing.ini")]) == 2


def test_sweep_kappa_on_wigner():
    res, merged = cli.sweep(cli.ScenarioConfig("eventop-wigner", {"resolution": "5"}), "kappa=0.5:2:0.5")
    assert len(res) == 4 and all("wigner" in r.tables for r in res)
    assert len(merged.strip().splitlines()) == 5
