import json
import os

import numpy as np
import pytest

from elastomatch import harness
from elastomatch.cli import main
from elastomatch.config import ExperimentConfig, MaterialConfig, config_from_dict, load_config
from elastomatch.dictionary import DictionaryStore
from elastomatch.errors import ConfigError

SMALL = {
    "panel_budget": 96,
    "voxel_budget": 64,
    "grids": {"surface_points": 5, "sphere_points": 8, "half_width": 2, "refine_factor": 2},
}


def _write_config(path, **extra):
    doc = json.loads(json.dumps(SMALL)) | extra
    path.write_text(json.dumps(doc))
    return str(path)


# ------------------------------------------------------------------- config


def test_defaults():
    cfg = ExperimentConfig()
    assert cfg.z0 == (40.0, 0.0, 0.0)
    assert (cfg.omega1, cfg.omega2) == (1.0, 20.0)
    lam, mu = cfg.material.lame()
    assert lam == pytest.approx(19.322033898305085)
    np.testing.assert_allclose(np.linalg.norm(cfg.unit_polarization()), 1.0)
    assert cfg.material_at(20.0).omega == 20.0


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigError):
        config_from_dict({"panel_budgett": 10})
    with pytest.raises(ConfigError):
        config_from_dict({"grids": {"spacingg": 0.1}})
    with pytest.raises(ConfigError):
        config_from_dict({"grids": 3})


@pytest.mark.parametrize(
    "doc",
    [
        {"kind": "fluid"},
        {"omega1": 30.0},
        {"noise": -0.1},
        {"indicator": "best"},
        {"rng_seed": -1},
        {"polarization": [0, 0, 0]},
        {"z0": [1, 2]},
        {"panel_budget": 10},
        {"voxel_budget": 10**6},
        {"material": {"nu": 0.5}},
        {"material": {"lam": 1.0}},
        {"grids": {"spacing": 0.0}},
    ],
)
def test_invalid_values_are_rejected(doc):
    with pytest.raises(ConfigError):
        config_from_dict(doc)


def test_lame_pair_replaces_engineering_constants():
    cfg = config_from_dict({"material": {"lam": 200.0, "mu": 1.0}})
    assert cfg.material == MaterialConfig(E=None, nu=None, lam=200.0, mu=1.0)
    assert cfg.material_at(1.0).lam == 200.0


def test_json_round_trip(tmp_path):
    cfg = config_from_dict(SMALL | {"noise": 0.05, "rng_seed": 9})
    path = tmp_path / "c.json"
    path.write_text(cfg.to_json())
    assert load_config(path) == cfg
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_overrides():
    cfg = ExperimentConfig().with_overrides(kind="medium", rng_seed=None)
    assert cfg.kind == "medium" and cfg.rng_seed == 0
    with pytest.raises(ConfigError):
        ExperimentConfig().with_overrides(kind="fluid")


def test_auto_indicator_follows_noise_regime():
    assert harness.location_indicator(ExperimentConfig()) == "ip"
    noisy = ExperimentConfig(noise=0.05)
    assert harness.location_indicator(noisy) == "is"
    assert harness.shape_indicator(noisy) == "js"
    assert harness.location_indicator(ExperimentConfig(indicator="is")) == "is"


# ----------------------------------------------------------------- harness


def test_noise_is_exactly_five_percent():
    cfg = config_from_dict(SMALL)
    clean = harness.simulate(cfg, "omega2")
    noisy = harness.simulate(cfg.with_overrides(noise=0.05), "omega2")
    w = clean.near.weights
    norm = lambda v: np.sqrt(np.sum(w * np.sum(np.abs(v) ** 2, axis=1)))
    assert norm(noisy.near.values - clean.near.values) / norm(clean.near.values) == pytest.approx(0.05, abs=1e-10)
    again = harness.simulate(cfg.with_overrides(noise=0.05), "omega2")
    np.testing.assert_array_equal(again.near.values, noisy.near.values)
    other = harness.simulate(cfg.with_overrides(noise=0.05, rng_seed=1), "omega2")
    assert not np.array_equal(other.near.values, noisy.near.values)


def test_zero_contrast_medium_measures_nothing():
    cfg = config_from_dict(SMALL | {"kind": "medium", "medium": {"inside_value": 0.0}})
    ms = harness.simulate(cfg, "omega1")
    assert not ms.near.values.any()
    assert not ms.far.values.any()


def test_measurement_json_round_trip():
    cfg = config_from_dict(SMALL)
    ms = harness.simulate(cfg, "omega1")
    text = harness.measurement_to_json(ms, harness.provenance(cfg))
    back = harness.measurement_from_json(text)
    np.testing.assert_array_equal(back.near.values, ms.near.values)
    np.testing.assert_array_equal(back.far.values, ms.far.values)
    assert harness.measurement_to_json(back, harness.provenance(cfg)) == text


def test_matrix_margin():
    M = np.array([[1.0, 0.9], [0.5, 2.0]])
    diagonal, margin = harness.matrix_margin(M)
    assert diagonal and margin == pytest.approx(0.1)
    assert not harness.matrix_margin(M[::-1])[0]


def test_result_table_formats():
    table = harness.ResultTable("t", ["a", "b"], [[1, 0.5]], {"config_hash": "x"}, [{"name": "c", "value": 0.1, "passed": True}])
    assert table.to_csv() == "a,b\n1,0.5\n"
    doc = json.loads(table.to_json())
    assert doc["passed"] and doc["provenance"]["config_hash"] == "x"


# --------------------------------------------------------------------- cli


def test_cli_rejects_unknown_keys(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"not_a_key": 1}))
    assert main(["forward", "--config", str(path), "--out", str(tmp_path)]) == 2
    assert "not_a_key" in capsys.readouterr().err


def test_cli_forward_is_deterministic(tmp_path):
    cfg = _write_config(tmp_path / "c.json", noise=0.05)
    for name in ("a", "b"):
        assert main(["forward", "--config", cfg, "--seed", "3", "--tag", "omega2", "--out", str(tmp_path / name)]) == 0
    a = (tmp_path / "a" / "measurement_omega2.json").read_bytes()
    assert a == (tmp_path / "b" / "measurement_omega2.json").read_bytes()
    doc = json.loads(a)
    assert doc["provenance"]["noise"] == 0.05 and "config_hash" in doc["provenance"]


def test_cli_dict_build_caches_and_separates_kinds(tmp_path, capsys):
    cfg = _write_config(tmp_path / "c.json")
    out = str(tmp_path / "out")
    assert main(["dict", "build", "--config", cfg, "--out", out]) == 0
    first = capsys.readouterr().out
    assert "built 6 entries" in first
    manifest = json.loads((tmp_path / "out" / "dictionary" / "rigid" / "manifest.json").read_text())
    assert len(manifest["entries"]) == 6 and manifest["shape_ids"] == [1, 2, 3, 4, 5, 6]
    stamp = os.path.getmtime(tmp_path / "out" / "dictionary" / "rigid" / "manifest.json")
    assert main(["dict", "build", "--config", cfg, "--out", out]) == 0
    assert "up to date" in capsys.readouterr().out
    assert os.path.getmtime(tmp_path / "out" / "dictionary" / "rigid" / "manifest.json") == stamp
    assert main(["dict", "build", "--config", cfg, "--out", out, "--kind", "medium"]) == 0
    rigid = DictionaryStore.load(tmp_path / "out" / "dictionary" / "rigid")
    medium = DictionaryStore.load(tmp_path / "out" / "dictionary" / "medium")
    assert rigid.kind == "rigid" and medium.kind == "medium"
    assert rigid.hash != medium.hash
    assert not set(os.listdir(tmp_path / "out" / "dictionary" / "rigid")) & set(
        f for f in os.listdir(tmp_path / "out" / "dictionary" / "medium") if f.endswith(".bin")
    )


def test_cli_locate_and_identify(tmp_path, capsys):
    cfg = _write_config(tmp_path / "c.json", noise=0.05, true_shape=2)
    out = str(tmp_path)
    assert main(["forward", "--config", cfg, "--tag", "omega1", "--out", out]) == 0
    assert main(["forward", "--config", cfg, "--tag", "omega2", "--out", out]) == 0
    m1 = os.path.join(out, "measurement_omega1.json")
    m2 = os.path.join(out, "measurement_omega2.json")
    assert main(["locate", "--config", cfg, "--measurement", m1, "--out", out]) == 0
    loc = json.loads((tmp_path / "location.json").read_text())
    assert loc["indicator"] == "is"
    assert np.linalg.norm(np.array(loc["z"]) - [40.0, 0.0, 0.0]) <= 0.5
    header = (tmp_path / "indicator_coarse.csv").read_text().splitlines()[0]
    assert header == "z_x,z_y,z_z,value"
    assert main(["identify", "--config", cfg, "--measurement", m2, "--location", str(tmp_path / "location.json"), "--out", out]) == 0
    assert "identified shape" in capsys.readouterr().out
    row = (tmp_path / "identification.csv").read_text().splitlines()
    assert row[0] == "indicator,D1,D2,D3,D4,D5,D6"
    values = [float(v) for v in row[1].split(",")[1:]]
    assert max(values) == 1.0
    doc = json.loads((tmp_path / "identification.json").read_text())
    assert "dictionary_hash" in doc["provenance"]
    assert main(["identify", "--config", cfg, "--measurement", m2, "--z", "40,0", "--out", out]) == 2


def test_cli_missing_measurement(tmp_path):
    assert main(["locate", "--measurement", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2
