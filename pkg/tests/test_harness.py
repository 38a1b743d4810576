import csv
import io
import json
import math

import numpy as np
import pytest

from prnu_forge.deident import anonymize
from prnu_forge.harness import (
    BASELINE_GRID,
    AnonymizationReport,
    SpoofReport,
    SyntheticConfig,
    SyntheticSensor,
    all_pairs,
    eta_sweep,
    grid_search_baseline,
    make_scene,
    make_synthetic_dataset,
    psnr,
    run_anonymization_experiment,
    run_spoof_experiment,
    simulate_capture,
    utility_proxy,
    write_report,
    write_synthetic_dataset,
)
from prnu_forge.imgcore import ShapeError, load_manifest

SMALL = SyntheticConfig(n_sensors=3, n_train=10, n_test=4, shape=(128, 128), seed=7)


@pytest.fixture(scope="module")
def data():
    return make_synthetic_dataset(SMALL)[1]


class TestSimulateCapture:
    def test_no_sensor_limit(self, rng):
        scene = make_scene((32, 32), 1)
        sensor = SyntheticSensor.random("s", (32, 32), strength=0.0, read_noise_std=0.0)
        np.testing.assert_array_equal(simulate_capture(sensor, scene, 0), scene)

    def test_zero_scene_is_clamped_noise(self):
        sensor = SyntheticSensor.random("s", (32, 32), read_noise_std=3.0)
        out = simulate_capture(sensor, np.zeros((32, 32)), 9)
        noise = 3.0 * np.random.default_rng(9).standard_normal((32, 32))
        np.testing.assert_allclose(out, np.clip(noise, 0, 255))

    def test_deterministic(self):
        sensor = SyntheticSensor.random("s", (32, 32))
        scene = make_scene((32, 32), 2)
        np.testing.assert_array_equal(simulate_capture(sensor, scene, 4),
                                      simulate_capture(sensor, scene, 4))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            simulate_capture(SyntheticSensor.random("s", (8, 8)), np.zeros((8, 9)), 0)


def test_fingerprint_statistics():
    s = SyntheticSensor.random("s", (64, 64), seed=5, fingerprint_std=2.5)
    assert abs(s.fingerprint.mean()) < 1e-6
    assert s.fingerprint.std() == pytest.approx(2.5, rel=0.05)
    with pytest.raises(ValueError):
        SyntheticSensor("s", np.zeros((2, 2)), strength=-1.0)


def test_scene_range_and_determinism():
    a = make_scene((64, 48), 3)
    assert a.shape == (64, 48) and a.min() >= 0 and a.max() <= 255
    np.testing.assert_array_equal(a, make_scene((64, 48), 3))
    assert not np.array_equal(a, make_scene((64, 48), 4))


def test_dataset_determinism():
    cfg = SyntheticConfig(n_sensors=2, n_train=2, n_test=1, shape=(32, 32), seed=1)
    a, b = make_synthetic_dataset(cfg)[1], make_synthetic_dataset(cfg)[1]
    for sid in a:
        np.testing.assert_array_equal(a[sid].train[1], b[sid].train[1])
    assert not np.array_equal(a["S0"].train[0], a["S0"].train[1])


class TestUtility:
    def test_identical(self, rng):
        x = rng.uniform(0, 255, (32, 32))
        u = utility_proxy(x, x)
        assert u["psnr"] == math.inf and u["low_freq_ncc"] == pytest.approx(1.0)

    def test_anonymized(self, rng):
        x = make_scene((64, 64), 8)
        assert utility_proxy(x, anonymize(x, 0.9))["low_freq_ncc"] == pytest.approx(1.0, abs=1e-6)

    def test_zeros(self, rng):
        assert utility_proxy(rng.uniform(0, 255, (32, 32)), np.zeros((32, 32)))["low_freq_ncc"] == 0

    def test_psnr_value(self):
        assert psnr(np.zeros((4, 4)), np.full((4, 4), 255.0)) == pytest.approx(0.0)
        assert psnr(np.zeros((4, 4)), np.full((4, 4), 2.55)) == pytest.approx(40.0)


class TestAnonymizationReport:
    def test_identities(self, data):
        rep = run_anonymization_experiment(data, "enhanced", 0.9)
        assert set(rep.per_sensor) == {"S0", "S1", "S2"}
        for row in rep.per_sensor.values():
            assert row["change"] == row["original_acc"] - row["after_acc"]
            assert row["change_saved"] == row["original_acc"] - row["after_acc_saved"]
        assert rep.average_change == np.mean([r["change"] for r in rep.per_sensor.values()])

    def test_deterministic(self, data):
        a = run_anonymization_experiment(data, "phase", 0.9).to_json()
        b = run_anonymization_experiment(data, "phase", 0.9).to_json()
        assert a == b

    def test_single_sensor_eta_one(self, data):
        rep = run_anonymization_experiment({"S0": data["S0"]}, "mle", 1.0)
        row = rep.per_sensor["S0"]
        assert row["original_acc"] == row["after_acc"] == 1.0
        assert row["change"] == 0.0

    def test_serialization(self, data, tmp_path):
        rep = run_anonymization_experiment(data, "enhanced", 0.9)
        write_report(rep, tmp_path / "r.json", tmp_path / "r.csv")
        doc = json.loads((tmp_path / "r.json").read_text())
        assert set(doc) == {"scheme", "eta", "per_sensor", "average_change", "average_change_saved"}
        assert doc["scheme"] == "enhanced"
        rows = list(csv.DictReader(io.StringIO((tmp_path / "r.csv").read_text())))
        assert [r["sensor_id"] for r in rows] == ["S0", "S1", "S2"]
        assert float(rows[0]["change"]) == doc["per_sensor"]["S0"]["change"]


class TestSpoofReport:
    def test_pairs_and_ssr(self, data):
        rep = run_spoof_experiment(data, "enhanced", 0.7)
        assert list(rep.per_pair) == all_pairs(["S0", "S1", "S2"])
        for v in rep.per_pair.values():
            assert 0.0 <= v["ssr"] <= 1.0 and v["n_images"] == 4
        assert rep.average_ssr == pytest.approx(np.mean([v["ssr"] for v in rep.per_pair.values()]))

    def test_self_pair_matches_original_accuracy(self, data):
        rep = run_spoof_experiment(data, "enhanced", 0.7, pairs=[("S1", "S1")])
        orig = run_anonymization_experiment(data, "enhanced").per_sensor["S1"]["original_acc"]
        assert rep.per_pair[("S1", "S1")]["ssr"] == pytest.approx(orig, abs=0.25)

    def test_unknown_sensor(self, data):
        with pytest.raises(KeyError):
            run_spoof_experiment(data, "enhanced", 0.7, pairs=[("S0", "S9")])

    def test_json_csv(self, data):
        rep = run_spoof_experiment(data, "mle", 0.7, pairs=[("S0", "S2")], n_candidates=2)
        doc = rep.to_json()
        assert doc["per_pair"][0]["source"] == "S0" and doc["per_pair"][0]["target"] == "S2"
        json.dumps(doc)
        assert rep.to_csv().splitlines()[0] == "source,target,ssr,ssr_saved,n_images"

    def test_report_roundtrip_types(self):
        rep = SpoofReport("phase", 0.7, {("a", "b"): {"ssr": 1.0, "ssr_saved": 1.0, "n_images": 2}})
        assert rep.to_json()["per_pair"] == [
            {"source": "a", "target": "b", "ssr": 1.0, "ssr_saved": 1.0, "n_images": 2}]
        assert AnonymizationReport("mle", 0.9).to_csv().startswith("sensor_id,")


def test_eta_sweep(data):
    rows = eta_sweep(data, "enhanced", etas=(0.5, 1.0))
    assert [r["eta"] for r in rows] == [0.5, 1.0]
    assert rows[1]["change"] == rows[1]["original_acc"] - rows[1]["after_acc"]
    assert rows[0]["median_psnr"] < rows[1]["median_psnr"]


def test_grid_search_smoke(data):
    assert BASELINE_GRID[0] == 0.25 and BASELINE_GRID[-1] == 2.0 and len(BASELINE_GRID) == 8
    out = grid_search_baseline(data, "enhanced", "remove", grid=(0.0, 1.0))
    assert out["best"]["gamma"] in (0.0, 1.0) and len(out["grid"]) == 2
    out = grid_search_baseline(data, "enhanced", "substitute", grid=(0.5, 1.0), pairs=[("S0", "S1")])
    assert len(out["grid"]) == 4
    with pytest.raises(ValueError):
        grid_search_baseline(data, "enhanced", "erase")


def test_written_dataset_loads(tmp_path):
    cfg = SyntheticConfig(n_sensors=2, n_train=2, n_test=1, shape=(32, 32))
    m = load_manifest(write_synthetic_dataset(cfg, tmp_path))
    assert m.sensor_ids == ["S0", "S1"] and len(m["S1"].training_paths) == 2
    assert m["S0"].native_size == (32, 32)
