import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prnu_forge.deident import (
    DCTAnonymizer,
    DCTSpoofer,
    SpoofConfig,
    anonymize,
    average_high_field,
    baseline_inject,
    baseline_remove,
    baseline_substitute,
    spoof,
    spoof_from_config,
    target_high_field,
)
from prnu_forge.denoise import extract_residual
from prnu_forge.harness import SyntheticSensor, make_scene, simulate_capture
from prnu_forge.identify import ncc
from prnu_forge.imgcore import ShapeError, save_image
from prnu_forge.prnu import ReferencePattern, Scheme, estimate_reference
from prnu_forge.transform import ParameterError, compute_alpha, dct2, high_mask


def low_support(shape, eta):
    return ~high_mask(shape, compute_alpha(*shape, eta))


class TestAnonymize:
    def test_eta_zero_blanks(self, rng):
        assert np.max(np.abs(anonymize(rng.uniform(0, 255, (12, 10)), 0.0))) < 1e-10

    def test_eta_one_zeroes_triangle(self, rng):
        n = 16
        out = dct2(anonymize(rng.uniform(0, 255, (n, n)), 1.0))
        assert np.sum(np.abs(out) < 1e-9) == n * (n - 1) // 2

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(4, 40), st.integers(4, 40),
           st.sampled_from([0.3, 0.5, 0.7, 0.9, 1.0]))
    def test_low_band_preserved(self, seed, h, w, eta):
        img = np.random.default_rng(seed).uniform(0, 255, (h, w))
        low = low_support((h, w), eta)
        diff = dct2(anonymize(img, eta)) - dct2(img)
        assert np.max(np.abs(diff[low]), initial=0.0) < 1e-8

    def test_energy_and_monotonicity(self, rng):
        img = rng.uniform(0, 255, (32, 24))
        energies = [np.sum(anonymize(img, e) ** 2) for e in (0.0, 0.3, 0.5, 0.7, 0.9, 1.0)]
        assert energies[-1] <= np.sum(img**2) + 1e-6
        assert all(a <= b + 1e-6 for a, b in zip(energies, energies[1:]))

    def test_smooth_image_energy_equal(self):
        # only DC is populated, so nothing is removed
        img = np.full((16, 16), 90.0)
        np.testing.assert_allclose(anonymize(img, 0.5), img, atol=1e-10)

    def test_not_clamped(self):
        img = np.zeros((16, 16))
        img[:, 8:] = 255
        out = anonymize(img, 0.3)  # truncating a step edge rings past both ends
        assert out.min() < 0 or out.max() > 255

    def test_bad_eta(self):
        with pytest.raises(ParameterError):
            anonymize(np.zeros((4, 4)), 1.5)


class TestTargetField:
    def test_constant_candidate(self):
        assert np.max(np.abs(target_high_field([np.full((16, 16), 40.0)], 0.7, 20, 20))) < 1e-10

    def test_opposite_candidates(self, rng):
        x = rng.normal(size=(16, 16))
        assert np.max(np.abs(target_high_field([x, -x], 0.7, 24, 24))) < 1e-10

    def test_identical_candidates(self, rng):
        x = rng.normal(size=(16, 16))
        np.testing.assert_allclose(target_high_field([x] * 3, 0.7, 10, 12),
                                   target_high_field([x], 0.7, 10, 12), atol=1e-12)

    def test_mixed_sizes(self):
        with pytest.raises(ShapeError):
            average_high_field([np.zeros((8, 8)), np.zeros((8, 9))])

    def test_empty(self):
        with pytest.raises(ParameterError):
            average_high_field([])


class TestSpoof:
    def test_self_spoof_identity(self, rng):
        img = rng.uniform(0, 255, (40, 30))
        assert np.max(np.abs(spoof(img, [img], 0.7) - img)) < 1e-6

    def test_low_band_preserved_same_size(self, rng):
        img = rng.uniform(0, 255, (40, 30))
        cands = [rng.uniform(0, 255, (40, 30)) for _ in range(3)]
        low = low_support(img.shape, 0.7)
        diff = dct2(spoof(img, cands, 0.7)) - dct2(img)
        assert np.max(np.abs(diff[low])) < 1e-6

    def test_resized_field_is_additive(self, rng):
        img = rng.uniform(0, 255, (40, 30))
        cands = [rng.uniform(0, 255, (50, 64)) for _ in range(2)]
        field = target_high_field(cands, 0.7, 40, 30)
        low = low_support(img.shape, 0.7)
        diff = dct2(spoof(img, cands, 0.7)) - dct2(img)
        np.testing.assert_allclose(diff[low], dct2(field)[low], atol=1e-8)

    def test_config(self, tmp_path, rng):
        paths = []
        for i in range(2):
            save_image(rng.uniform(0, 255, (20, 20)), tmp_path / f"c{i}.png")
            paths.append(str(tmp_path / f"c{i}.png"))
        cfg = SpoofConfig(0.7, tuple(paths))
        img = rng.uniform(0, 255, (20, 20))
        np.testing.assert_allclose(spoof_from_config(img, cfg), spoof(img, cfg.load_candidates()))
        with pytest.raises(ParameterError):
            SpoofConfig(0.7, ())
        with pytest.raises(ParameterError):
            SpoofConfig(-0.1, tuple(paths))


class TestBaselines:
    def test_remove(self, rng):
        img = rng.uniform(0, 255, (5, 5))
        k = rng.normal(size=(5, 5))
        np.testing.assert_array_equal(baseline_remove(img, k, 0.0), img)
        np.testing.assert_array_equal(baseline_remove(img, np.zeros((5, 5)), 1.0), img)
        np.testing.assert_allclose(baseline_remove(np.full((3, 3), 10.0), np.ones((3, 3)), 2.0), 8.0)

    def test_inject(self, rng):
        k = rng.normal(size=(4, 4))
        img = rng.uniform(0, 255, (4, 4))
        np.testing.assert_array_equal(baseline_inject(img, k, 0.0), img)
        assert not np.any(baseline_inject(np.zeros((4, 4)), k, 1.0))
        np.testing.assert_allclose(
            baseline_inject(np.full((3, 3), 100.0), np.full((3, 3), 0.01), 1.0), 101.0)

    def test_substitute(self, rng):
        img = rng.uniform(0, 255, (4, 4))
        ks = rng.normal(size=(4, 4))
        np.testing.assert_array_equal(baseline_substitute(img, ks, ks, 0.0, 0.0), img)
        np.testing.assert_allclose(baseline_substitute(img, ks, ks, 0.7, 0.7), img, atol=1e-12)
        np.testing.assert_allclose(baseline_substitute(
            np.full((3, 3), 10.0), np.ones((3, 3)), np.full((3, 3), 2.0), 1.0, 1.0), 11.0)

    def test_reference_pattern_cropped(self, rng):
        r = ReferencePattern("a", Scheme.MLE, np.ones((6, 8)), 1)
        np.testing.assert_allclose(baseline_remove(np.full((4, 4), 5.0), r, 1.0), 4.0)
        with pytest.raises(ShapeError):
            baseline_remove(np.zeros((7, 7)), r, 1.0)


def test_estimators(rng):
    X = [rng.uniform(0, 255, (24, 24)) for _ in range(3)]
    anon = DCTAnonymizer(eta=0.5).fit_transform(X)
    np.testing.assert_allclose(anon[1], anonymize(X[1], 0.5))
    cands = [rng.uniform(0, 255, (30, 30)) for _ in range(2)]
    sp = DCTSpoofer().fit(cands)
    assert sp.n_candidates_ == 2
    np.testing.assert_allclose(sp.transform(X)[0], spoof(X[0], cands, 0.7), atol=1e-10)
    assert DCTSpoofer(eta=0.6).get_params() == {"eta": 0.6, "mask": "triangle"}


def test_anonymization_decorrelates_source():
    shape = (128, 128)
    sensor = SyntheticSensor.random("S", shape, seed=21)
    train = [simulate_capture(sensor, make_scene(shape, 1000 + i), 2000 + i) for i in range(20)]
    k = estimate_reference(train, "enhanced").values
    trials = 40
    drops = 0
    for i in range(trials):
        img = simulate_capture(sensor, make_scene(shape, 3000 + i), 4000 + i)
        before = ncc(extract_residual(img), k)
        after = ncc(extract_residual(anonymize(img, 0.9)), k)
        drops += after < before
    assert drops / trials >= 0.95
