"""Baseline extractors: flattening, statistics, random projection."""

import numpy as np
import pytest

from motordiag.dataio import write_bundle
from motordiag.extractors import (
    FeatureError,
    RandomProjection,
    RawFlatten,
    StatFeatures,
    extract_all,
    get_extractor,
)
from motordiag.pipeline import WindowedDataset


def dataset_from(samples, labels, num_classes):
    return WindowedDataset(np.asarray(samples, float), np.asarray(labels), num_classes)


class TestRawFlatten:
    def test_row_major_order(self):
        sample = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        np.testing.assert_array_equal(RawFlatten().transform(sample), [1, 2, 3, 4, 5, 6])

    def test_zero_matrix(self):
        np.testing.assert_array_equal(RawFlatten().transform(np.zeros((2, 4))), np.zeros(8))

    def test_dim(self):
        assert RawFlatten().dim(4, 512) == 2048


class TestStatFeatures:
    def test_unit_sine_moments(self):
        t = np.arange(512)
        sample = np.sin(2 * np.pi * 8 * t / 512)[None, :]
        feats = StatFeatures().transform(sample)
        mean, std, rms = feats[0], feats[1], feats[2]
        assert abs(mean) < 1e-9
        assert rms == pytest.approx(1 / np.sqrt(2), abs=1e-3)
        assert std == pytest.approx(1 / np.sqrt(2), abs=1e-3)

    def test_constant_channel_conventions(self):
        feats = StatFeatures().transform(np.full((1, 16), 5.0))
        mean, std, rms, skew, kurt, crest, dominant, ratio = feats
        assert mean == pytest.approx(5.0)
        assert std == pytest.approx(0.0, abs=1e-12)
        assert skew == 0.0 and kurt == 0.0
        assert crest == pytest.approx(1.0)
        assert dominant == 0.0
        assert ratio == pytest.approx(0.0)

    def test_zero_channel_conventions(self):
        feats = StatFeatures().transform(np.zeros((1, 16)))
        assert feats[5] == 1.0  # crest of silence defined as 1
        assert feats[7] == 0.0  # no energy anywhere

    @pytest.mark.parametrize("k", list(range(1, 21)))
    def test_dominant_bin_of_pure_sine(self, k):
        t = np.arange(512)
        sample = np.sin(2 * np.pi * k * t / 512)[None, :]
        feats = StatFeatures().transform(sample)
        assert feats[6] == float(k)

    def test_translation_covariance_in_mean(self):
        rng = np.random.default_rng(0)
        sample = rng.normal(size=(3, 64))
        base = StatFeatures().transform(sample)
        shifted_sample = sample.copy()
        shifted_sample[1] += 2.5
        shifted = StatFeatures().transform(shifted_sample)
        per = StatFeatures.PER_CHANNEL
        # Channel 1's mean moves by the constant...
        assert shifted[per + 0] - base[per + 0] == pytest.approx(2.5, abs=1e-9)
        # ...its std/skew/kurtosis do not (RMS legitimately shifts)...
        for offset in (1, 3, 4):
            assert shifted[per + offset] == pytest.approx(base[per + offset], abs=1e-9)
        # ...and the other channels are untouched.
        np.testing.assert_allclose(shifted[:per], base[:per], atol=0)
        np.testing.assert_allclose(shifted[2 * per :], base[2 * per :], atol=0)

    def test_dim(self):
        assert StatFeatures().dim(4, 512) == 32


class TestRandomProjection:
    def test_deterministic(self):
        sample = np.random.default_rng(3).normal(size=(4, 512))
        a = RandomProjection(16, 7).transform(sample)
        b = RandomProjection(16, 7).transform(sample)
        np.testing.assert_array_equal(a, b)

    def test_linear(self):
        rng = np.random.default_rng(4)
        sample = rng.normal(size=(2, 32))
        proj = RandomProjection(8, 0)
        np.testing.assert_allclose(
            proj.transform(3.0 * sample), 3.0 * proj.transform(sample), atol=1e-12
        )

    def test_output_dim(self):
        assert RandomProjection(16, 0).transform(np.zeros((4, 512))).shape == (16,)


class TestRegistry:
    def test_ids(self):
        assert get_extractor("raw").id == "raw"
        assert get_extractor("stat").id == "stat"
        assert get_extractor("randproj:16:3").id == "randproj:16:3"

    def test_unknown_spec(self):
        with pytest.raises(ValueError):
            get_extractor("resnet")
        with pytest.raises(ValueError):
            get_extractor("randproj:16")


class TestExtractAll:
    def test_empty_dataset(self):
        ds = dataset_from(np.zeros((0, 2, 8)), np.zeros(0, dtype=int), 3)
        bundle = extract_all(StatFeatures(), ds)
        assert bundle.n == 0
        assert bundle.dim == 16
        assert bundle.num_classes == 3

    def test_labels_copied_and_provenance_set(self):
        rng = np.random.default_rng(1)
        ds = dataset_from(rng.normal(size=(10, 2, 16)), rng.integers(0, 2, 10), 2)
        bundle = extract_all(RawFlatten(), ds)
        assert bundle.n == 10
        np.testing.assert_array_equal(bundle.labels, ds.labels)
        assert bundle.extractor_id == "raw"
        assert bundle.source_hash == ds.content_hash()

    @pytest.mark.parametrize("spec", ["stat", "raw", "randproj:5:4"])
    def test_two_runs_identical_bytes(self, spec, tmp_path):
        rng = np.random.default_rng(2)
        ds = dataset_from(rng.normal(size=(6, 3, 32)), rng.integers(0, 3, 6), 3)
        p1, p2 = tmp_path / "a.fbnd", tmp_path / "b.fbnd"
        write_bundle(extract_all(get_extractor(spec), ds), p1)
        write_bundle(extract_all(get_extractor(spec), ds), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_non_finite_feature_names_sample(self):
        samples = np.zeros((3, 1, 8))
        samples[1, 0, 0] = 1e308
        samples[1, 0, 1] = 1e308
        ds = dataset_from(samples, np.zeros(3, dtype=int), 1)

        class Exploder(RawFlatten):
            id = "exploder"

            def transform_batch(self, batch):
                out = super().transform_batch(batch)
                out[out > 1e307] = np.inf
                return out

        with pytest.raises(FeatureError, match="sample 1"):
            extract_all(Exploder(), ds)
