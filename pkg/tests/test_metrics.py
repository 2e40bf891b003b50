"""Tests for PSNR, SSIM, depth RMSE/SROCC, and prior precision/recall/F1."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vipnerf.metrics import MetricsReport, depth_rmse_srocc, prior_prf, psnr, ssim


class TestPsnr:
    def test_identical_images_infinite(self):
        a = np.random.default_rng(0).random((8, 8, 3))
        assert psnr(a, a) == math.inf

    def test_definition_values(self):
        a = np.zeros((10, 10, 3))
        b = np.full((10, 10, 3), 0.1)  # MSE 0.01
        assert psnr(a, b) == pytest.approx(20.0)
        c = np.full((10, 10, 3), 0.01)  # MSE 1e-4
        assert psnr(a, c) == pytest.approx(40.0)

    def test_symmetric(self):
        rng = np.random.default_rng(1)
        a, b = rng.random((6, 6, 3)), rng.random((6, 6, 3))
        assert psnr(a, b) == pytest.approx(psnr(b, a))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shape"):
            psnr(np.zeros((4, 4, 3)), np.zeros((5, 5, 3)))


class TestSsim:
    def test_identical_images(self):
        a = np.random.default_rng(2).random((16, 16, 3))
        assert ssim(a, a) == pytest.approx(1.0, abs=1e-9)

    def test_matches_reference_implementation(self):
        skimage = pytest.importorskip("skimage.metrics")
        rng = np.random.default_rng(3)
        a = rng.random((32, 32))
        b = np.clip(a + rng.normal(0, 0.1, a.shape), 0, 1)
        ours = ssim(a, b)
        theirs = skimage.structural_similarity(
            a, b, data_range=1.0, gaussian_weights=True, sigma=1.5,
            use_sample_covariance=False,
        )
        assert ours == pytest.approx(theirs, abs=2e-3)

    def test_anticorrelated_checker(self):
        # a vs 1-a on a binary checker has perfectly anti-correlated structure;
        # the luminance and contrast terms keep the stabilized index slightly
        # above -1 (it reaches -1 only in the K->0 limit)
        idx = np.indices((32, 32)).sum(axis=0)
        a = (idx % 2).astype(np.float64)
        value = ssim(a, 1.0 - a)
        assert value < -0.98
        skimage = pytest.importorskip("skimage.metrics")
        reference = skimage.structural_similarity(
            a, 1.0 - a, data_range=1.0, gaussian_weights=True, sigma=1.5,
            use_sample_covariance=False,
        )
        assert value == pytest.approx(reference, abs=1e-6)

    def test_constant_shift_between_zero_and_one(self):
        a = np.full((16, 16), 0.4)
        b = np.full((16, 16), 0.5)
        value = ssim(a, b)
        # constant images: structure/contrast terms are 1, luminance < 1
        mu_a, mu_b, c1 = 0.4, 0.5, 0.01**2
        expected = (2 * mu_a * mu_b + c1) / (mu_a**2 + mu_b**2 + c1)
        assert 0.0 < value < 1.0
        assert value == pytest.approx(expected, abs=1e-9)

    def test_small_image_rejected(self):
        with pytest.raises(ValueError, match="window"):
            ssim(np.zeros((8, 8)), np.zeros((8, 8)))

    def test_bounded(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            a, b = rng.random((16, 16)), rng.random((16, 16))
            assert -1.0 <= ssim(a, b) <= 1.0


class TestDepthMetrics:
    def test_perfect_prediction(self):
        ref = np.random.default_rng(5).uniform(2, 10, size=(8, 8))
        rmse, rho = depth_rmse_srocc(ref, ref)
        assert rmse == 0.0
        assert rho == pytest.approx(1.0)

    def test_reversed_ranks(self):
        ref = np.arange(16, dtype=np.float64).reshape(4, 4)
        rmse, rho = depth_rmse_srocc(-ref, ref)
        assert rho == pytest.approx(-1.0)
        assert rmse > 0

    def test_monotone_scale_invariance(self):
        ref = np.random.default_rng(6).uniform(2, 10, size=(8, 8))
        rmse, rho = depth_rmse_srocc(2.0 * ref, ref)
        assert rho == pytest.approx(1.0)
        assert rmse > 0

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=100, deadline=None)
    def test_monotone_transform_invariance(self, seed):
        rng = np.random.default_rng(seed)
        ref = rng.uniform(0.1, 10.0, size=30)
        pred = rng.uniform(0.1, 10.0, size=30)
        _, rho = depth_rmse_srocc(pred, ref)
        transform = rng.choice([np.exp, np.log, np.sqrt, lambda x: 3 * x + 1])
        _, rho_t = depth_rmse_srocc(transform(pred), ref)
        assert rho_t == pytest.approx(rho, abs=1e-12)

    def test_valid_mask_respected(self):
        ref = np.array([[1.0, 2.0], [3.0, 100.0]])
        pred = np.array([[1.0, 2.0], [3.0, 0.0]])
        valid = np.array([[True, True], [True, False]])
        rmse, rho = depth_rmse_srocc(pred, ref, valid)
        assert rmse == 0.0
        assert rho == pytest.approx(1.0)

    def test_too_few_valid_pixels_rejected(self):
        with pytest.raises(ValueError, match="valid"):
            depth_rmse_srocc(np.ones((2, 2)), np.ones((2, 2)),
                             np.array([[True, False], [False, False]]))


class TestPriorPrf:
    def test_perfect_prediction(self):
        ref = np.random.default_rng(7).integers(0, 2, size=(8, 8))
        assert prior_prf(ref, ref) == (1.0, 1.0, 1.0)

    def test_all_zero_prediction(self):
        ref = np.ones((4, 4), dtype=np.uint8)
        precision, recall, f1 = prior_prf(np.zeros((4, 4), dtype=np.uint8), ref)
        assert precision is None
        assert recall == 0.0
        assert f1 == 0.0

    def test_no_reference_positives(self):
        pred = np.ones((4, 4), dtype=np.uint8)
        precision, recall, _ = prior_prf(pred, np.zeros((4, 4), dtype=np.uint8))
        assert precision == 0.0
        assert recall is None

    def test_confusion_arithmetic(self):
        # TP=8, FP=2, FN=2 -> precision = recall = f1 = 0.8
        pred = np.array([1] * 10 + [0] * 2 + [0] * 4)
        ref = np.array([1] * 8 + [0] * 2 + [1] * 2 + [0] * 4)
        precision, recall, f1 = prior_prf(pred, ref)
        assert (precision, recall, f1) == (0.8, 0.8, pytest.approx(0.8))

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=50, deadline=None)
    def test_matches_brute_force_count(self, seed):
        rng = np.random.default_rng(seed)
        pred = rng.integers(0, 2, size=(16, 16)).astype(bool)
        ref = rng.integers(0, 2, size=(16, 16)).astype(bool)
        precision, recall, f1 = prior_prf(pred, ref)
        tp = sum(1 for p, r in zip(pred.ravel(), ref.ravel()) if p and r)
        fp = sum(1 for p, r in zip(pred.ravel(), ref.ravel()) if p and not r)
        fn = sum(1 for p, r in zip(pred.ravel(), ref.ravel()) if not p and r)
        if tp + fp:
            assert precision == pytest.approx(tp / (tp + fp))
        if tp + fn:
            assert recall == pytest.approx(tp / (tp + fn))
        if precision and recall:
            assert f1 == pytest.approx(2 * precision * recall / (precision + recall))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shape"):
            prior_prf(np.zeros((3, 3)), np.zeros((4, 4)))


class TestReport:
    def test_json_schema(self, tmp_path):
        report = MetricsReport(psnr=25.0, ssim=0.9, depth_rmse=0.1,
                               depth_srocc=0.95, prior_precision=0.97,
                               prior_recall=0.83, prior_f1=0.89)
        path = tmp_path / "metrics.json"
        report.save(path)
        doc = json.loads(path.read_text())
        for key in ("psnr", "ssim", "depth_rmse", "depth_srocc",
                    "prior_precision", "prior_recall", "prior_f1", "lpips"):
            assert key in doc
        assert doc["lpips"] is None

    def test_aggregate_psnr_infinite_flag(self):
        value, infinite = MetricsReport.aggregate_psnr([20.0, math.inf])
        assert value is None and infinite
        value, infinite = MetricsReport.aggregate_psnr([20.0, 30.0])
        assert value == pytest.approx(25.0) and not infinite
