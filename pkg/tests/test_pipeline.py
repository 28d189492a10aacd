"""Data pipeline tests: patch extraction statistics, preprocessing
idempotence, whitening correctness and equivariance, stereo pairs."""

import numpy as np
import pytest
from scipy import stats

from ebmlab.pipeline import (
    PatchBatch,
    apply_whitener,
    extract_patches,
    fit_whitener,
    invert_whitener,
    make_stereo_pairs,
    preprocess,
    synthesize_images,
)


class TestExtractPatches:
    def test_zero_count_empty_batch(self, rng):
        batch = extract_patches([np.zeros((10, 10))], size=4, count=0, rng=rng)
        assert batch.count == 0
        assert batch.data.shape == (0, 16)

    def test_constant_image_constant_patches(self, rng):
        batch = extract_patches([np.full((12, 12), 0.7)], size=5, count=20, rng=rng)
        np.testing.assert_allclose(batch.data, 0.7)

    def test_empty_corpus_rejected(self, rng):
        with pytest.raises(ValueError):
            extract_patches([], size=4, count=1, rng=rng)

    def test_size_too_large(self, rng):
        with pytest.raises(ValueError):
            extract_patches([np.zeros((3, 3))], size=4, count=1, rng=rng)

    def test_positions_uniform_chi_square(self, rng):
        """Patch positions binned on a 4x4 grid pass uniformity at 1%."""
        side, size = 20, 1
        marker = np.arange(side * side, dtype=float).reshape(side, side)
        batch = extract_patches([marker], size=size, count=10_000, rng=rng)
        pos = batch.data[:, 0].astype(int)
        rows, cols = pos // side, pos % side
        cell = (rows * 4 // side) * 4 + (cols * 4 // side)
        counts = np.bincount(cell, minlength=16)
        chi2 = np.sum((counts - counts.mean()) ** 2 / counts.mean())
        assert chi2 < stats.chi2.ppf(0.99, df=15)


class TestPreprocess:
    def test_constant_patch_zeroed(self):
        batch = PatchBatch(np.full((3, 4), 2.0), height=2, width=2)
        out, _ = preprocess(batch)
        np.testing.assert_allclose(out.data, 0.0, atol=1e-12)
        assert out.stage == "centered"

    def test_row_sums_vanish(self, rng):
        batch = PatchBatch(rng.random((50, 16)), height=4, width=4)
        out, _ = preprocess(batch, apply_log=True)
        assert np.max(np.abs(out.data.sum(axis=1))) < 1e-9

    def test_idempotent_on_centered_data(self, rng):
        batch = PatchBatch(rng.standard_normal((40, 9)), height=3, width=3)
        once, _ = preprocess(batch)
        twice, _ = preprocess(once)
        np.testing.assert_allclose(twice.data, once.data, atol=1e-12)

    def test_log_requires_nonnegative(self):
        batch = PatchBatch(np.array([[-1.0, 1.0]]), height=1, width=2)
        with pytest.raises(ValueError):
            preprocess(batch, apply_log=True)

    def test_stage_cannot_regress(self, rng):
        batch = PatchBatch(rng.random((5, 4)), height=2, width=2, stage="whitened")
        with pytest.raises(ValueError):
            batch.advanced(batch.data, "raw")


class TestWhitener:
    def _centered(self, rng, n=4000, d=16, scale=None):
        X = rng.standard_normal((n, d))
        if scale is not None:
            X = X @ scale
        batch = PatchBatch(X, height=4, width=4)
        out, _ = preprocess(batch)
        return out

    def test_whitened_covariance_is_identity(self, rng):
        batch = self._centered(rng, scale=np.diag(np.linspace(0.5, 3.0, 16)))
        wt = fit_whitener(batch, keep_dims=10, mode="pca")
        W = apply_whitener(wt, batch)
        cov = np.cov(W.data.T, bias=True)
        rel = np.linalg.norm(cov - np.eye(10)) / np.linalg.norm(np.eye(10))
        assert rel < 1e-6

    def test_isotropic_zca_is_near_identity_scaling(self, rng):
        X = rng.standard_normal((20_000, 9))
        batch = PatchBatch(X, height=3, width=3)
        wt = fit_whitener(batch, keep_dims=9, mode="zca")
        F = wt.forward
        off = F - np.diag(np.diag(F))
        assert np.linalg.norm(off) < 0.05

    def test_keep_dims_exceeds_rank(self, rng):
        batch = PatchBatch(rng.standard_normal((5, 16)), height=4, width=4)
        with pytest.raises(ValueError):
            fit_whitener(batch, keep_dims=10)

    def test_round_trip_identity_on_whitened_space(self, rng):
        batch = self._centered(rng)
        wt = fit_whitener(batch, keep_dims=12, mode="pca")
        w = rng.standard_normal((30, 12))
        back = apply_whitener(wt, invert_whitener(wt, w))
        np.testing.assert_allclose(back, w, atol=1e-8)

    def test_zero_batch_stays_zero(self, rng):
        batch = self._centered(rng)
        wt = fit_whitener(batch, keep_dims=8, mode="pca")
        np.testing.assert_allclose(
            apply_whitener(wt, np.tile(wt.mean, (3, 1))), 0.0, atol=1e-12)

    def test_scale_equivariance(self, rng):
        X = rng.standard_normal((5000, 9)) @ np.diag(np.linspace(1, 2, 9))
        b1 = PatchBatch(X, height=3, width=3)
        b2 = PatchBatch(3.0 * X, height=3, width=3)
        w1 = fit_whitener(b1, keep_dims=9, mode="pca")
        w2 = fit_whitener(b2, keep_dims=9, mode="pca")
        np.testing.assert_allclose(w2.forward, w1.forward / 3.0, rtol=1e-8)

    def test_invalid_mode(self, rng):
        batch = self._centered(rng)
        with pytest.raises(ValueError):
            fit_whitener(batch, keep_dims=4, mode="ica")

    def test_zca_rows_are_center_surround(self, rng):
        """Whitening filters rendered in pixel space show a positive
        center with a suppressive surround on natural-statistics data."""
        images = synthesize_images(12, 48, rng)
        batch = extract_patches(images, size=7, count=6000, rng=rng)
        centered, _ = preprocess(batch)
        wt = fit_whitener(centered, keep_dims=40, mode="zca")
        mid = 24  # row for the central pixel (3, 3)
        filt = wt.forward[mid].reshape(7, 7)
        center = filt[3, 3]
        surround = np.array([filt[2, 3], filt[4, 3], filt[3, 2], filt[3, 4]])
        assert center > 0
        assert surround.mean() < 0


class TestStereoPairs:
    def test_zero_shift_identical_eyes(self, rng):
        images = [rng.random((30, 40))]
        batch = make_stereo_pairs(images, size=6, shift_std=0.0, count=8, rng=rng)
        assert batch.eyes == 2
        np.testing.assert_array_equal(batch.data[:, :36], batch.data[:, 36:])

    def test_margin_violation(self, rng):
        with pytest.raises(ValueError):
            make_stereo_pairs([np.zeros((10, 12))], size=6, shift_std=5.0,
                              count=1, rng=rng)

    def test_shift_histogram_matches_rounded_gaussian(self, rng):
        """Recover the applied shift per pair by exhaustive matching and
        chi-square it against the rounded Gaussian law."""
        side, size = 80, 16
        images = [np.cumsum(rng.standard_normal((side, side)), axis=1)]
        shift_std = 1.5
        count = 4000
        batch = make_stereo_pairs(images, size=size, shift_std=shift_std,
                                  count=count, rng=rng)
        L = batch.data[:, :size * size].reshape(count, size, size)
        R = batch.data[:, size * size:].reshape(count, size, size)
        max_s = 4
        recovered = []
        for i in range(count):
            errs = []
            for s in range(-max_s, max_s + 1):
                shifted = np.roll(R[i], s, axis=1)
                errs.append(np.sum((L[i][:, max_s:-max_s]
                                    - shifted[:, max_s:-max_s]) ** 2))
            recovered.append(np.argmin(errs) - max_s)
        recovered = np.array(recovered)
        lo, hi = -4, 4
        grid = np.arange(lo, hi + 1)
        probs = np.array([
            stats.norm.cdf(s + 0.5, scale=shift_std)
            - stats.norm.cdf(s - 0.5, scale=shift_std) for s in grid])
        probs /= probs.sum()
        counts = np.array([(recovered == s).sum() for s in grid])
        keep = probs * count >= 5
        chi2 = np.sum((counts[keep] - count * probs[keep]) ** 2
                      / (count * probs[keep]))
        assert chi2 < stats.chi2.ppf(0.99, df=keep.sum() - 1)


class TestSyntheticCorpus:
    def test_images_have_edges_and_range(self, rng):
        images = synthesize_images(5, 32, rng)
        assert len(images) == 5
        for im in images:
            assert im.shape == (32, 32)
            assert 0.0 <= im.min() and im.max() <= 1.0
            gx = np.abs(np.diff(im, axis=1))
            assert gx.max() > 0.05  # contains contrast edges
