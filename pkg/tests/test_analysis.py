"""Analysis measure tests: Amari distance, PSNR, disparity, ocularity,
map continuity, tuning curves, dip test."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ebmlab.analysis import (
    amari_distance,
    amari_index,
    circular_difference,
    dip_statistic,
    dip_test,
    disparity_measures,
    mosaic,
    neighbor_continuity,
    ocularity,
    ocularity_band_stats,
    psnr,
    tuning_curve,
)
from ebmlab.gabor import GaborFit, gabor_kernel
from ebmlab.pot import PotModel


class TestAmari:
    def test_identical_matrices(self, rng):
        A = rng.standard_normal((4, 4))
        assert amari_distance(A, A) == pytest.approx(0.0, abs=1e-12)

    def test_scaled_permutation_is_zero(self, rng):
        B = rng.standard_normal((5, 5)) + 3 * np.eye(5)
        P = np.eye(5)[rng.permutation(5)]
        D = np.diag(rng.uniform(0.5, 2.0, 5) * rng.choice([-1, 1], 5))
        A = D @ P @ B
        assert amari_distance(A, B) == pytest.approx(0.0, abs=1e-10)

    def test_hand_evaluated_case(self):
        B = np.eye(2)
        A = np.array([[1.0, 1.0], [0.0, 1.0]])  # C = A B^{-1} = A
        assert amari_distance(A, B) == pytest.approx(2.0)

    def test_invariance_under_left_diag_perm_hypothesis(self):
        @settings(max_examples=100, deadline=None)
        @given(st.integers(0, 10**6))
        def check(seed):
            r = np.random.default_rng(seed)
            n = int(r.integers(2, 6))
            A = r.standard_normal((n, n)) + 2 * np.eye(n)
            B = r.standard_normal((n, n)) + 2 * np.eye(n)
            base = amari_distance(A, B)
            P = np.eye(n)[r.permutation(n)]
            D = np.diag(r.uniform(0.5, 2.0, n) * r.choice([-1.0, 1.0], n))
            assert abs(amari_distance(D @ P @ A, B) - base) < 1e-10

        check()

    def test_rejects_nonsquare(self):
        with pytest.raises(ValueError):
            amari_distance(np.zeros((2, 3)), np.zeros((2, 3)))

    def test_index_normalization(self, rng):
        A = rng.standard_normal((4, 4)) + 3 * np.eye(4)
        B = rng.standard_normal((4, 4)) + 3 * np.eye(4)
        assert amari_index(A, B) == pytest.approx(amari_distance(A, B) / 24.0)


class TestPsnr:
    def test_zero_db_when_mse_is_smax_squared(self):
        ref = np.zeros((4, 4))
        probe = np.full((4, 4), 3.0)
        assert psnr(ref, probe, s_max=3.0) == pytest.approx(0.0)

    def test_thirty_db_case(self):
        ref = np.zeros(100)
        probe = np.full(100, np.sqrt(65.025))
        assert psnr(ref, probe, s_max=255.0) == pytest.approx(30.0, abs=1e-9)

    def test_identical_signals_error(self):
        with pytest.raises(ValueError):
            psnr(np.ones(5), np.ones(5), 1.0)

    def test_geometry_mismatch(self):
        with pytest.raises(ValueError):
            psnr(np.ones(5), np.ones(6), 1.0)


class TestOcularity:
    def test_zero_right_eye(self, rng):
        JL = rng.standard_normal((3, 4))
        np.testing.assert_allclose(ocularity(JL, np.zeros((3, 4))),
                                   np.abs(JL).sum(axis=1))

    def test_equal_eyes_zero(self, rng):
        J = rng.standard_normal((3, 4))
        np.testing.assert_array_equal(ocularity(J, J), 0.0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            ocularity(np.zeros((2, 3)), np.zeros((3, 2)))

    def test_band_stats(self):
        oc = np.array([1, 1, 1, -1, -1, 2, 2, -3])
        changes, width = ocularity_band_stats(oc)
        assert changes == 3
        assert width == pytest.approx(2.0)


class TestDisparity:
    def _fit(self, **kw):
        base = dict(center_x=8.0, center_y=8.0, orientation=0.0, frequency=0.1,
                    phase=0.0, sigma_w=2.0, sigma_l=3.0, amplitude=1.0,
                    residual=0.0, good=True)
        base.update(kw)
        return GaborFit(**base)

    def test_identical_fits(self):
        f = self._fit()
        assert disparity_measures(f, f) == (0.0, 0.0, 0.0)

    def test_quarter_cycle_phase_shift(self):
        fl = self._fit(phase=np.pi / 2)
        fr = self._fit(phase=0.0)
        d_phase, d_shift, d_x = disparity_measures(fl, fr)
        assert d_phase == pytest.approx(np.pi / 2)
        assert d_shift == pytest.approx((np.pi / 2) / (2 * np.pi * 0.1))  # 2.5 px
        assert d_x == 0.0

    def test_invalid_fit_rejected(self):
        bad = self._fit(good=False)
        with pytest.raises(ValueError):
            disparity_measures(bad, bad)

    def test_position_disparity_histogram_centered_on_shift(self, rng):
        """Synthetic population with a known center offset."""
        shifts = []
        for _ in range(20):
            cx = float(rng.uniform(6, 10))
            fl = self._fit(center_x=cx + 1.5)
            fr = self._fit(center_x=cx)
            shifts.append(disparity_measures(fl, fr)[2])
        assert np.mean(shifts) == pytest.approx(1.5, abs=1e-12)


class TestNeighborContinuity:
    def test_identical_values_zero(self, rng):
        stat, null = neighbor_continuity(np.full(16, 0.7), 4, 4, rng=rng)
        assert stat == 0.0
        assert null == 0.0

    def test_random_values_ratio_near_one(self, rng):
        vals = rng.uniform(0, np.pi, 64)
        stat, null = neighbor_continuity(vals, 8, 8, period=np.pi, rng=rng)
        assert 0.9 < stat / null < 1.1

    def test_smooth_map_beats_null(self, rng):
        rows, cols = 8, 8
        r = np.arange(rows * cols) // cols
        c = np.arange(rows * cols) % cols
        vals = np.pi * ((np.sin(2 * np.pi * r / rows)
                         + np.cos(2 * np.pi * c / cols)) / 4 + 0.5)
        vals = vals % np.pi
        stat, null = neighbor_continuity(vals, rows, cols, period=np.pi, rng=rng)
        assert stat < 0.7 * null

    def test_mask_excludes_cells(self, rng):
        vals = rng.uniform(0, 1, 16)
        mask = np.zeros(16, dtype=bool)
        with pytest.raises(ValueError):
            neighbor_continuity(vals, 4, 4, mask=mask, rng=rng)

    def test_circular_difference(self):
        assert circular_difference(0.1, np.pi - 0.1, np.pi) == pytest.approx(0.2)


class TestTuningCurves:
    def _model_from_filter(self, img):
        J = img.reshape(1, -1)
        return PotModel(J, alpha=1.5)

    def test_peak_at_own_orientation_and_frequency(self):
        shape = (16, 16)
        theta0, f0 = np.deg2rad(40), 0.15
        filt = gabor_kernel(shape, 7.5, 7.5, theta0, f0, 0.0, 2.0, 3.0)
        model = self._model_from_filter(filt)
        grid = np.linspace(0, np.pi, 24, endpoint=False)
        resp = tuning_curve(model, 0, "grating-orientation", grid, shape)
        peak_theta = grid[np.argmax(resp)]
        d = min(abs(peak_theta - theta0), np.pi - abs(peak_theta - theta0))
        assert d < np.pi / 12
        fgrid = np.geomspace(0.05, 0.4, 25)
        resp_f = tuning_curve(model, 0, "grating-frequency", fgrid, shape)
        assert abs(np.log(fgrid[np.argmax(resp_f)] / f0)) < 0.35

    def test_quadrature_pair_pooling_is_phase_invariant(self):
        """A second-layer unit pooling two quadrature Gabors has a flatter
        phase curve than its layer-1 inputs."""
        shape = (16, 16)
        g_cos = gabor_kernel(shape, 7.5, 7.5, 0.0, 0.15, 0.0, 2.5, 3.5)
        g_sin = gabor_kernel(shape, 7.5, 7.5, 0.0, 0.15, np.pi / 2, 2.5, 3.5)
        J = np.stack([g_cos.ravel(), g_sin.ravel()])
        W = np.ones((1, 2))
        model = PotModel(J, alpha=1.5, W=W)
        grid = np.linspace(-np.pi, np.pi, 32, endpoint=False)
        simple = tuning_curve(model, 0, "grating-phase", grid, shape, layer=1)
        complex_ = tuning_curve(model, 0, "grating-phase", grid, shape, layer=2)

        def mod_depth(curve):
            return (curve.max() - curve.min()) / (curve.max() + 1e-12)

        assert mod_depth(complex_) < mod_depth(simple)

    def test_zero_filter_flat_zero(self):
        model = PotModel(np.zeros((1, 64)), alpha=1.5)
        resp = tuning_curve(model, 0, "grating-phase",
                            np.linspace(-np.pi, np.pi, 8), (8, 8))
        np.testing.assert_array_equal(resp, 0.0)

    def test_scale_invariance_of_normalized_curve(self, rng):
        shape = (12, 12)
        filt = gabor_kernel(shape, 5.5, 5.5, 0.3, 0.18, 0.2, 2.0, 2.5)
        grid = np.linspace(0, np.pi, 16, endpoint=False)
        r1 = tuning_curve(self._model_from_filter(filt), 0,
                          "grating-orientation", grid, shape)
        r2 = tuning_curve(self._model_from_filter(3.0 * filt), 0,
                          "grating-orientation", grid, shape)
        np.testing.assert_allclose(r1, r2, rtol=1e-10)

    def test_unknown_family(self):
        model = PotModel(np.zeros((1, 4)), alpha=1.5)
        with pytest.raises(ValueError):
            tuning_curve(model, 0, "plaid", [0.0], (2, 2))


class TestDipTest:
    def test_uniform_not_rejected(self, rng):
        x = rng.random(300)
        _, p = dip_test(x, rng=np.random.default_rng(0), n_boot=200)
        assert p > 0.05

    def test_gaussian_not_rejected(self, rng):
        x = rng.standard_normal(300)
        _, p = dip_test(x, rng=np.random.default_rng(0), n_boot=200)
        assert p > 0.05

    def test_separated_modes_rejected(self, rng):
        x = np.concatenate([rng.normal(-2, 0.3, 150), rng.normal(2, 0.3, 150)])
        d, p = dip_test(x, rng=np.random.default_rng(0), n_boot=200)
        assert p < 0.01

    def test_dip_increases_with_separation(self, rng):
        base = rng.standard_normal(200)
        dips = []
        for sep in (0.0, 2.0, 4.0):
            x = np.concatenate([base - sep, base + sep])
            dips.append(dip_statistic(x))
        assert dips[0] < dips[1] < dips[2]

    def test_needs_enough_samples(self):
        with pytest.raises(ValueError):
            dip_statistic([1.0, 2.0])

    def test_constant_sample_zero(self):
        assert dip_statistic(np.ones(10)) == 0.0


class TestMosaic:
    def test_shape_and_range(self, rng):
        F = rng.standard_normal((7, 16))
        img = mosaic(F, (4, 4))
        assert img.shape == (3 * 5 + 1, 3 * 5 + 1)
        assert img.min() >= 0.0 and img.max() <= 1.0

    def test_ordering_applied(self, rng):
        F = np.stack([np.full(4, i, dtype=float) for i in range(4)])
        img = mosaic(F, (2, 2), order=[3, 2, 1, 0], normalize=False)
        assert img[1, 1] == 3.0
