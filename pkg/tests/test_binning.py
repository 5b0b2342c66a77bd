"""Bin scheme arithmetic, target binning and expectation decoding."""

import numpy as np
import pytest

from gazekit.binning import (
    BinnedTarget,
    BinScheme,
    bin_index_of,
    bin_indices,
    bin_target,
    decode_expectation,
    gaze360_scheme,
    mpiigaze_scheme,
)


class TestBinScheme:
    def test_mpiigaze_default(self):
        scheme = mpiigaze_scheme()
        assert scheme.width == pytest.approx(3.0)
        assert scheme.n_bins == 28
        # centers[i] = min + (i + 0.5) * width, re-derived independently
        np.testing.assert_allclose(scheme.centers,
                                   np.linspace(-40.5, 40.5, 28))

    def test_smallest_scheme(self):
        scheme = BinScheme(-1.0, 1.0, 2)
        np.testing.assert_allclose(scheme.centers, [-0.5, 0.5])

    def test_gaze360_default(self):
        scheme = gaze360_scheme()
        assert scheme.width == pytest.approx(4.0)
        np.testing.assert_allclose(scheme.centers,
                                   np.linspace(-178.0, 178.0, 90))

    def test_centers_strictly_increasing(self):
        scheme = BinScheme(-33.0, 21.0, 17)
        assert np.all(np.diff(scheme.centers) > 0)

    @pytest.mark.parametrize("args", [(1.0, 1.0, 4), (2.0, -2.0, 4),
                                      (-1.0, 1.0, 1), (-1.0, 1.0, 0)])
    def test_invalid_schemes_rejected(self, args):
        with pytest.raises(ValueError):
            BinScheme(*args)


class TestBinTarget:
    def test_lower_edge_is_bin_zero(self, small_scheme):
        assert bin_target(small_scheme.min_deg, small_scheme).bin_index == 0

    def test_every_center_maps_to_its_bin(self):
        scheme = mpiigaze_scheme()
        for k, center in enumerate(scheme.centers):
            assert bin_target(center, scheme).bin_index == k

    def test_out_of_range_clamps(self, small_scheme):
        assert bin_target(small_scheme.max_deg + 10, small_scheme).bin_index \
            == small_scheme.n_bins - 1
        assert bin_target(small_scheme.min_deg - 10, small_scheme).bin_index == 0

    def test_just_inside_lower_edge(self, small_scheme):
        angle = small_scheme.min_deg + small_scheme.width / 100
        assert bin_target(angle, small_scheme).bin_index == 0

    def test_continuous_value_preserved(self, small_scheme):
        target = bin_target(123.456, small_scheme)
        assert target.continuous_deg == 123.456

    def test_one_hot_invariant(self, small_scheme, rng):
        for angle in rng.uniform(-30, 30, size=200):
            target = bin_target(angle, small_scheme)
            assert target.one_hot.sum() == 1.0
            assert target.one_hot[target.bin_index] == 1.0
            assert np.count_nonzero(target.one_hot) == 1

    def test_non_finite_rejected(self, small_scheme):
        with pytest.raises(ValueError):
            bin_target(float("nan"), small_scheme)

    def test_vectorized_matches_scalar(self, rng):
        scheme = mpiigaze_scheme()
        angles = rng.uniform(-60, 60, size=500)
        vectorized = bin_indices(angles, scheme)
        assert all(vectorized[i] == bin_index_of(a, scheme)
                   for i, a in enumerate(angles))

    def test_bad_one_hot_rejected(self):
        with pytest.raises(ValueError):
            BinnedTarget(0, 0.0, np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            BinnedTarget(1, 0.0, np.array([1.0, 0.0]))


class TestDecodeExpectation:
    def test_one_hot_decodes_to_center_exactly(self):
        for scheme in (mpiigaze_scheme(), gaze360_scheme()):
            for i in range(scheme.n_bins):
                one_hot = np.zeros(scheme.n_bins)
                one_hot[i] = 1.0
                assert decode_expectation(one_hot, scheme) == scheme.centers[i]

    def test_uniform_over_symmetric_scheme_is_zero(self):
        scheme = mpiigaze_scheme()
        uniform = np.full(scheme.n_bins, 1.0 / scheme.n_bins)
        assert decode_expectation(uniform, scheme) == pytest.approx(0.0, abs=1e-12)

    def test_hand_computed_weighted_sum(self):
        # 0.25 * (-1.5) + 0.75 * 1.5 = 0.75
        scheme = BinScheme(-3.0, 3.0, 2)
        np.testing.assert_allclose(scheme.centers, [-1.5, 1.5])
        assert decode_expectation(np.array([0.25, 0.75]), scheme) == \
            pytest.approx(0.75)

    def test_linear_in_probabilities(self, small_scheme, rng):
        for _ in range(100):
            p = rng.dirichlet(np.ones(small_scheme.n_bins))
            q = rng.dirichlet(np.ones(small_scheme.n_bins))
            lam = rng.uniform()
            mixed = lam * p + (1 - lam) * q
            expected = (lam * decode_expectation(p, small_scheme)
                        + (1 - lam) * decode_expectation(q, small_scheme))
            assert decode_expectation(mixed, small_scheme) == \
                pytest.approx(expected, abs=1e-12)

    def test_output_within_center_range(self, small_scheme, rng):
        for _ in range(200):
            p = rng.dirichlet(np.ones(small_scheme.n_bins))
            decoded = decode_expectation(p, small_scheme)
            assert small_scheme.centers[0] <= decoded <= small_scheme.centers[-1]

    def test_batched_rows(self, small_scheme):
        probs = np.eye(small_scheme.n_bins)[:3]
        np.testing.assert_allclose(decode_expectation(probs, small_scheme),
                                   small_scheme.centers[:3])

    def test_wrong_length_rejected(self, small_scheme):
        with pytest.raises(ValueError):
            decode_expectation(np.ones(4) / 4, small_scheme)

    def test_non_simplex_rejected(self, small_scheme):
        bad = np.full(small_scheme.n_bins, 1.0 / small_scheme.n_bins) + 1e-3
        with pytest.raises(ValueError):
            decode_expectation(bad, small_scheme)
        negative = np.zeros(small_scheme.n_bins)
        negative[0], negative[1] = 1.5, -0.5
        with pytest.raises(ValueError):
            decode_expectation(negative, small_scheme)


class TestRoundTrips:
    def test_decode_of_binned_within_half_width(self, rng):
        for scheme in (mpiigaze_scheme(), gaze360_scheme()):
            angles = rng.uniform(scheme.min_deg, scheme.max_deg, size=2000)
            for angle in angles:
                target = bin_target(angle, scheme)
                decoded = decode_expectation(target.one_hot, scheme)
                assert abs(decoded - angle) <= scheme.width / 2

    def test_rebinning_a_center_recovers_the_index(self):
        for scheme in (mpiigaze_scheme(), gaze360_scheme()):
            for i in range(scheme.n_bins):
                one_hot = np.zeros(scheme.n_bins)
                one_hot[i] = 1.0
                decoded = decode_expectation(one_hot, scheme)
                assert bin_target(decoded, scheme).bin_index == i
