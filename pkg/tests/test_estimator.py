"""Estimator API contract: params round trip, clone, fit/predict/score,
input validation and checkpoint rehydration."""

import numpy as np
import pytest
from sklearn.base import clone

from gazekit.estimator import GazeEstimator


@pytest.fixture(scope="module")
def fitted(tmp_path_factory):
    from gazekit.datasets import SyntheticConfig, generate_synthetic

    samples = generate_synthetic(
        SyntheticConfig(n_samples=200, noise_level=0.0, seed=21))
    X = np.stack([s.image for s in samples])
    y = np.array([[s.gaze.pitch, s.gaze.yaw] for s in samples])
    estimator = GazeEstimator(learning_rate=1e-3, epochs=5, batch_size=16,
                              seed=0)
    estimator.fit(X, y)
    return estimator, X, y


class TestSklearnContract:
    def test_get_params_round_trip(self):
        estimator = GazeEstimator(beta=2.0, epochs=7)
        params = estimator.get_params()
        assert params["beta"] == 2.0
        assert params["epochs"] == 7
        rebuilt = GazeEstimator(**params)
        assert rebuilt.get_params() == params

    def test_set_params(self):
        estimator = GazeEstimator()
        estimator.set_params(beta=0.5, n_bins=10)
        assert estimator.beta == 0.5
        assert estimator.n_bins == 10

    def test_clone_preserves_params_not_state(self, fitted):
        estimator, _, _ = fitted
        cloned = clone(estimator)
        assert cloned.get_params() == estimator.get_params()
        assert not hasattr(cloned, "model_")

    def test_defaults_match_training_recipe(self):
        estimator = GazeEstimator()
        assert estimator.learning_rate == pytest.approx(1e-5)
        assert estimator.epochs == 50
        assert estimator.batch_size == 16


class TestFitPredict:
    def test_predict_shape_and_range(self, fitted):
        estimator, X, _ = fitted
        predictions = estimator.predict(X[:10])
        assert predictions.shape == (10, 2)
        assert np.all(np.abs(predictions[:, 0]) <= np.pi / 2)
        assert np.all(np.abs(predictions[:, 1]) <= np.pi)

    def test_learns_the_synthetic_task(self, fitted):
        estimator, X, y = fitted
        errors = estimator.angular_errors(X, y)
        assert errors.mean() < 5.0  # training-set fit after 5 short epochs

    def test_score_is_negative_mean_error(self, fitted):
        estimator, X, y = fitted
        score = estimator.score(X, y)
        assert score == pytest.approx(-estimator.angular_errors(X, y).mean())

    def test_history_recorded(self, fitted):
        estimator, _, _ = fitted
        assert len(estimator.history_.epochs) == 5

    def test_refit_same_seed_identical_predictions(self):
        from gazekit.datasets import SyntheticConfig, generate_synthetic

        samples = generate_synthetic(
            SyntheticConfig(n_samples=32, noise_level=0.0, seed=4))
        X = np.stack([s.image for s in samples])
        y = np.array([[s.gaze.pitch, s.gaze.yaw] for s in samples])
        runs = []
        for _ in range(2):
            estimator = GazeEstimator(learning_rate=1e-3, epochs=1,
                                      batch_size=16, seed=3)
            estimator.fit(X, y)
            runs.append(estimator.predict(X))
        np.testing.assert_array_equal(runs[0], runs[1])


class TestValidation:
    def test_unfitted_predict_rejected(self):
        with pytest.raises(ValueError, match="not fitted"):
            GazeEstimator().predict(np.zeros((1, 64, 64, 3), np.uint8))

    def test_wrong_image_shape_rejected(self):
        estimator = GazeEstimator(epochs=1)
        with pytest.raises(ValueError, match="X"):
            estimator.fit(np.zeros((4, 64, 64), np.uint8), np.zeros((4, 2)))

    def test_empty_batch_rejected(self):
        estimator = GazeEstimator(epochs=1)
        with pytest.raises(ValueError, match="empty"):
            estimator.fit(np.zeros((0, 64, 64, 3), np.uint8),
                          np.zeros((0, 2)))

    def test_length_mismatch_rejected(self):
        estimator = GazeEstimator(epochs=1)
        with pytest.raises(ValueError, match="images"):
            estimator.fit(np.zeros((4, 64, 64, 3), np.uint8),
                          np.zeros((3, 2)))

    def test_pitch_out_of_range_rejected(self):
        estimator = GazeEstimator(epochs=1)
        y = np.zeros((2, 2))
        y[0, 0] = 2.0  # > pi/2
        with pytest.raises(ValueError, match="pitch"):
            estimator.fit(np.zeros((2, 64, 64, 3), np.uint8), y)

    def test_non_finite_targets_rejected(self):
        estimator = GazeEstimator(epochs=1)
        y = np.zeros((2, 2))
        y[1, 1] = np.nan
        with pytest.raises(ValueError, match="finite"):
            estimator.fit(np.zeros((2, 64, 64, 3), np.uint8), y)


class TestCheckpointRehydration:
    def test_round_trip_identical_predictions(self, fitted, tmp_path):
        estimator, X, _ = fitted
        path = tmp_path / "est.pt"
        estimator.save(path)
        restored = GazeEstimator.from_checkpoint(path)
        np.testing.assert_array_equal(restored.predict(X[:6]),
                                      estimator.predict(X[:6]))
        assert restored.n_bins == estimator.n_bins
        assert restored.scheme_ == estimator.scheme_
