"""Scikit-learn style estimator wrapping the dual-head gaze model.

``GazeEstimator`` follows the fit/predict/score contract, keeps its
constructor arguments untouched for ``get_params``/``set_params``/``clone``,
and validates inputs at fit time, so it composes with model selection
utilities from the wider ecosystem.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .binning import BinScheme
from .datasets import Sample, SampleMeta, prepare_training_set
from .geometry import GazeAngles, angles_to_vector_array, angular_error_batch
from .models import (
    DualHeadGazeModel,
    ModelConfig,
    build_model,
    load_checkpoint,
    predict_gaze,
    save_checkpoint,
)
from .training import TrainConfig, TrainingHistory, train
from .validation import check_angle_pairs, check_image_batch


class GazeEstimator(BaseEstimator, RegressorMixin):
    """Gaze regressor: images in, (pitch, yaw) radians out.

    X is a batch of HxWx3 RGB images (uint8 or floats in [0, 1]); y is an
    (n, 2) array of (pitch, yaw) in radians. Internally each angle is
    binned for classification and decoded back through the softmax
    expectation, with the regression term weighted by ``beta``.

    Parameters default to the full-scale training recipe (Adam, lr 1e-5,
    50 epochs, batch 16); desk-scale runs override them.
    """

    def __init__(self, backbone="toy-cnn", bin_min_deg=-42.0, bin_max_deg=42.0,
                 n_bins=28, beta=1.0, learning_rate=1e-5, epochs=50,
                 batch_size=16, seed=0, pretrained=False, checkpoint_dir=None):
        self.backbone = backbone
        self.bin_min_deg = bin_min_deg
        self.bin_max_deg = bin_max_deg
        self.n_bins = n_bins
        self.beta = beta
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.pretrained = pretrained
        self.checkpoint_dir = checkpoint_dir

    # -- construction helpers -------------------------------------------------

    def _scheme(self) -> BinScheme:
        return BinScheme(self.bin_min_deg, self.bin_max_deg, self.n_bins)

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            beta=self.beta,
            seed=self.seed,
            checkpoint_dir=self.checkpoint_dir,
        )

    def _model_config(self, input_size: tuple[int, int]) -> ModelConfig:
        return ModelConfig(
            backbone=self.backbone,
            n_bins=self.n_bins,
            input_size=input_size,
            pretrained=self.pretrained,
        )

    # -- sklearn surface -------------------------------------------------------

    def fit(self, X, y, val_samples=None):
        """Train on images X and (pitch, yaw) radian targets y.

        ``val_samples`` (a sequence of :class:`~gazekit.datasets.Sample`)
        enables per-epoch validation error in the history.
        """
        images = check_image_batch("X", X)
        angles = check_angle_pairs("y", y)
        if len(images) != len(angles):
            raise ValueError(
                f"X has {len(images)} images but y has {len(angles)} rows")
        samples = [
            Sample(image=img,
                   gaze=GazeAngles(float(row[0]), float(row[1])),
                   subject_id="train",
                   meta=SampleMeta(source="in-memory"))
            for img, row in zip(images, angles)
        ]
        return self._fit_prepared(samples, val_samples)

    def fit_samples(self, samples, val_samples=None):
        """Fit directly from loaded dataset samples."""
        if not samples:
            raise ValueError("samples is empty")
        return self._fit_prepared(list(samples), val_samples)

    def _fit_prepared(self, samples, val_samples):
        scheme = self._scheme()
        examples = prepare_training_set(samples, scheme)
        height, width = examples[0].image.shape[:2]
        model = build_model(self._model_config((height, width)),
                            seed=self.seed)
        history = train(model, examples, scheme, self._train_config(),
                        val_samples=val_samples)
        self.model_: DualHeadGazeModel = model
        self.scheme_ = scheme
        self.history_: TrainingHistory = history
        return self

    def predict(self, X) -> np.ndarray:
        """Predicted (pitch, yaw) in radians, shape (n, 2)."""
        self._check_fitted()
        images = check_image_batch("X", X)
        angles = predict_gaze(self.model_, images, self.scheme_)
        return np.array([[a.pitch, a.yaw] for a in angles])

    def score(self, X, y) -> float:
        """Negative mean angular error in degrees (higher is better)."""
        return -self.angular_errors(X, y).mean()

    def angular_errors(self, X, y) -> np.ndarray:
        """Per-sample angular error in degrees against radian targets."""
        angles = check_angle_pairs("y", y)
        predicted = self.predict(X)
        truth_vec = angles_to_vector_array(angles[:, 0], angles[:, 1])
        pred_vec = angles_to_vector_array(predicted[:, 0], predicted[:, 1])
        return angular_error_batch(truth_vec, pred_vec)

    # -- persistence ------------------------------------------------------------

    def save(self, path) -> None:
        """Write the fitted model + scheme as a checkpoint archive."""
        self._check_fitted()
        save_checkpoint(self.model_, self.scheme_, path)

    @classmethod
    def from_checkpoint(cls, path) -> "GazeEstimator":
        """Rehydrate a fitted estimator from a checkpoint archive."""
        model, scheme = load_checkpoint(path)
        estimator = cls(
            backbone=model.config.backbone,
            bin_min_deg=scheme.min_deg,
            bin_max_deg=scheme.max_deg,
            n_bins=scheme.n_bins,
            pretrained=model.config.pretrained,
        )
        estimator.model_ = model
        estimator.scheme_ = scheme
        estimator.history_ = TrainingHistory()
        return estimator

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise ValueError(
                "this GazeEstimator is not fitted yet; call fit first")
