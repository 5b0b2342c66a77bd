"""Combined bin-classification / expectation-regression loss.

Per gaze angle the loss is

    total = H + beta * MSE

where ``H`` is the cross-entropy between the softmax of the logits and the
one-hot bin label (batch mean), and ``MSE`` is the mean squared error, in
degrees, between the expectation-decoded angle and the continuous target.
One such loss is computed independently for yaw and for pitch and the two
are summed into the scalar that training optimizes.

This module is the canonical, framework-free implementation: forward values
and analytic logit gradients in float64 numpy. The training loop mirrors it
with tensor ops for autodiff; tests pin the two paths together.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .binning import BinnedTarget, BinScheme

# Probabilities are clamped here before the log so a zero probability at the
# target bin yields a large finite loss instead of an error.
LOG_CLAMP = 1e-12


@dataclass(frozen=True)
class LossConfig:
    """Regression coefficient and the bin scheme the logits are defined over."""

    beta: float
    scheme: BinScheme

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")


@dataclass
class LossOutput:
    """Scalar loss with its components and the decoded per-sample angles."""

    total: float
    cross_entropy: float
    mse: float
    decoded_deg: np.ndarray


def stable_softmax(logits) -> np.ndarray:
    """Softmax along the last axis, shifted by the row max so large logits
    cannot overflow. Invariant to adding a constant to all logits."""
    arr = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("logits contain non-finite values")
    shifted = arr - arr.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def _target_arrays(targets) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(targets, BinnedTarget):
        targets = [targets]
    indices = np.array([t.bin_index for t in targets], dtype=np.int64)
    continuous = np.array([t.continuous_deg for t in targets], dtype=np.float64)
    return indices, continuous


def cross_entropy(probabilities, targets) -> float:
    """-log probability of the target bin, averaged over the batch.

    ``probabilities`` may be a single simplex vector with one target or a
    (batch, n_bins) array with a sequence of targets.
    """
    probs = np.asarray(probabilities, dtype=np.float64)
    squeeze = probs.ndim == 1
    if squeeze:
        probs = probs[None, :]
    indices, _ = _target_arrays(targets)
    if indices.shape[0] != probs.shape[0]:
        raise ValueError(
            f"got {probs.shape[0]} probability rows for {indices.shape[0]} targets")
    picked = probs[np.arange(probs.shape[0]), indices]
    return float(np.mean(-np.log(np.maximum(picked, LOG_CLAMP))))


def mean_squared_error(pred_deg, target_deg) -> float:
    """Mean of squared differences, computed in degrees."""
    pred = np.atleast_1d(np.asarray(pred_deg, dtype=np.float64))
    target = np.atleast_1d(np.asarray(target_deg, dtype=np.float64))
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    if pred.size == 0:
        raise ValueError("mean_squared_error needs at least one element")
    return float(np.mean((pred - target) ** 2))


def combined_loss(logits, targets: Sequence[BinnedTarget],
                  config: LossConfig) -> LossOutput:
    """Cross-entropy plus beta times the decoded-angle MSE for one angle.

    ``logits`` is (batch, n_bins); each row is softmaxed, its expectation
    decoded to degrees, and both components reduced by batch mean.
    """
    arr = np.asarray(logits, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    scheme = config.scheme
    if arr.shape[-1] != scheme.n_bins:
        raise ValueError(
            f"logits width {arr.shape[-1]} does not match scheme "
            f"n_bins {scheme.n_bins}")
    indices, continuous = _target_arrays(targets)
    if indices.shape[0] != arr.shape[0]:
        raise ValueError(
            f"got {arr.shape[0]} logit rows for {indices.shape[0]} targets")

    probs = stable_softmax(arr)
    ce = cross_entropy(probs, targets)
    decoded = probs @ scheme.centers
    mse = mean_squared_error(decoded, continuous)
    return LossOutput(total=ce + config.beta * mse, cross_entropy=ce,
                      mse=mse, decoded_deg=decoded)


def combined_loss_grad(logits, targets: Sequence[BinnedTarget],
                       config: LossConfig) -> np.ndarray:
    """Analytic gradient of ``combined_loss(...).total`` w.r.t. the logits.

    With p = softmax(z), d = p . centers and batch size N:

        dH/dz_j   = (p_j - onehot_j) / N
        dMSE/dz_j = 2 (d - y) p_j (centers_j - d) / N

    Valid away from the log clamp (which only caps the forward value).
    """
    arr = np.asarray(logits, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    scheme = config.scheme
    indices, continuous = _target_arrays(targets)
    n = arr.shape[0]

    probs = stable_softmax(arr)
    one_hot = np.zeros_like(probs)
    one_hot[np.arange(n), indices] = 1.0
    grad_ce = (probs - one_hot) / n

    decoded = probs @ scheme.centers
    residual = decoded - continuous
    grad_mse = (2.0 * residual[:, None] * probs
                * (scheme.centers[None, :] - decoded[:, None])) / n
    return grad_ce + config.beta * grad_mse


def total_gaze_loss(yaw_logits, pitch_logits,
                    yaw_targets: Sequence[BinnedTarget],
                    pitch_targets: Sequence[BinnedTarget],
                    config: LossConfig,
                    pitch_config: LossConfig | None = None,
                    ) -> tuple[float, LossOutput, LossOutput]:
    """Sum of the per-angle combined losses: the scalar training optimizes.

    The same config is used for both angles unless ``pitch_config`` is
    given; returns ``(total, yaw_output, pitch_output)``.
    """
    yaw_out = combined_loss(yaw_logits, yaw_targets, config)
    pitch_out = combined_loss(pitch_logits, pitch_targets,
                              pitch_config if pitch_config is not None else config)
    return yaw_out.total + pitch_out.total, yaw_out, pitch_out
