"""Training loop, angular-error evaluation, scope filters and
leave-one-subject-out cross-validation."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
import torch
from sklearn.base import clone

from .binning import BinScheme
from .datasets import Sample, TrainingExample
from .errors import TrainingDivergedError
from .geometry import angles_to_vector_array, angular_error_batch
from .losses import LOG_CLAMP
from .models import (
    DualHeadGazeModel,
    predict_gaze,
    preprocess_images,
    save_checkpoint,
)

SCOPES = ("all", "front180", "frontfacing")
FRONT_FACING_MAX_DEG = 20.0


@dataclass
class TrainConfig:
    """Optimization settings; defaults are the full-scale training recipe."""

    learning_rate: float = 1e-5
    epochs: int = 50
    batch_size: int = 16
    beta: float = 1.0
    optimizer: str = "adam"
    seed: int = 0
    checkpoint_dir: Path | None = None

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.beta >= 0:
            raise ValueError("beta must be >= 0")
        if self.optimizer != "adam":
            raise ValueError(f"unsupported optimizer {self.optimizer!r}")
        if self.checkpoint_dir is not None:
            self.checkpoint_dir = Path(self.checkpoint_dir)

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "beta": self.beta,
            "optimizer": self.optimizer,
            "seed": self.seed,
            "checkpoint_dir": (str(self.checkpoint_dir)
                               if self.checkpoint_dir else None),
        }


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    train_cross_entropy: float
    train_mse: float
    val_error_deg: float | None = None


@dataclass
class TrainingHistory:
    epochs: list[EpochStats] = field(default_factory=list)

    @property
    def final(self) -> EpochStats:
        return self.epochs[-1]

    @property
    def best_val(self) -> EpochStats | None:
        scored = [e for e in self.epochs if e.val_error_deg is not None]
        if not scored:
            return None
        return min(scored, key=lambda e: e.val_error_deg)


def _combined_loss_torch(logits: torch.Tensor, bin_idx: torch.Tensor,
                         continuous_deg: torch.Tensor, centers: torch.Tensor,
                         beta: float):
    """Tensor mirror of losses.combined_loss (same clamp, same reductions)."""
    probs = torch.softmax(logits, dim=-1)
    picked = probs[torch.arange(logits.shape[0]), bin_idx]
    ce = -torch.log(torch.clamp(picked, min=LOG_CLAMP)).mean()
    decoded = probs @ centers
    mse = ((decoded - continuous_deg) ** 2).mean()
    return ce + beta * mse, ce, mse


def _example_tensors(examples: Sequence[TrainingExample]):
    images = np.stack([ex.image for ex in examples])
    yaw_idx = torch.tensor([ex.yaw.bin_index for ex in examples])
    yaw_deg = torch.tensor([ex.yaw.continuous_deg for ex in examples],
                           dtype=torch.float32)
    pitch_idx = torch.tensor([ex.pitch.bin_index for ex in examples])
    pitch_deg = torch.tensor([ex.pitch.continuous_deg for ex in examples],
                             dtype=torch.float32)
    return images, yaw_idx, yaw_deg, pitch_idx, pitch_deg


def _training_step(model, optimizer, batch, centers, beta):
    images, yaw_idx, yaw_deg, pitch_idx, pitch_deg = batch
    optimizer.zero_grad()
    yaw_logits, pitch_logits = model(images)
    yaw_loss, yaw_ce, yaw_mse = _combined_loss_torch(
        yaw_logits, yaw_idx, yaw_deg, centers, beta)
    pitch_loss, pitch_ce, pitch_mse = _combined_loss_torch(
        pitch_logits, pitch_idx, pitch_deg, centers, beta)
    total = yaw_loss + pitch_loss
    if not torch.isfinite(total):
        return total, None, None
    total.backward()
    optimizer.step()
    return total, yaw_ce + pitch_ce, yaw_mse + pitch_mse


def train(model: DualHeadGazeModel, examples: Sequence[TrainingExample],
          scheme: BinScheme, config: TrainConfig,
          val_samples: Sequence[Sample] | None = None) -> TrainingHistory:
    """Optimize the summed per-angle losses over seeded shuffled batches.

    Checkpoints every epoch (plus ``final.pt`` and, with a validation set,
    ``best.pt``) when ``config.checkpoint_dir`` is set. Raises
    :class:`TrainingDivergedError` the moment the loss goes non-finite.
    """
    if not examples:
        raise ValueError("training set is empty")
    if scheme.n_bins != model.config.n_bins:
        raise ValueError(
            f"scheme has {scheme.n_bins} bins but the model was built "
            f"with {model.config.n_bins}")

    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    images, yaw_idx, yaw_deg, pitch_idx, pitch_deg = _example_tensors(examples)
    centers = torch.tensor(scheme.centers, dtype=torch.float32)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)

    checkpoint_dir = config.checkpoint_dir
    if checkpoint_dir is not None:
        checkpoint_dir.mkdir(parents=True, exist_ok=True)

    history = TrainingHistory()
    best_val = np.inf
    n = len(examples)
    for epoch in range(1, config.epochs + 1):
        model.train()
        order = rng.permutation(n)
        losses_sum = ce_sum = mse_sum = 0.0
        seen = 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            batch = (
                preprocess_images(images[idx], model.config),
                yaw_idx[idx], yaw_deg[idx], pitch_idx[idx], pitch_deg[idx],
            )
            total, ce, mse = _training_step(model, optimizer, batch,
                                            centers, config.beta)
            if ce is None:
                snapshot = None
                if checkpoint_dir is not None:
                    snapshot = checkpoint_dir / "diverged.pt"
                    save_checkpoint(model, scheme, snapshot)
                raise TrainingDivergedError(
                    epoch, start // config.batch_size,
                    float(total.detach()), snapshot)
            weight = len(idx)
            losses_sum += float(total.detach()) * weight
            ce_sum += float(ce.detach()) * weight
            mse_sum += float(mse.detach()) * weight
            seen += weight

        stats = EpochStats(
            epoch=epoch,
            train_loss=losses_sum / seen,
            train_cross_entropy=ce_sum / seen,
            train_mse=mse_sum / seen,
        )
        if val_samples:
            report = evaluate(_ModelPredictor(model, scheme), val_samples)
            stats.val_error_deg = report.mean_error
        history.epochs.append(stats)

        if checkpoint_dir is not None:
            save_checkpoint(model, scheme,
                            checkpoint_dir / f"epoch_{epoch:03d}.pt")
            if stats.val_error_deg is not None and stats.val_error_deg < best_val:
                best_val = stats.val_error_deg
                save_checkpoint(model, scheme, checkpoint_dir / "best.pt")
    if checkpoint_dir is not None:
        save_checkpoint(model, scheme, checkpoint_dir / "final.pt")
    return history


def first_step_parameter_delta(model: DualHeadGazeModel,
                               examples: Sequence[TrainingExample],
                               scheme: BinScheme,
                               config: TrainConfig) -> np.ndarray:
    """Concatenated parameter change after a single optimization step on the
    first (seed-shuffled) batch. Used to verify the regression path is live:
    different beta must move the parameters differently."""
    model = copy.deepcopy(model)
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    images, yaw_idx, yaw_deg, pitch_idx, pitch_deg = _example_tensors(examples)
    idx = rng.permutation(len(examples))[:config.batch_size]
    before = torch.cat([p.detach().flatten().clone()
                        for p in model.parameters()])
    centers = torch.tensor(scheme.centers, dtype=torch.float32)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    batch = (preprocess_images(images[idx], model.config),
             yaw_idx[idx], yaw_deg[idx], pitch_idx[idx], pitch_deg[idx])
    model.train()
    _training_step(model, optimizer, batch, centers, config.beta)
    after = torch.cat([p.detach().flatten() for p in model.parameters()])
    return (after - before).numpy()


class Predictor(Protocol):
    """Anything that maps an image batch to (n, 2) [pitch, yaw] radians."""

    def predict(self, images: np.ndarray) -> np.ndarray: ...


class _ModelPredictor:
    """Predictor view over a raw model + scheme (used internally)."""

    def __init__(self, model: DualHeadGazeModel, scheme: BinScheme):
        self.model = model
        self.scheme = scheme

    def predict(self, images: np.ndarray) -> np.ndarray:
        angles = predict_gaze(self.model, images, self.scheme)
        return np.array([[a.pitch, a.yaw] for a in angles])


def gaze_to_axis_angles_deg(samples: Sequence[Sample]) -> np.ndarray:
    """Angle between each sample's gaze and the camera axis, degrees."""
    vectors = _label_vectors(samples)
    axis = np.tile([0.0, 0.0, -1.0], (len(samples), 1))
    return angular_error_batch(vectors, axis)


def _label_vectors(samples: Sequence[Sample]) -> np.ndarray:
    pitch = np.array([s.gaze.pitch for s in samples])
    yaw = np.array([s.gaze.yaw for s in samples])
    return angles_to_vector_array(pitch, yaw)


def scope_mask(samples: Sequence[Sample], scope: str) -> np.ndarray:
    """Boolean mask selecting the samples inside an evaluation scope.

    front180 keeps gazes with a toward-camera component (z < 0);
    frontfacing keeps gazes within 20 degrees of the camera axis.
    """
    if scope not in SCOPES:
        raise ValueError(f"unknown scope {scope!r}; expected one of {SCOPES}")
    if scope == "all":
        return np.ones(len(samples), dtype=bool)
    if scope == "front180":
        return _label_vectors(samples)[:, 2] < 0
    return gaze_to_axis_angles_deg(samples) <= FRONT_FACING_MAX_DEG


def filter_scope(samples: Sequence[Sample], scope: str) -> list[Sample]:
    mask = scope_mask(samples, scope)
    kept = [s for s, keep in zip(samples, mask) if keep]
    if not kept:
        raise ValueError(f"no samples left after applying scope {scope!r}")
    return kept


@dataclass
class EvalReport:
    """Angular errors for one evaluation pass."""

    per_sample_errors: np.ndarray
    mean_error: float
    per_subject: dict[str, float]
    scope: str = "all"
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mean_error_deg": self.mean_error,
            "per_subject": self.per_subject,
            "scope": self.scope,
            "n_samples": int(self.per_sample_errors.size),
            "provenance": self.provenance,
        }


def evaluate(predictor: Predictor, samples: Sequence[Sample],
             scope: str = "all", provenance: dict | None = None) -> EvalReport:
    """Mean angular error between labels and predictions over a scope.

    Per-sample errors are the angle between the unit vectors of the labeled
    and predicted angles; the report aggregates the overall mean plus one
    mean per subject.
    """
    kept = filter_scope(list(samples), scope)
    images = np.stack([s.image for s in kept])
    predicted = np.asarray(predictor.predict(images))
    truth = _label_vectors(kept)
    predicted_vec = angles_to_vector_array(predicted[:, 0], predicted[:, 1])
    errors = angular_error_batch(truth, predicted_vec)

    per_subject: dict[str, list[float]] = {}
    for sample, err in zip(kept, errors):
        per_subject.setdefault(sample.subject_id, []).append(float(err))
    subject_means = {subject: float(np.mean(vals))
                     for subject, vals in sorted(per_subject.items())}
    return EvalReport(
        per_sample_errors=errors,
        mean_error=float(np.mean(errors)),
        per_subject=subject_means,
        scope=scope,
        provenance=provenance or {},
    )


@dataclass
class LosoResult:
    """One report per held-out subject plus the unweighted grand mean."""

    per_subject: dict[str, EvalReport]
    grand_mean: float

    def to_dict(self) -> dict:
        return {
            "grand_mean_deg": self.grand_mean,
            "per_subject": {s: r.to_dict() for s, r in self.per_subject.items()},
        }


def loso_cv(estimator, samples: Sequence[Sample],
            scope: str = "all") -> LosoResult:
    """Leave-one-subject-out cross-validation.

    One fold per subject in sorted order: a fresh clone of the estimator is
    fitted on every other subject and evaluated on the held-out one. The
    grand mean is the unweighted mean of the per-subject means.
    """
    samples = list(samples)
    subjects = sorted({s.subject_id for s in samples})
    if len(subjects) < 2:
        raise ValueError("leave-one-subject-out needs at least 2 subjects")

    per_subject: dict[str, EvalReport] = {}
    for held_out in subjects:
        train_samples = [s for s in samples if s.subject_id != held_out]
        eval_samples = [s for s in samples if s.subject_id == held_out]
        fold_estimator = clone(estimator)
        fold_estimator.fit_samples(train_samples)
        per_subject[held_out] = evaluate(
            fold_estimator, eval_samples, scope=scope,
            provenance={"held_out_subject": held_out})
    grand_mean = float(np.mean([r.mean_error for r in per_subject.values()]))
    return LosoResult(per_subject=per_subject, grand_mean=grand_mean)
