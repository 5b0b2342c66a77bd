"""Dual-head gaze network: a shared convolutional backbone feeding two
independent fully-connected logit heads, one per gaze angle."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from . import binning, losses
from .binning import BinScheme
from .geometry import GazeAngles

BACKBONES = ("toy-cnn", "resnet50-pretrained")
CHECKPOINT_VERSION = 1

# Standard per-channel statistics for [0, 1]-scaled RGB input; required for
# the pretrained backbone and kept identical for the toy one.
CHANNEL_MEAN = (0.485, 0.456, 0.406)
CHANNEL_STD = (0.229, 0.224, 0.225)

TOY_MIN_INPUT = 32


@dataclass
class ModelConfig:
    backbone: str = "toy-cnn"
    n_bins: int = 28
    input_size: tuple[int, int] = (224, 224)
    pretrained: bool = False
    channel_mean: tuple[float, float, float] = CHANNEL_MEAN
    channel_std: tuple[float, float, float] = CHANNEL_STD

    def __post_init__(self):
        if self.backbone not in BACKBONES:
            raise ValueError(
                f"unknown backbone {self.backbone!r}; expected one of {BACKBONES}")
        if self.n_bins < 2:
            raise ValueError("n_bins must be >= 2")

    def to_dict(self) -> dict:
        return {
            "backbone": self.backbone,
            "n_bins": self.n_bins,
            "input_size": list(self.input_size),
            "pretrained": self.pretrained,
            "channel_mean": list(self.channel_mean),
            "channel_std": list(self.channel_std),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        return cls(
            backbone=data["backbone"],
            n_bins=int(data["n_bins"]),
            input_size=tuple(data["input_size"]),
            pretrained=bool(data["pretrained"]),
            channel_mean=tuple(data["channel_mean"]),
            channel_std=tuple(data["channel_std"]),
        )


class ToyBackbone(nn.Module):
    """Small strided conv stack for desk-scale runs.

    The final pooling keeps a 4x4 spatial grid (rather than collapsing to
    1x1) because the heads must be able to read absolute position out of
    the features; input can be any size >= 32.
    """

    def __init__(self):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(3, 16, kernel_size=3, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(16, 32, kernel_size=3, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(32, 64, kernel_size=3, stride=2, padding=1),
            nn.ReLU(inplace=True),
        )
        self.pool = nn.AdaptiveAvgPool2d(4)
        self.out_features = 64 * 4 * 4

    def forward(self, x):
        x = self.features(x)
        x = self.pool(x)
        return torch.flatten(x, 1)


class DualHeadGazeModel(nn.Module):
    """Shared backbone with independent yaw and pitch logit heads.

    Both heads consume the identical feature vector; forward returns
    ``(yaw_logits, pitch_logits)``.
    """

    def __init__(self, backbone: nn.Module, feature_dim: int,
                 config: ModelConfig):
        super().__init__()
        self.config = config
        self.backbone = backbone
        self.yaw_head = nn.Linear(feature_dim, config.n_bins)
        self.pitch_head = nn.Linear(feature_dim, config.n_bins)
        nn.init.zeros_(self.yaw_head.bias)
        nn.init.zeros_(self.pitch_head.bias)

    def forward(self, images: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        if images.ndim != 4 or images.shape[1] != 3:
            raise ValueError(
                f"images must be (batch, 3, H, W), got {tuple(images.shape)}")
        if images.shape[0] == 0:
            raise ValueError("images batch is empty")
        height, width = images.shape[2], images.shape[3]
        if self.config.backbone == "toy-cnn":
            if min(height, width) < TOY_MIN_INPUT:
                raise ValueError(
                    f"toy-cnn input must be at least {TOY_MIN_INPUT}px, "
                    f"got {height}x{width}")
        elif (height, width) != tuple(self.config.input_size):
            raise ValueError(
                f"images are {height}x{width} but the model expects "
                f"{self.config.input_size[0]}x{self.config.input_size[1]}")
        features = self.backbone(images)
        return self.yaw_head(features), self.pitch_head(features)


def _load_resnet50(pretrained: bool) -> nn.Module:
    # Imported lazily: torchvision is only needed for this backbone.
    from torchvision.models import ResNet50_Weights, resnet50

    weights = ResNet50_Weights.IMAGENET1K_V1 if pretrained else None
    return resnet50(weights=weights)


def build_model(config: ModelConfig, seed: int | None = None) -> DualHeadGazeModel:
    """Construct the dual-head model; same seed gives identical parameters.

    When pretrained weights are requested but cannot be fetched, falls back
    to random initialization with a warning rather than failing the run.
    """
    if seed is not None:
        torch.manual_seed(seed)
    if config.backbone == "toy-cnn":
        backbone = ToyBackbone()
        feature_dim = backbone.out_features
    else:
        try:
            resnet = _load_resnet50(config.pretrained)
        except Exception as exc:  # fetch failures, offline environments
            if not config.pretrained:
                raise
            warnings.warn(
                f"could not fetch pretrained backbone weights ({exc}); "
                "falling back to random initialization")
            resnet = _load_resnet50(False)
        feature_dim = resnet.fc.in_features
        resnet.fc = nn.Identity()
        backbone = resnet
    return DualHeadGazeModel(backbone, feature_dim, config)


def preprocess_images(images: np.ndarray, config: ModelConfig) -> torch.Tensor:
    """Batch of HxWx3 images (uint8 or float) -> standardized NCHW tensor.

    Inputs are scaled to [0, 1] (uint8 divided by 255, floats assumed to be
    in [0, 1] already) then standardized with the config's channel stats.
    """
    arr = np.asarray(images)
    if arr.ndim != 4 or arr.shape[-1] != 3:
        raise ValueError(
            f"images must be (batch, H, W, 3), got {arr.shape}")
    scaled = arr.astype(np.float32)
    if arr.dtype == np.uint8:
        scaled = scaled / 255.0
    mean = np.asarray(config.channel_mean, dtype=np.float32)
    std = np.asarray(config.channel_std, dtype=np.float32)
    standardized = (scaled - mean) / std
    return torch.from_numpy(np.ascontiguousarray(
        standardized.transpose(0, 3, 1, 2)))


def predict_logits(model: DualHeadGazeModel, images: np.ndarray,
                   batch_size: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Eval-mode forward over numpy images; returns (yaw, pitch) logits."""
    model.eval()
    yaw_chunks, pitch_chunks = [], []
    with torch.no_grad():
        for start in range(0, len(images), batch_size):
            batch = preprocess_images(images[start:start + batch_size],
                                      model.config)
            yaw_logits, pitch_logits = model(batch)
            yaw_chunks.append(yaw_logits.numpy())
            pitch_chunks.append(pitch_logits.numpy())
    return np.concatenate(yaw_chunks), np.concatenate(pitch_chunks)


def predict_gaze(model: DualHeadGazeModel, images: np.ndarray,
                 scheme: BinScheme, batch_size: int = 64) -> list[GazeAngles]:
    """Decode the model's bin distributions into continuous gaze angles.

    Per angle: softmax over logits, expectation over bin centers, degrees
    to radians. Pitch is clamped into [-pi/2, pi/2] (wide schemes can in
    principle decode outside the spherical domain).
    """
    if scheme.n_bins != model.config.n_bins:
        raise ValueError(
            f"scheme has {scheme.n_bins} bins but the model was built "
            f"with {model.config.n_bins}")
    yaw_logits, pitch_logits = predict_logits(model, images, batch_size)
    yaw_deg = binning.decode_expectation(losses.stable_softmax(yaw_logits),
                                         scheme)
    pitch_deg = binning.decode_expectation(losses.stable_softmax(pitch_logits),
                                           scheme)
    yaw_rad = np.radians(np.atleast_1d(yaw_deg))
    pitch_rad = np.clip(np.radians(np.atleast_1d(pitch_deg)),
                        -math.pi / 2, math.pi / 2)
    return [GazeAngles(float(p), float(y))
            for p, y in zip(pitch_rad, yaw_rad)]


def save_checkpoint(model: DualHeadGazeModel, scheme: BinScheme, path) -> None:
    """Write a single archive with parameters, config, scheme and version."""
    torch.save({
        "format_version": CHECKPOINT_VERSION,
        "model_config": model.config.to_dict(),
        "bin_scheme": {"min_deg": scheme.min_deg, "max_deg": scheme.max_deg,
                       "n_bins": scheme.n_bins},
        "state_dict": model.state_dict(),
    }, path)


def load_checkpoint(path) -> tuple[DualHeadGazeModel, BinScheme]:
    """Load a checkpoint archive, validating version and bin consistency."""
    payload = torch.load(path, map_location="cpu", weights_only=False)
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(
            f"unsupported checkpoint format version {version!r} "
            f"(expected {CHECKPOINT_VERSION})")
    config = ModelConfig.from_dict(payload["model_config"])
    raw = payload["bin_scheme"]
    scheme = BinScheme(raw["min_deg"], raw["max_deg"], raw["n_bins"])
    if scheme.n_bins != config.n_bins:
        raise ValueError(
            f"checkpoint is inconsistent: scheme has {scheme.n_bins} bins, "
            f"model config has {config.n_bins}")
    # Build with pretrained=False: the stored state_dict supplies all
    # weights, so there is nothing to fetch at load time.
    build_config = ModelConfig.from_dict({**config.to_dict(),
                                          "pretrained": False})
    model = build_model(build_config, seed=0)
    model.config = config
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, scheme
