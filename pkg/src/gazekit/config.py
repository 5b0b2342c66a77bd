"""Declarative run configuration: one YAML file drives every CLI command,
with command-line flags taking precedence over file values."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .binning import DEFAULT_SCHEMES, BinScheme
from .datasets import DatasetSpec, SyntheticConfig
from .errors import ConfigError
from .models import ModelConfig
from .training import SCOPES, TrainConfig

_SECTIONS = ("dataset", "scheme", "model", "train", "eval", "output_dir")


@dataclass
class RunConfig:
    """Merged view of everything a command needs, cross-validated."""

    dataset_kind: str = "synthetic"
    dataset_root: Path | None = None
    split: str = "all"
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    scheme: BinScheme | None = None
    backbone: str = "toy-cnn"
    pretrained: bool = False
    train: TrainConfig = field(default_factory=TrainConfig)
    scope: str = "all"
    output_dir: Path = Path("runs/latest")

    def __post_init__(self):
        if self.scheme is None:
            try:
                self.scheme = DEFAULT_SCHEMES[self.dataset_kind]()
            except KeyError:
                raise ConfigError(
                    f"dataset.kind: unknown kind {self.dataset_kind!r}")
        if self.scope not in SCOPES:
            raise ConfigError(f"eval.scope: unknown scope {self.scope!r}")
        self.output_dir = Path(self.output_dir)
        if self.dataset_root is not None:
            self.dataset_root = Path(self.dataset_root)

    def dataset_spec(self, split: str | None = None) -> DatasetSpec:
        return DatasetSpec(
            kind=self.dataset_kind,
            root=self.dataset_root,
            scheme=self.scheme,
            split=self.split if split is None else split,
            synthetic=self.synthetic,
        )

    def model_config(self, input_size: tuple[int, int]) -> ModelConfig:
        return ModelConfig(
            backbone=self.backbone,
            n_bins=self.scheme.n_bins,
            input_size=input_size,
            pretrained=self.pretrained,
        )

    def to_snapshot(self) -> dict:
        """Full picture of the run for the metrics file (reproducibility)."""
        return {
            "dataset": {
                "kind": self.dataset_kind,
                "root": str(self.dataset_root) if self.dataset_root else None,
                "split": self.split,
                "synthetic": {
                    "n_samples": self.synthetic.n_samples,
                    "image_size": self.synthetic.image_size,
                    "noise_level": self.synthetic.noise_level,
                    "angle_range_deg": self.synthetic.angle_range_deg,
                    "seed": self.synthetic.seed,
                },
            },
            "scheme": {
                "min_deg": self.scheme.min_deg,
                "max_deg": self.scheme.max_deg,
                "n_bins": self.scheme.n_bins,
            },
            "model": {"backbone": self.backbone, "pretrained": self.pretrained},
            "train": self.train.to_dict(),
            "eval": {"scope": self.scope},
            "output_dir": str(self.output_dir),
        }


def _build(section: str, cls, data: dict, path: str):
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _parse_config_dict(data: dict) -> RunConfig:
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    kwargs = {}
    dataset = dict(data.get("dataset") or {})
    synthetic = dataset.pop("synthetic", None)
    if dataset:
        allowed = {"kind", "root", "split"}
        unknown = set(dataset) - allowed
        if unknown:
            raise ConfigError(f"dataset: unknown keys {sorted(unknown)}")
        if "kind" in dataset:
            kwargs["dataset_kind"] = dataset["kind"]
        if "root" in dataset and dataset["root"] is not None:
            kwargs["dataset_root"] = Path(dataset["root"])
        if "split" in dataset:
            kwargs["split"] = dataset["split"]
    if synthetic is not None:
        kwargs["synthetic"] = _build("synthetic", SyntheticConfig,
                                     dict(synthetic), "dataset.synthetic")

    if data.get("scheme") is not None:
        kwargs["scheme"] = _build("scheme", BinScheme, dict(data["scheme"]),
                                  "scheme")

    # The stock recipe (lr 1e-5, 50 epochs) is sized for full-scale image
    # datasets; desk-scale synthetic runs get faster defaults unless the
    # config says otherwise.
    if kwargs.get("dataset_kind", "synthetic") == "synthetic":
        train_section = dict(data.get("train") or {})
        train_section.setdefault("learning_rate", 1e-3)
        train_section.setdefault("epochs", 15)
        data = {**data, "train": train_section}

    model = dict(data.get("model") or {})
    if model:
        unknown = set(model) - {"backbone", "pretrained"}
        if unknown:
            raise ConfigError(f"model: unknown keys {sorted(unknown)}")
        kwargs["backbone"] = model.get("backbone", "toy-cnn")
        kwargs["pretrained"] = bool(model.get("pretrained", False))

    if data.get("train") is not None:
        kwargs["train"] = _build("train", TrainConfig, dict(data["train"]),
                                 "train")

    eval_section = dict(data.get("eval") or {})
    if eval_section:
        unknown = set(eval_section) - {"scope"}
        if unknown:
            raise ConfigError(f"eval: unknown keys {sorted(unknown)}")
        kwargs["scope"] = eval_section["scope"]

    if data.get("output_dir") is not None:
        kwargs["output_dir"] = Path(data["output_dir"])

    try:
        return RunConfig(**kwargs)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def load_run_config(path: Path | str | None = None,
                    overrides: dict | None = None) -> RunConfig:
    """Load the YAML config (or defaults) and apply CLI overrides.

    Recognized overrides: seed, beta, dataset, scope, out, root, split.
    """
    data: dict = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        loaded = yaml.safe_load(path.read_text())
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config root must be a mapping, got "
                              f"{type(loaded).__name__}")
        data = loaded

    for section in ("dataset", "train", "eval"):
        if data.get(section) is None:
            data[section] = {}
        elif not isinstance(data[section], dict):
            raise ConfigError(f"{section}: must be a mapping")

    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    if "dataset" in overrides:
        data["dataset"]["kind"] = overrides["dataset"]
    if "root" in overrides:
        data["dataset"]["root"] = overrides["root"]
    if "split" in overrides:
        data["dataset"]["split"] = overrides["split"]
    if "seed" in overrides:
        data["train"]["seed"] = overrides["seed"]
        synthetic = dict(data["dataset"].get("synthetic") or {})
        synthetic["seed"] = overrides["seed"]
        data["dataset"]["synthetic"] = synthetic
    if "beta" in overrides:
        data["train"]["beta"] = overrides["beta"]
    if "scope" in overrides:
        data["eval"]["scope"] = overrides["scope"]
    if "out" in overrides:
        data["output_dir"] = overrides["out"]
    return _parse_config_dict(data)
