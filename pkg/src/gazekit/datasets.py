"""Dataset ingestion and the synthetic desk-scale dataset generator.

On-disk layout (the "normalized layout" every loader reads):

    root/
      <subject>/
        annotations.txt     one sample per line, whitespace separated:
                              <rel_image_path> <pitch_deg> <yaw_deg>
                            or
                              <rel_image_path> <g_x> <g_y> <g_z> [extras...]
        <images...>
      splits.txt            optional manifest: "<subject>/<rel_path> <split>"
                            with split in {train, val, test}

Image paths are relative to the subject directory. Lines with three gaze
components are converted to angles on load; trailing extra fields (head
pose etc.) are ignored. Synthetic datasets can be exported to this layout
for end-to-end testing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .binning import BinnedTarget, BinScheme, bin_target
from .errors import AnnotationParseError
from .geometry import (
    GazeAngles,
    GazeVector,
    NormalizationParams,
    angles_to_vector,
    normalize_sample,
    vector_to_angles,
)

DATASET_KINDS = ("mpiigaze", "gaze360", "synthetic")
SPLITS = ("train", "val", "test", "all")
ANNOTATION_FILE = "annotations.txt"
MANIFEST_FILE = "splits.txt"

# The synthetic generator always distributes samples over this many
# pseudo-subjects (round-robin) so LOSO has folds to work with.
SYNTHETIC_SUBJECTS = 4


@dataclass
class SampleMeta:
    source: str
    split: str = "all"


@dataclass
class Sample:
    """One face crop with its gaze label and owning subject."""

    image: np.ndarray
    gaze: GazeAngles
    subject_id: str
    meta: SampleMeta


@dataclass
class SyntheticConfig:
    """Deterministic synthetic dataset: same config, identical samples."""

    n_samples: int = 2000
    image_size: int = 64
    noise_level: float = 0.1
    angle_range_deg: float = 30.0
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.image_size < 32:
            raise ValueError("image_size must be >= 32")
        if not 0.0 <= self.noise_level <= 1.0:
            raise ValueError("noise_level must lie in [0, 1]")
        if not 0.0 < self.angle_range_deg <= 90.0:
            raise ValueError("angle_range_deg must lie in (0, 90]")

    @property
    def disk_radius(self) -> float:
        return self.image_size / 8.0

    @property
    def half_span(self) -> float:
        # Largest center offset that keeps the disk fully inside the frame.
        return (self.image_size - 1) / 2.0 - (self.disk_radius + 2.0)


@dataclass
class DatasetSpec:
    kind: str
    root: Path | None
    scheme: BinScheme
    split: str = "all"
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)

    def __post_init__(self):
        if self.kind not in DATASET_KINDS:
            raise ValueError(
                f"unknown dataset kind {self.kind!r}; expected {DATASET_KINDS}")
        if self.split not in SPLITS:
            raise ValueError(
                f"unknown split {self.split!r}; expected one of {SPLITS}")
        if self.root is not None:
            self.root = Path(self.root)


def angles_to_disk_center(pitch_deg: float, yaw_deg: float,
                          config: SyntheticConfig) -> tuple[float, float]:
    """Where the bright disk sits for a given gaze: linear in both angles.

    Yaw moves the disk right (+x) and pitch moves it up (-y in image
    coordinates), full range mapping onto +/- half_span pixels.
    """
    mid = (config.image_size - 1) / 2.0
    cx = mid + (yaw_deg / config.angle_range_deg) * config.half_span
    cy = mid - (pitch_deg / config.angle_range_deg) * config.half_span
    return cx, cy


def disk_center_to_angles(cx: float, cy: float,
                          config: SyntheticConfig) -> tuple[float, float]:
    """Exact inverse of :func:`angles_to_disk_center`."""
    mid = (config.image_size - 1) / 2.0
    yaw_deg = (cx - mid) / config.half_span * config.angle_range_deg
    pitch_deg = (mid - cy) / config.half_span * config.angle_range_deg
    return pitch_deg, yaw_deg


def brightness_centroid(image: np.ndarray) -> tuple[float, float]:
    """Intensity-weighted centroid (cx, cy) of an image, channel-averaged."""
    gray = np.asarray(image, dtype=np.float64)
    if gray.ndim == 3:
        gray = gray.mean(axis=-1)
    total = gray.sum()
    if total == 0:
        raise ValueError("image is all black; centroid undefined")
    ys, xs = np.mgrid[0:gray.shape[0], 0:gray.shape[1]]
    return float((xs * gray).sum() / total), float((ys * gray).sum() / total)


def _render_disk(config: SyntheticConfig, cx: float, cy: float) -> np.ndarray:
    coords = np.arange(config.image_size, dtype=np.float64)
    dist = np.hypot(coords[None, :] - cx, coords[:, None] - cy)
    # 1px anti-aliased edge keeps the centroid at the analytic center.
    return np.clip(config.disk_radius + 0.5 - dist, 0.0, 1.0)


def generate_synthetic(config: SyntheticConfig) -> list[Sample]:
    """Render the bright-disk dataset whose disk position encodes the gaze.

    Labels are exact by construction; noise (when enabled) is additive
    Gaussian per channel. Subjects s00..s03 are assigned round-robin.
    """
    rng = np.random.default_rng(config.seed)
    samples = []
    for i in range(config.n_samples):
        pitch_deg = rng.uniform(-config.angle_range_deg, config.angle_range_deg)
        yaw_deg = rng.uniform(-config.angle_range_deg, config.angle_range_deg)
        cx, cy = angles_to_disk_center(pitch_deg, yaw_deg, config)
        disk = _render_disk(config, cx, cy) * 255.0
        image = np.repeat(disk[:, :, None], 3, axis=2)
        if config.noise_level > 0:
            image = image + rng.normal(
                0.0, config.noise_level * 64.0, size=image.shape)
        image = np.clip(image, 0, 255).astype(np.uint8)
        samples.append(Sample(
            image=image,
            gaze=GazeAngles.from_degrees(pitch_deg, yaw_deg),
            subject_id=f"s{i % SYNTHETIC_SUBJECTS:02d}",
            meta=SampleMeta(source=f"synthetic:{config.seed}/{i}"),
        ))
    return samples


def _parse_annotation_line(path: Path, line_number: int, line: str,
                           subject_dir: Path) -> tuple[str, GazeAngles]:
    tokens = line.split()
    if len(tokens) < 3:
        raise AnnotationParseError(
            path, line_number,
            f"expected an image path plus 2 angles or 3 gaze components, "
            f"got {len(tokens)} fields")
    rel_path = tokens[0]
    try:
        values = [float(tok) for tok in tokens[1:]]
    except ValueError as exc:
        raise AnnotationParseError(path, line_number,
                                   f"non-numeric field: {exc}") from None
    if any(not math.isfinite(v) for v in values):
        raise AnnotationParseError(path, line_number, "non-finite gaze value")
    try:
        if len(values) == 2:
            gaze = GazeAngles.from_degrees(values[0], values[1])
        else:
            gaze = vector_to_angles(GazeVector(values[0], values[1], values[2]))
    except ValueError as exc:
        raise AnnotationParseError(path, line_number, str(exc)) from None
    if not (subject_dir / rel_path).is_file():
        raise AnnotationParseError(path, line_number,
                                   f"image file not found: {rel_path}")
    return rel_path, gaze


def _read_manifest(root: Path) -> dict[str, str]:
    manifest_path = root / MANIFEST_FILE
    manifest = {}
    if not manifest_path.is_file():
        return manifest
    with open(manifest_path) as handle:
        for line_number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if len(tokens) != 2 or tokens[1] not in ("train", "val", "test"):
                raise AnnotationParseError(
                    manifest_path, line_number,
                    "expected '<subject>/<rel_path> {train|val|test}'")
            manifest[tokens[0]] = tokens[1]
    return manifest


def load_dataset(spec: DatasetSpec) -> list[Sample]:
    """Load every sample the spec selects, in deterministic path order.

    Synthetic datasets are generated in memory; the other kinds read the
    normalized layout documented in the module docstring. Split filtering
    (train/val/test) requires the manifest file.
    """
    if spec.kind == "synthetic":
        return generate_synthetic(spec.synthetic)

    if spec.root is None or not spec.root.is_dir():
        raise FileNotFoundError(f"dataset root not found: {spec.root}")
    subject_dirs = sorted(
        d for d in spec.root.iterdir()
        if d.is_dir() and (d / ANNOTATION_FILE).is_file())
    if not subject_dirs:
        raise FileNotFoundError(
            f"no subject directories with {ANNOTATION_FILE} under {spec.root}")

    manifest = _read_manifest(spec.root)
    if spec.split != "all" and not manifest:
        raise ValueError(
            f"split={spec.split!r} requested but {spec.root / MANIFEST_FILE} "
            "does not exist")

    samples = []
    for subject_dir in subject_dirs:
        annotation_path = subject_dir / ANNOTATION_FILE
        with open(annotation_path) as handle:
            lines = [(i, ln.strip()) for i, ln in enumerate(handle, start=1)]
        for line_number, line in lines:
            if not line or line.startswith("#"):
                continue
            rel_path, gaze = _parse_annotation_line(
                annotation_path, line_number, line, subject_dir)
            key = f"{subject_dir.name}/{rel_path}"
            if manifest and key not in manifest:
                raise AnnotationParseError(
                    spec.root / MANIFEST_FILE, 0,
                    f"sample {key} is missing from the split manifest")
            split = manifest.get(key, "all")
            if spec.split != "all" and split != spec.split:
                continue
            image = cv2.imread(str(subject_dir / rel_path), cv2.IMREAD_COLOR)
            if image is None:
                raise AnnotationParseError(annotation_path, line_number,
                                           f"unreadable image: {rel_path}")
            samples.append(Sample(
                image=cv2.cvtColor(image, cv2.COLOR_BGR2RGB),
                gaze=gaze,
                subject_id=subject_dir.name,
                meta=SampleMeta(source=key, split=split),
            ))
    if not samples:
        raise ValueError(
            f"no samples selected from {spec.root} with split={spec.split!r}")
    return samples


def export_dataset(samples: list[Sample], root: Path,
                   store_vectors: bool = False) -> int:
    """Write samples out in the normalized layout; returns the sample count.

    Angles are stored with 12 decimals so a re-import reproduces the labels
    to well below 1e-9 degrees. A split manifest is written only when some
    sample carries a non-default split tag.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    per_subject_counter: dict[str, int] = {}
    manifest_lines = []
    annotation_handles: dict[str, list[str]] = {}

    for sample in samples:
        subject = sample.subject_id
        index = per_subject_counter.get(subject, 0)
        per_subject_counter[subject] = index + 1
        subject_dir = root / subject
        subject_dir.mkdir(exist_ok=True)
        image_name = f"img_{index:05d}.png"
        bgr = cv2.cvtColor(np.ascontiguousarray(sample.image),
                           cv2.COLOR_RGB2BGR)
        if not cv2.imwrite(str(subject_dir / image_name), bgr):
            raise OSError(f"failed to write {subject_dir / image_name}")
        if store_vectors:
            vec = angles_to_vector(sample.gaze).as_array()
            line = (f"{image_name} {vec[0]:.15f} {vec[1]:.15f} {vec[2]:.15f}")
        else:
            line = (f"{image_name} {sample.gaze.pitch_deg:.12f} "
                    f"{sample.gaze.yaw_deg:.12f}")
        annotation_handles.setdefault(subject, []).append(line)
        if sample.meta.split != "all":
            manifest_lines.append(f"{subject}/{image_name} {sample.meta.split}")

    for subject, lines in annotation_handles.items():
        (root / subject / ANNOTATION_FILE).write_text("\n".join(lines) + "\n")
    if manifest_lines:
        (root / MANIFEST_FILE).write_text("\n".join(manifest_lines) + "\n")
    return len(samples)


@dataclass
class ConversionSummary:
    """What a preprocess run did: counts plus per-line failures."""

    subjects: int
    samples_written: int
    failures: list[tuple[str, int, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def _parse_raw_line(path: Path, line_number: int, line: str,
                    subject_dir: Path, camera: np.ndarray,
                    normalization: dict) -> Sample:
    """Raw layout line: image path, gaze vector (3), head rotation as a
    Rodrigues vector (3), face center in mm (3)."""
    tokens = line.split()
    if len(tokens) != 10:
        raise AnnotationParseError(
            path, line_number,
            f"raw lines need an image path plus 9 numbers, got {len(tokens)} fields")
    try:
        values = np.array([float(t) for t in tokens[1:]])
    except ValueError as exc:
        raise AnnotationParseError(path, line_number,
                                   f"non-numeric field: {exc}") from None
    image_path = subject_dir / tokens[0]
    image = cv2.imread(str(image_path), cv2.IMREAD_COLOR)
    if image is None:
        raise AnnotationParseError(path, line_number,
                                   f"unreadable image: {tokens[0]}")
    rotation, _ = cv2.Rodrigues(values[3:6])
    params = NormalizationParams(
        camera_matrix=camera,
        head_rotation=rotation,
        face_center=values[6:9],
        **normalization,
    )
    try:
        normalized = normalize_sample(cv2.cvtColor(image, cv2.COLOR_BGR2RGB),
                                      params, GazeVector(*values[0:3]))
    except ValueError as exc:
        raise AnnotationParseError(path, line_number, str(exc)) from None
    return Sample(
        image=normalized.image,
        gaze=vector_to_angles(normalized.gaze),
        subject_id=subject_dir.name,
        meta=SampleMeta(source=f"{subject_dir.name}/{tokens[0]}"),
    )


def convert_dataset(raw_root: Path, out_root: Path,
                    assume_normalized: bool = False,
                    target_distance: float = 600.0,
                    virtual_focal: float = 960.0,
                    output_size: tuple[int, int] = (224, 224),
                    ) -> ConversionSummary:
    """One-shot conversion of a raw layout into the normalized layout.

    With ``assume_normalized`` the source already carries final labels (the
    normalized-layout line formats) and is re-encoded as-is; otherwise each
    line must carry head pose and face center (see :func:`_parse_raw_line`)
    plus a per-subject ``camera.txt`` (3x3 intrinsics, row-major), and the
    virtual-camera warp is applied during conversion.

    Parse failures are collected per line rather than aborting the run.
    """
    raw_root = Path(raw_root)
    if not raw_root.is_dir():
        raise FileNotFoundError(f"raw dataset root not found: {raw_root}")
    subject_dirs = sorted(
        d for d in raw_root.iterdir()
        if d.is_dir() and (d / ANNOTATION_FILE).is_file())
    if not subject_dirs:
        raise FileNotFoundError(
            f"no subject directories with {ANNOTATION_FILE} under {raw_root}")

    normalization = {"target_distance": target_distance,
                     "virtual_focal": virtual_focal,
                     "output_size": output_size}
    samples: list[Sample] = []
    failures: list[tuple[str, int, str]] = []
    for subject_dir in subject_dirs:
        annotation_path = subject_dir / ANNOTATION_FILE
        camera = None
        if not assume_normalized:
            camera_path = subject_dir / "camera.txt"
            if not camera_path.is_file():
                failures.append((str(camera_path), 0, "camera.txt missing"))
                continue
            camera = np.loadtxt(camera_path).reshape(3, 3)
        with open(annotation_path) as handle:
            for line_number, line in enumerate(handle, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                try:
                    if assume_normalized:
                        rel_path, gaze = _parse_annotation_line(
                            annotation_path, line_number, line, subject_dir)
                        image = cv2.imread(str(subject_dir / rel_path),
                                           cv2.IMREAD_COLOR)
                        if image is None:
                            raise AnnotationParseError(
                                annotation_path, line_number,
                                f"unreadable image: {rel_path}")
                        samples.append(Sample(
                            image=cv2.cvtColor(image, cv2.COLOR_BGR2RGB),
                            gaze=gaze,
                            subject_id=subject_dir.name,
                            meta=SampleMeta(
                                source=f"{subject_dir.name}/{rel_path}"),
                        ))
                    else:
                        samples.append(_parse_raw_line(
                            annotation_path, line_number, line, subject_dir,
                            camera, normalization))
                except AnnotationParseError as exc:
                    failures.append((exc.path, exc.line_number, exc.reason))

    if samples:
        export_dataset(samples, out_root)
    return ConversionSummary(
        subjects=len({s.subject_id for s in samples}),
        samples_written=len(samples),
        failures=failures,
    )


@dataclass
class TrainingExample:
    """A sample prepared for the dual loss: binned + continuous per angle."""

    image: np.ndarray
    yaw: BinnedTarget
    pitch: BinnedTarget


def prepare_training_set(samples: list[Sample],
                         scheme: BinScheme) -> list[TrainingExample]:
    """Attach per-angle binned labels; preserves count and order."""
    return [
        TrainingExample(
            image=sample.image,
            yaw=bin_target(sample.gaze.yaw_deg, scheme),
            pitch=bin_target(sample.gaze.pitch_deg, scheme),
        )
        for sample in samples
    ]
