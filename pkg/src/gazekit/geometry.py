"""Gaze geometry: angle/vector conversions, the angular-error metric, and
virtual-camera image normalization.

Conventions (used consistently across the package):

* The camera looks along +z; a gaze toward the camera is roughly -z.
* ``pitch`` is vertical (positive = looking up), ``yaw`` horizontal
  (positive = looking left from the camera's point of view), both radians.
* A unit gaze vector is ``(-cos(pitch)*sin(yaw), -sin(pitch),
  -cos(pitch)*cos(yaw))`` so that (0, 0) maps to (0, 0, -1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import cv2
import numpy as np

from .errors import DegenerateGeometryError
from .validation import (
    as_finite_array,
    check_finite_scalar,
    check_rotation_matrix,
)

_HALF_PI = math.pi / 2


@dataclass(frozen=True)
class GazeAngles:
    """Spherical gaze direction in radians: pitch in [-pi/2, pi/2],
    yaw in [-pi, pi]."""

    pitch: float
    yaw: float

    def __post_init__(self):
        pitch = check_finite_scalar("pitch", self.pitch)
        yaw = check_finite_scalar("yaw", self.yaw)
        if abs(pitch) > _HALF_PI + 1e-12:
            raise ValueError(f"pitch {pitch} outside [-pi/2, pi/2]")
        if abs(yaw) > math.pi + 1e-12:
            raise ValueError(f"yaw {yaw} outside [-pi, pi]")
        object.__setattr__(self, "pitch", pitch)
        object.__setattr__(self, "yaw", yaw)

    @property
    def pitch_deg(self) -> float:
        return math.degrees(self.pitch)

    @property
    def yaw_deg(self) -> float:
        return math.degrees(self.yaw)

    @classmethod
    def from_degrees(cls, pitch_deg: float, yaw_deg: float) -> "GazeAngles":
        return cls(math.radians(pitch_deg), math.radians(yaw_deg))


@dataclass(frozen=True)
class GazeVector:
    """3D gaze direction, normalized to unit length on construction."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        vec = as_finite_array("gaze vector", [self.x, self.y, self.z])
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise ValueError("gaze vector must be non-zero")
        vec = vec / norm
        object.__setattr__(self, "x", float(vec[0]))
        object.__setattr__(self, "y", float(vec[1]))
        object.__setattr__(self, "z", float(vec[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)

    @classmethod
    def from_array(cls, vec) -> "GazeVector":
        vec = np.asarray(vec, dtype=np.float64).reshape(3)
        return cls(float(vec[0]), float(vec[1]), float(vec[2]))


def angles_to_vector(angles: GazeAngles) -> GazeVector:
    """Spherical angles -> unit gaze vector.

    (pitch=0, yaw=0) looks straight into the camera axis, i.e. (0, 0, -1).
    """
    cos_p = math.cos(angles.pitch)
    return GazeVector(
        -cos_p * math.sin(angles.yaw),
        -math.sin(angles.pitch),
        -cos_p * math.cos(angles.yaw),
    )


def vector_to_angles(vec: GazeVector) -> GazeAngles:
    """Inverse of :func:`angles_to_vector` on its valid domain."""
    arr = vec.as_array()
    pitch = math.asin(min(1.0, max(-1.0, -arr[1])))
    # At the pitch poles yaw is undefined; pick 0 rather than atan2(-0, -0).
    yaw = 0.0 if arr[0] == 0.0 and arr[2] == 0.0 \
        else math.atan2(-arr[0], -arr[2])
    return GazeAngles(pitch, yaw)


def angles_to_vector_array(pitch: np.ndarray, yaw: np.ndarray) -> np.ndarray:
    """Vectorized angle->vector conversion; returns an (n, 3) array."""
    pitch = np.asarray(pitch, dtype=np.float64)
    yaw = np.asarray(yaw, dtype=np.float64)
    cos_p = np.cos(pitch)
    return np.stack(
        [-cos_p * np.sin(yaw), -np.sin(pitch), -cos_p * np.cos(yaw)], axis=-1)


def vectors_to_angles_array(vectors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized vector->angle conversion; returns (pitch, yaw) arrays."""
    vec = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(vec, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("gaze vectors must be non-zero")
    unit = vec / norms
    pitch = np.arcsin(np.clip(-unit[..., 1], -1.0, 1.0))
    yaw = np.arctan2(-unit[..., 0], -unit[..., 2])
    return pitch, yaw


def angular_error(gaze: GazeVector | np.ndarray,
                  predicted: GazeVector | np.ndarray) -> float:
    """Angle between two gaze directions, in degrees.

    The cosine of the angle is the dot product of the normalized vectors,
    clamped to [-1, 1] before the arccos so rounding can never produce NaN.
    """
    a = gaze.as_array() if isinstance(gaze, GazeVector) else \
        as_finite_array("gaze", gaze, shape=(3,))
    b = predicted.as_array() if isinstance(predicted, GazeVector) else \
        as_finite_array("predicted", predicted, shape=(3,))
    return float(angular_error_batch(a[None, :], b[None, :])[0])


def angular_error_batch(gaze: np.ndarray, predicted: np.ndarray) -> np.ndarray:
    """Per-row angular error in degrees between two (n, 3) arrays."""
    a = np.asarray(gaze, dtype=np.float64)
    b = np.asarray(predicted, dtype=np.float64)
    norm_a = np.linalg.norm(a, axis=-1)
    norm_b = np.linalg.norm(b, axis=-1)
    if np.any(norm_a == 0) or np.any(norm_b == 0):
        raise ValueError("angular error is undefined for zero-norm vectors")
    cos = np.sum(a * b, axis=-1) / (norm_a * norm_b)
    return np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))


def rotation_roll(rotation: np.ndarray) -> float:
    """Roll component of a rotation matrix: the in-image-plane angle of its
    first column (the head x-axis). Zero when that axis has no vertical
    component in the camera frame."""
    rot = np.asarray(rotation, dtype=np.float64)
    return math.atan2(rot[1, 0], rot[0, 0])


@dataclass
class NormalizationParams:
    """Geometry needed to warp a face crop into the virtual camera.

    Distances are millimeters, focal lengths and output size pixels.
    """

    camera_matrix: np.ndarray
    head_rotation: np.ndarray
    face_center: np.ndarray
    target_distance: float = 600.0
    virtual_focal: float = 960.0
    output_size: tuple[int, int] = (224, 224)

    def validated(self) -> "NormalizationParams":
        camera = as_finite_array("camera_matrix", self.camera_matrix, (3, 3))
        if abs(np.linalg.det(camera)) < 1e-12:
            raise ValueError("camera_matrix is singular")
        rotation = check_rotation_matrix("head_rotation", self.head_rotation)
        center = as_finite_array("face_center", self.face_center, (3,))
        if float(np.linalg.norm(center)) == 0.0:
            raise DegenerateGeometryError("face center is at the camera origin")
        if self.target_distance <= 0:
            raise ValueError("target_distance must be > 0")
        if self.virtual_focal <= 0:
            raise ValueError("virtual_focal must be > 0")
        width, height = self.output_size
        if width <= 0 or height <= 0:
            raise ValueError("output_size must be positive")
        return NormalizationParams(camera, rotation, center,
                                   float(self.target_distance),
                                   float(self.virtual_focal),
                                   (int(width), int(height)))


@dataclass
class NormalizedSample:
    """Result of virtual-camera normalization.

    ``rotation_applied`` maps camera-frame directions into the virtual
    frame; ``scale`` is the depth factor that places the face center at the
    target distance; ``warp_matrix`` is the full image homography.
    """

    image: np.ndarray
    gaze: GazeVector
    rotation_applied: np.ndarray
    scale: float = 1.0
    warp_matrix: np.ndarray = field(default_factory=lambda: np.eye(3))


def _virtual_rotation(head_rotation: np.ndarray,
                      face_center: np.ndarray) -> np.ndarray:
    """Rotation whose z-axis points at the face center and whose y-axis is
    chosen so the head's x-axis has no roll in the virtual view."""
    distance = float(np.linalg.norm(face_center))
    forward = face_center / distance
    head_x = head_rotation[:, 0]
    down = np.cross(forward, head_x)
    down_norm = float(np.linalg.norm(down))
    if down_norm < 1e-12:
        raise DegenerateGeometryError(
            "head x-axis is parallel to the viewing direction")
    down = down / down_norm
    right = np.cross(down, forward)
    right = right / np.linalg.norm(right)
    return np.stack([right, down, forward], axis=0)


def normalize_sample(image: np.ndarray, params: NormalizationParams,
                     gaze: GazeVector) -> NormalizedSample:
    """Warp a face crop into the canonical virtual camera.

    The virtual camera shares the real camera's origin but is rotated to
    look at the face center with zero head roll, and the scene is scaled in
    depth so the face center ends up at ``target_distance``. The image is
    warped by the homography ``C_virtual @ S @ R @ C_camera^-1`` and the
    gaze direction is rotated by ``R`` and re-normalized.
    """
    img = np.asarray(image)
    if img.size == 0:
        raise ValueError("image is empty")
    params = params.validated()

    rotation = _virtual_rotation(params.head_rotation, params.face_center)
    distance = float(np.linalg.norm(params.face_center))
    scale = params.target_distance / distance
    scale_matrix = np.diag([1.0, 1.0, scale])

    width, height = params.output_size
    virtual_camera = np.array([
        [params.virtual_focal, 0.0, width / 2.0],
        [0.0, params.virtual_focal, height / 2.0],
        [0.0, 0.0, 1.0],
    ])
    warp = virtual_camera @ scale_matrix @ rotation @ np.linalg.inv(
        params.camera_matrix)
    warped = cv2.warpPerspective(img, warp, (width, height))

    rotated_gaze = GazeVector.from_array(rotation @ gaze.as_array())
    return NormalizedSample(image=warped, gaze=rotated_gaze,
                            rotation_applied=rotation, scale=scale,
                            warp_matrix=warp)
