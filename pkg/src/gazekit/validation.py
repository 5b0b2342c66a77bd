"""Input validation helpers used at public API boundaries.

All helpers raise ValueError with the offending argument name in the
message, so estimator / CLI errors point at the right input.
"""

from __future__ import annotations

import math

import numpy as np


def as_finite_array(name: str, value, shape=None) -> np.ndarray:
    """Coerce to a float64 ndarray, requiring every entry to be finite."""
    arr = np.asarray(value, dtype=np.float64)
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"{name} must have shape {tuple(shape)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_finite_scalar(name: str, value) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


def check_rotation_matrix(name: str, matrix, tol: float = 1e-6) -> np.ndarray:
    """Require a 3x3 orthonormal matrix with determinant +1."""
    mat = as_finite_array(name, matrix, shape=(3, 3))
    if not np.allclose(mat.T @ mat, np.eye(3), atol=tol):
        raise ValueError(f"{name} is not orthonormal within {tol}")
    if abs(np.linalg.det(mat) - 1.0) > tol:
        raise ValueError(f"{name} must have determinant +1 within {tol}")
    return mat


def check_simplex(name: str, probabilities, length: int | None = None,
                  tol: float = 1e-6) -> np.ndarray:
    """Require non-negative entries summing to 1 along the last axis."""
    probs = as_finite_array(name, probabilities)
    if length is not None and probs.shape[-1] != length:
        raise ValueError(
            f"{name} must have length {length}, got {probs.shape[-1]}")
    if np.any(probs < 0):
        raise ValueError(f"{name} has negative entries")
    sums = probs.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > tol):
        raise ValueError(f"{name} does not sum to 1 within {tol}")
    return probs


def check_image_batch(name: str, images) -> np.ndarray:
    """Validate a batch of HxWx3 images; returns them unchanged as ndarray.

    Accepts uint8 or float input. The batch must be non-empty.
    """
    arr = np.asarray(images)
    if arr.ndim != 4 or arr.shape[-1] != 3:
        raise ValueError(
            f"{name} must have shape (n, height, width, 3), got {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError(f"{name} is empty")
    if arr.dtype != np.uint8 and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_angle_pairs(name: str, angles) -> np.ndarray:
    """Validate an (n, 2) array of (pitch, yaw) in radians."""
    arr = as_finite_array(name, angles)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"{name} must have shape (n, 2), got {arr.shape}")
    half_pi = math.pi / 2 + 1e-9
    if np.any(np.abs(arr[:, 0]) > half_pi):
        raise ValueError(f"{name} pitch values must lie in [-pi/2, pi/2]")
    if np.any(np.abs(arr[:, 1]) > math.pi + 1e-9):
        raise ValueError(f"{name} yaw values must lie in [-pi, pi]")
    return arr
