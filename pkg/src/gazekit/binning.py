"""Discretize continuous angles into uniform bins and decode bin
probability distributions back to angles via expectation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .validation import check_finite_scalar, check_simplex


@dataclass(frozen=True)
class BinScheme:
    """Uniform partition of [min_deg, max_deg] into n_bins bins.

    Bins are half-open intervals [lo, hi) with the final bin closed, so
    edge values bin deterministically. Center of bin i is
    ``min_deg + (i + 0.5) * width``.
    """

    min_deg: float
    max_deg: float
    n_bins: int

    def __post_init__(self):
        if not (math.isfinite(self.min_deg) and math.isfinite(self.max_deg)):
            raise ValueError("bin range must be finite")
        if self.min_deg >= self.max_deg:
            raise ValueError(
                f"min_deg ({self.min_deg}) must be < max_deg ({self.max_deg})")
        if int(self.n_bins) != self.n_bins or self.n_bins < 2:
            raise ValueError(f"n_bins must be an integer >= 2, got {self.n_bins}")
        object.__setattr__(self, "min_deg", float(self.min_deg))
        object.__setattr__(self, "max_deg", float(self.max_deg))
        object.__setattr__(self, "n_bins", int(self.n_bins))

    @property
    def width(self) -> float:
        return (self.max_deg - self.min_deg) / self.n_bins

    @property
    def centers(self) -> np.ndarray:
        return self.min_deg + (np.arange(self.n_bins) + 0.5) * self.width


def mpiigaze_scheme() -> BinScheme:
    """Default scheme for MPIIGaze-range annotations: 28 bins of 3 degrees."""
    return BinScheme(-42.0, 42.0, 28)


def gaze360_scheme() -> BinScheme:
    """Default scheme for full-circle annotations: 90 bins of 4 degrees."""
    return BinScheme(-180.0, 180.0, 90)


DEFAULT_SCHEMES = {
    "mpiigaze": mpiigaze_scheme,
    "gaze360": gaze360_scheme,
    "synthetic": mpiigaze_scheme,
}


@dataclass(frozen=True)
class BinnedTarget:
    """A continuous angle together with its bin index and one-hot label."""

    bin_index: int
    continuous_deg: float
    one_hot: np.ndarray

    def __post_init__(self):
        one_hot = np.asarray(self.one_hot, dtype=np.float64)
        if one_hot.ndim != 1 or not 0 <= self.bin_index < one_hot.size \
                or np.count_nonzero(one_hot) != 1 \
                or one_hot[self.bin_index] != 1.0:
            raise ValueError("one_hot must be a one-hot vector at bin_index")
        object.__setattr__(self, "one_hot", one_hot)


def bin_index_of(angle_deg: float, scheme: BinScheme) -> int:
    """Bin index for an angle, clamping out-of-range angles to edge bins."""
    angle_deg = check_finite_scalar("angle_deg", angle_deg)
    raw = math.floor((angle_deg - scheme.min_deg) / scheme.width)
    return min(max(raw, 0), scheme.n_bins - 1)


def bin_target(angle_deg: float, scheme: BinScheme) -> BinnedTarget:
    """Attach a bin index and one-hot label to a continuous angle.

    The continuous value is preserved unchanged; only the index clamps.
    """
    index = bin_index_of(angle_deg, scheme)
    one_hot = np.zeros(scheme.n_bins)
    one_hot[index] = 1.0
    return BinnedTarget(index, float(angle_deg), one_hot)


def bin_indices(angles_deg: np.ndarray, scheme: BinScheme) -> np.ndarray:
    """Vectorized :func:`bin_index_of` over an array of angles."""
    angles = np.asarray(angles_deg, dtype=np.float64)
    if not np.all(np.isfinite(angles)):
        raise ValueError("angles_deg contains non-finite values")
    raw = np.floor((angles - scheme.min_deg) / scheme.width).astype(np.int64)
    return np.clip(raw, 0, scheme.n_bins - 1)


def decode_expectation(probabilities, scheme: BinScheme):
    """Expected angle (degrees) under a probability distribution over bins.

    Accepts a single length-n_bins simplex vector or a batch of rows;
    returns a float or a per-row array accordingly.
    """
    probs = check_simplex("probabilities", probabilities, length=scheme.n_bins)
    decoded = probs @ scheme.centers
    if probs.ndim == 1:
        return float(decoded)
    return decoded
