"""Initial dissimilarity cost volume: census transform + Hamming distance.

A plain windowed SAD cost is available for comparison (``kind="sad"``).
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .types import CostVolume, Polarity, StereoError


@dataclass(frozen=True)
class CensusImage:
    """Packed census descriptors, shape ``(height, width, n_words)`` uint64.

    Bit ``b`` of a descriptor refers to the ``b``-th window neighbour in
    row-major order (centre skipped) and is set iff that neighbour is strictly
    darker than the centre. Neighbours outside the image count as equal.
    """

    descriptors: np.ndarray
    radius: int

    @property
    def nbits(self):
        return (2 * self.radius + 1) ** 2 - 1

    @property
    def height(self):
        return self.descriptors.shape[0]

    @property
    def width(self):
        return self.descriptors.shape[1]


@dataclass(frozen=True)
class CostParams:
    max_disparity: int = 64
    kind: str = "census"
    radius: int = 2

    def __post_init__(self):
        if self.kind not in ("census", "sad"):
            raise StereoError(f"unknown cost kind {self.kind!r}")
        if self.max_disparity < 1:
            raise StereoError("max_disparity must be >= 1")
        if self.radius < 1:
            raise StereoError("cost window radius must be >= 1")


def census_transform(img, radius=2):
    if radius < 1:
        raise StereoError(f"census radius must be >= 1, got {radius}")
    if 2 * radius + 1 > min(img.width, img.height):
        raise StereoError(
            f"census window {2 * radius + 1} exceeds image size {img.width}x{img.height}"
        )
    desc = kernels.census(np.ascontiguousarray(img.data), radius, kernels.census_words(radius))
    desc.setflags(write=False)
    return CensusImage(desc, radius)


def hamming(a, b):
    """Hamming distance between two packed descriptors (uint64 word arrays)."""
    return int(np.bitwise_count(np.bitwise_xor(a, b)).sum())


def build_cost_volume(left, right, max_disparity):
    """Hamming cost volume ``cost[y, x, d] = H(left[y, x], right[y, x - d])``.

    Candidates with ``x - d < 0`` receive the descriptor length as cost.
    """
    if left.descriptors.shape != right.descriptors.shape or left.radius != right.radius:
        raise StereoError(
            f"census images differ: {left.descriptors.shape} r={left.radius} vs "
            f"{right.descriptors.shape} r={right.radius}"
        )
    if max_disparity < 1:
        raise StereoError("max_disparity must be >= 1")
    costs = kernels.hamming_volume(
        np.ascontiguousarray(left.descriptors),
        np.ascontiguousarray(right.descriptors),
        int(max_disparity),
        np.float32(left.nbits),
    )
    return CostVolume(costs, Polarity.DISSIMILARITY)


def _box_sum(a, radius):
    # zero-padded (2r+1)^2 window sum via cumulative sums
    k = 2 * radius + 1
    p = np.pad(a, radius)
    c = np.cumsum(np.cumsum(p, axis=0), axis=1)
    c = np.pad(c, ((1, 0), (1, 0)))
    return c[k:, k:] - c[:-k, k:] - c[k:, :-k] + c[:-k, :-k]


def sad_cost_volume(left, right, max_disparity, radius=2):
    """Windowed sum of absolute differences; ``x - d < 0`` gets ``255 * window``."""
    if left.data.shape != right.data.shape:
        raise StereoError(f"image sizes differ: {left.data.shape} vs {right.data.shape}")
    h, w = left.data.shape
    lf = left.data.astype(np.float64)
    rf = right.data.astype(np.float64)
    worst = 255.0 * (2 * radius + 1) ** 2
    out = np.full((h, w, max_disparity), worst, dtype=np.float32)
    for d in range(min(max_disparity, w)):
        ad = np.zeros((h, w))
        ad[:, d:] = np.abs(lf[:, d:] - rf[:, :w - d])
        s = _box_sum(ad, radius)
        out[:, d:, d] = s[:, d:]
    return CostVolume(out, Polarity.DISSIMILARITY)


def compute_costs(left, right, params):
    """Cost volume for a rectified pair according to ``params``."""
    if left.data.shape != right.data.shape:
        raise StereoError(f"image sizes differ: {left.data.shape} vs {right.data.shape}")
    if params.kind == "sad":
        return sad_cost_volume(left, right, params.max_disparity, params.radius)
    return build_cost_volume(
        census_transform(left, params.radius),
        census_transform(right, params.radius),
        params.max_disparity,
    )

