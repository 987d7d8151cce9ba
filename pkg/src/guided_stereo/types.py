"""Domain containers shared by every stage of the pipeline.

All containers validate on construction and hold read-only numpy arrays, so
instances can be shared freely between threads.
"""

import enum
from dataclasses import dataclass

import numpy as np

INVALID = np.float32(-1.0)
"""Sentinel stored in :class:`DisparityMap` for unknown pixels."""


class StereoError(ValueError):
    """Input violates a domain rule (bad shape, out-of-range hint, ...)."""


class FormatError(ValueError):
    """A file does not follow the expected format."""


class Polarity(enum.Enum):
    SIMILARITY = "similarity"
    DISSIMILARITY = "dissimilarity"


def _frozen(arr):
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GrayImage:
    """Single-channel 8-bit image, shape ``(height, width)``."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise StereoError(f"gray image must be a non-empty 2-D array, got shape {data.shape}")
        if data.dtype != np.uint8:
            if not np.all(np.isfinite(data)):
                raise StereoError("gray image contains non-finite values")
            if data.min() < 0 or data.max() > 255 or np.any(data != np.round(data)):
                raise StereoError("gray image values must be integers in [0, 255]")
        object.__setattr__(self, "data", _frozen(data.astype(np.uint8)))

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]


@dataclass(frozen=True)
class CostVolume:
    """Matching costs of shape ``(height, width, max_disparity)``, float32."""

    costs: np.ndarray
    polarity: Polarity = Polarity.DISSIMILARITY

    def __post_init__(self):
        costs = np.asarray(self.costs)
        if costs.ndim != 3 or min(costs.shape) < 1:
            raise StereoError(f"cost volume must be a non-empty H x W x D array, got {costs.shape}")
        costs = costs.astype(np.float32, copy=False)
        if not np.all(np.isfinite(costs)):
            raise StereoError("cost volume contains non-finite values")
        if costs.min() < 0:
            raise StereoError("cost volume contains negative costs")
        if not isinstance(self.polarity, Polarity):
            raise StereoError(f"unknown polarity {self.polarity!r}")
        object.__setattr__(self, "costs", _frozen(costs))

    @property
    def height(self):
        return self.costs.shape[0]

    @property
    def width(self):
        return self.costs.shape[1]

    @property
    def max_disparity(self):
        return self.costs.shape[2]


@dataclass(frozen=True)
class SparseHints:
    """Sparse disparity hints: values ``g`` and validity mask ``v``.

    ``g`` is only meaningful where ``v`` is set; elsewhere it is stored as 0.
    The range check against a volume's disparity count happens when the hints
    are applied (see :func:`guided_stereo.guide.enhance_volume`).
    """

    g: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g, dtype=np.float64)
        v = np.asarray(self.v)
        if g.ndim != 2 or g.shape != v.shape or min(g.shape) < 1:
            raise StereoError(f"hint arrays must be matching 2-D arrays, got {g.shape} and {v.shape}")
        if v.dtype != np.bool_:
            if not np.all((v == 0) | (v == 1)):
                raise StereoError("validity mask must be binary")
            v = v.astype(bool)
        if not np.all(np.isfinite(g[v])):
            raise StereoError("hint disparities must be finite where valid")
        if np.any(g[v] < 0):
            raise StereoError("hint disparities must be non-negative where valid")
        object.__setattr__(self, "g", _frozen(np.where(v, g, 0.0)))
        object.__setattr__(self, "v", _frozen(v))

    @classmethod
    def empty(cls, height, width):
        return cls(np.zeros((height, width)), np.zeros((height, width), dtype=bool))

    @property
    def height(self):
        return self.g.shape[0]

    @property
    def width(self):
        return self.g.shape[1]

    @property
    def count(self):
        return int(self.v.sum())


def density(hints):
    """Fraction of pixels carrying a hint."""
    return hints.count / hints.v.size


@dataclass(frozen=True)
class DisparityMap:
    """Per-pixel disparities; invalid pixels hold :data:`INVALID`.

    Every negative input value marks an invalid pixel and is normalised to
    the sentinel. Non-finite values are rejected; readers map them to the
    sentinel explicitly.
    """

    d: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=np.float32)
        if d.ndim != 2 or min(d.shape) < 1:
            raise StereoError(f"disparity map must be a non-empty 2-D array, got {d.shape}")
        if not np.all(np.isfinite(d)):
            raise StereoError("disparity map contains non-finite values")
        object.__setattr__(self, "d", _frozen(np.where(d >= 0, d, INVALID)))

    @classmethod
    def invalid(cls, height, width):
        return cls(np.full((height, width), INVALID, dtype=np.float32))

    @property
    def height(self):
        return self.d.shape[0]

    @property
    def width(self):
        return self.d.shape[1]

    @property
    def valid(self):
        return self.d >= 0


@dataclass(frozen=True)
class Calibration:
    focal_px: float
    baseline_m: float

    def __post_init__(self):
        for name in ("focal_px", "baseline_m"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise StereoError(f"{name} must be strictly positive, got {value}")


@dataclass(frozen=True)
class GuideParams:
    """Gaussian modulation: peak magnitude ``k`` and width ``c`` (disparities)."""

    k: float = 10.0
    c: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.k) or self.k < 1:
            raise StereoError(f"k must be >= 1, got {self.k}")
        if not np.isfinite(self.c) or self.c <= 0:
            raise StereoError(f"c must be > 0, got {self.c}")
