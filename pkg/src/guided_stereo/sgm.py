"""Semi-global matching over a dissimilarity volume, plus WTA and LR check."""

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .census import CostParams, compute_costs
from .guide import enhance_volume
from .types import (
    INVALID,
    CostVolume,
    DisparityMap,
    GrayImage,
    GuideParams,
    Polarity,
    StereoError,
)

# (dy, dx) of each scanline, summed in this order
PATHS_4 = ((0, 1), (0, -1), (1, 0), (-1, 0))
PATHS_8 = PATHS_4 + ((1, 1), (1, -1), (-1, 1), (-1, -1))


@dataclass(frozen=True)
class SgmParams:
    """SGM penalties and post-processing options.

    ``lr_threshold=None`` skips the left-right consistency check.
    """

    p1: float = 10.0
    p2: float = 120.0
    paths: int = 8
    lr_threshold: Optional[float] = None
    subpixel: bool = True

    def __post_init__(self):
        if not (0 < self.p1 <= self.p2):
            raise StereoError(f"penalties must satisfy 0 < p1 <= p2, got p1={self.p1}, p2={self.p2}")
        if self.paths not in (4, 8):
            raise StereoError(f"paths must be 4 or 8, got {self.paths}")
        if self.lr_threshold is not None and self.lr_threshold < 0:
            raise StereoError("lr_threshold must be >= 0")


def _directions(paths):
    if paths == 4:
        return PATHS_4
    if paths == 8:
        return PATHS_8
    raise StereoError(f"paths must be 4 or 8, got {paths}")


def aggregate_costs(costs, p1, p2, paths=8):
    """Sum of scanline costs for a raw ``(H, W, D)`` array.

    Unlike :class:`SgmParams` this accepts zero penalties (``0 <= p1 <= p2``).
    """
    if not (0 <= p1 <= p2):
        raise StereoError(f"penalties must satisfy 0 <= p1 <= p2, got p1={p1}, p2={p2}")
    costs = np.ascontiguousarray(costs, dtype=np.float32)
    return kernels.aggregate_paths(costs, _directions(paths), p1, p2)


def path_costs(costs, direction, p1, p2):
    """Costs ``L_r`` of the single scanline direction ``(dy, dx)``."""
    dy, dx = direction
    costs = np.ascontiguousarray(costs, dtype=np.float32)
    return kernels.single_path(costs, dy, dx, np.float32(p1), np.float32(p2))


def aggregate(vol, params):
    if vol.polarity is not Polarity.DISSIMILARITY:
        raise StereoError("SGM aggregation needs a dissimilarity volume")
    return CostVolume(aggregate_costs(vol.costs, params.p1, params.p2, params.paths), vol.polarity)


def subpixel_offset(c_prev, c_min, c_next):
    """Vertex of the parabola through three costs, clamped to [-0.5, 0.5]."""
    c_prev = np.asarray(c_prev, dtype=np.float64)
    c_min = np.asarray(c_min, dtype=np.float64)
    c_next = np.asarray(c_next, dtype=np.float64)
    denom = 2.0 * (c_prev + c_next - 2.0 * c_min)
    with np.errstate(divide="ignore", invalid="ignore"):
        off = np.where(denom != 0, (c_prev - c_next) / denom, 0.0)
    return np.clip(off, -0.5, 0.5)


def wta(vol, subpixel=True):
    """Per-pixel argmin (first minimum wins), optionally parabola-refined."""
    costs = vol.costs
    best = np.argmin(costs, axis=2)
    disp = best.astype(np.float64)
    if subpixel:
        nd = costs.shape[2]
        inner = (best > 0) & (best < nd - 1)
        if inner.any():
            yy, xx = np.nonzero(inner)
            b = best[yy, xx]
            off = subpixel_offset(costs[yy, xx, b - 1], costs[yy, xx, b], costs[yy, xx, b + 1])
            disp[yy, xx] += off
    return DisparityMap(disp.astype(np.float32))


def left_right_check(left_disp, right_disp, threshold):
    """Invalidate left pixels whose match in the right map disagrees.

    A pixel survives iff ``x - round(dL)`` is inside the image, the right map
    is valid there and ``|dL - dR| <= threshold``.
    """
    if left_disp.d.shape != right_disp.d.shape:
        raise StereoError(f"disparity maps differ in size: {left_disp.d.shape} vs {right_disp.d.shape}")
    dl = left_disp.d
    dr = right_disp.d
    h, w = dl.shape
    valid = dl >= 0
    xs = np.arange(w)[None, :] - np.rint(np.where(valid, dl, 0)).astype(np.int64)
    inside = valid & (xs >= 0) & (xs < w)
    rows = np.broadcast_to(np.arange(h)[:, None], (h, w))
    matched = np.full((h, w), INVALID, dtype=np.float32)
    matched[inside] = dr[rows[inside], xs[inside]]
    keep = inside & (matched >= 0) & (np.abs(dl - matched) <= threshold)
    return DisparityMap(np.where(keep, dl, INVALID))


def _mirror(img):
    return GrayImage(img.data[:, ::-1])


def _timed(timings, key, fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    if timings is not None:
        timings[key] = timings.get(key, 0.0) + time.perf_counter() - t0
    return out


def _disparity(left, right, hints, guide, sgm, cost, timings):
    vol = _timed(timings, "cost", compute_costs, left, right, cost)
    if hints is not None:
        vol = _timed(timings, "enhance", enhance_volume, vol, hints, guide)
    agg = _timed(timings, "aggregate", aggregate, vol, sgm)
    return _timed(timings, "wta", wta, agg, sgm.subpixel)


def run_pipeline(left, right, hints=None, guide=None, sgm=None, cost=None, timings=None):
    """Full SGM (or guided SGM when ``hints`` is given) for a rectified pair.

    The right-view map needed by the LR check is computed on the mirrored,
    swapped pair without hints. ``timings``, if a dict, receives seconds per
    stage.
    """
    guide = guide or GuideParams()
    sgm = sgm or SgmParams()
    cost = cost or CostParams()
    if left.data.shape != right.data.shape:
        raise StereoError(f"image sizes differ: {left.data.shape} vs {right.data.shape}")
    disp = _disparity(left, right, hints, guide, sgm, cost, timings)
    if sgm.lr_threshold is None:
        return disp
    right_mirrored = _disparity(_mirror(right), _mirror(left), None, guide, sgm, cost, timings)
    right_disp = DisparityMap(right_mirrored.d[:, ::-1])
    return _timed(timings, "lr_check", left_right_check, disp, right_disp, sgm.lr_threshold)
