"""Gaussian cost/feature modulation from sparse disparity hints.

For a hinted pixel (``v = 1``) with hint ``g`` the entry at disparity ``d``
is multiplied by

* ``k * exp(-(d - g)^2 / (2 c^2))`` for similarity volumes (peak at ``g``),
* ``k * (1 - exp(-(d - g)^2 / (2 c^2)))`` for dissimilarity volumes
  (zero at ``g``, approaching ``k`` far from it).

Pixels without a hint are multiplied by exactly 1. The weight does not depend
on the raw value, so the derivative of an enhanced entry with respect to the
raw entry is the weight itself.

This module only covers 3-D ``H x W x D`` volumes; 4-D concatenation volumes
of learned networks are not handled.
"""

import math

import numpy as np

from .types import (
    INVALID,
    CostVolume,
    DisparityMap,
    FormatError,
    GuideParams,
    Polarity,
    SparseHints,
    StereoError,
)


def modulation_weight(d, g, v, params, polarity):
    """Multiplier applied to the entry at disparity ``d`` of a pixel."""
    if not v:
        return 1.0
    x = (d - g) ** 2 / (2.0 * params.c * params.c)
    if polarity is Polarity.SIMILARITY:
        return params.k * math.exp(-x)
    # -expm1 keeps full relative precision when d is close to g
    return params.k * -math.expm1(-x)


def enhance_value(f, d, g, v, params, polarity):
    """Enhanced value of a single raw entry ``f``."""
    return modulation_weight(d, g, v, params, polarity) * f


def modulation_gradient(d, g, v, params, polarity):
    """Derivative of the enhanced entry with respect to the raw entry."""
    return modulation_weight(d, g, v, params, polarity)


def weight_field(hints, max_disparity, params, polarity):
    """Per-entry multipliers, shape ``(H, W, D)``, in float64."""
    d = np.arange(max_disparity, dtype=np.float64)
    x = (d[None, None, :] - hints.g[:, :, None]) ** 2 / (2.0 * params.c * params.c)
    if polarity is Polarity.SIMILARITY:
        w = params.k * np.exp(-x)
    else:
        w = params.k * -np.expm1(-x)
    return np.where(hints.v[:, :, None], w, 1.0)


def check_hints(vol, hints):
    if (hints.height, hints.width) != (vol.height, vol.width):
        raise StereoError(
            f"hints are {hints.width}x{hints.height}, volume is {vol.width}x{vol.height}"
        )
    bad = hints.v & (hints.g >= vol.max_disparity)
    if bad.any():
        y, x = np.argwhere(bad)[0]
        raise StereoError(
            f"hint at row {y}, col {x} has disparity {hints.g[y, x]} outside "
            f"[0, {vol.max_disparity})"
        )


def enhance_volume(vol, hints, params):
    """Apply the Gaussian modulation to ``vol``; returns a new volume.

    The formula is picked by ``vol.polarity``. Weights are evaluated in
    double precision and cast to the volume's float32 before multiplying.
    Entries of pixels without a hint are copied unchanged.
    """
    check_hints(vol, hints)
    if hints.count == 0:
        return vol
    w = weight_field(hints, vol.max_disparity, params, vol.polarity).astype(np.float32)
    out = np.where(hints.v[:, :, None], vol.costs * w, vol.costs)
    return CostVolume(out, vol.polarity)


def depth_to_disparity(z, cal):
    """Disparity in pixels of a point at depth ``z`` metres."""
    z = np.asarray(z, dtype=np.float64)
    if np.any(~(z > 0)):
        raise StereoError("depth must be strictly positive")
    d = cal.baseline_m * cal.focal_px / z
    return float(d) if d.ndim == 0 else d


def disparity_to_depth(d, cal):
    """Depth in metres of a pixel with disparity ``d``."""
    d = np.asarray(d, dtype=np.float64)
    if np.any(~(d > 0)):
        raise StereoError("disparity must be strictly positive")
    z = cal.baseline_m * cal.focal_px / d
    return float(z) if z.ndim == 0 else z


def sample_hints(gt, target_density, seed, restrict_to_valid=False):
    """Draw hints from a ground-truth map, uniformly and without replacement.

    The requested count is ``round(target_density * W * H)``.

    With ``restrict_to_valid`` the pixels are drawn among valid ground-truth
    pixels only, and the count is clipped to how many there are. Without it,
    pixels are drawn over the whole image and those landing on invalid
    ground truth are dropped afterwards (a KITTI-style sparse-then-mask
    protocol), so the achieved density can fall below the target.
    """
    if not 0 <= target_density <= 1:
        raise StereoError(f"density must lie in [0, 1], got {target_density}")
    h, w = gt.d.shape
    valid = gt.valid.ravel()
    if not valid.any():
        raise StereoError("ground truth has no valid pixel to sample hints from")
    n = int(round(target_density * h * w))
    rng = np.random.default_rng(seed)
    if restrict_to_valid:
        candidates = np.flatnonzero(valid)
        chosen = rng.choice(candidates, size=min(n, candidates.size), replace=False)
    else:
        chosen = rng.choice(h * w, size=n, replace=False)
        chosen = chosen[valid[chosen]]
    v = np.zeros(h * w, dtype=bool)
    v[chosen] = True
    g = np.where(v, gt.d.ravel(), 0.0).astype(np.float64)
    return SparseHints(g.reshape(h, w), v.reshape(h, w))


def hints_from_map(disp):
    """Hints at every valid pixel of a (sparse) disparity map."""
    v = disp.valid
    return SparseHints(np.where(v, disp.d, 0.0), v)


def hints_to_map(hints):
    return DisparityMap(np.where(hints.v, hints.g, INVALID))


def write_hints(hints, path):
    """Write ``row col disparity`` records, one per hinted pixel."""
    rows, cols = np.nonzero(hints.v)
    with open(path, "w") as f:
        f.write(f"# guided-stereo hints {hints.width}x{hints.height}, {rows.size} points\n")
        for r, c in zip(rows, cols):
            f.write(f"{r} {c} {float(hints.g[r, c])!r}\n")


def read_hints(path, height, width):
    """Read a hint file for an image of ``height x width`` pixels."""
    g = np.zeros((height, width))
    v = np.zeros((height, width), dtype=bool)
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise FormatError(f"{path}:{lineno}: expected 'row col disparity', got {line!r}")
            try:
                r, c, d = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: cannot parse {line!r}") from None
            if not (0 <= r < height and 0 <= c < width):
                raise FormatError(f"{path}:{lineno}: pixel ({r}, {c}) outside {width}x{height} image")
            if not math.isfinite(d) or d < 0:
                raise FormatError(f"{path}:{lineno}: invalid disparity {parts[2]}")
            if v[r, c]:
                raise FormatError(f"{path}:{lineno}: duplicate hint at ({r}, {c})")
            g[r, c] = d
            v[r, c] = True
    return SparseHints(g, v)
