"""Procedural rectified stereo pairs with dense ground-truth disparity.

A scene is a stack of planar layers (a slanted background plus rectangles and
ellipses in front of it). Each layer carries its own value-noise texture,
defined in left-image coordinates, and a disparity plane
``d(x, y) = a + b x + c y``. Both views are rendered by ray-casting every
pixel against all layers and keeping the nearest (largest disparity) hit, so
occlusions and ground truth are exact.

Some layers are given a faint texture on purpose: those regions are where
plain SGM struggles and sparse hints help.
"""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import map_coordinates

from .types import DisparityMap, GrayImage


@dataclass
class _Layer:
    a: float
    b: float
    c: float
    shape: str  # "all", "rect", "ellipse"
    box: tuple  # (x0, y0, x1, y1) in left coords
    base: float
    amp: float
    scale: float
    grid: np.ndarray

    def disparity(self, x, y):
        return self.a + self.b * x + self.c * y

    def covers(self, x, y):
        if self.shape == "all":
            return np.ones(np.broadcast(x, y).shape, dtype=bool)
        x0, y0, x1, y1 = self.box
        if self.shape == "rect":
            return (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)
        cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
        rx, ry = (x1 - x0) / 2, (y1 - y0) / 2
        return ((x - cx) / rx) ** 2 + ((y - cy) / ry) ** 2 <= 1.0

    def texture(self, x, y, margin):
        coords = np.stack([(y + margin) / self.scale, (x + margin) / self.scale])
        return self.base + self.amp * map_coordinates(self.grid, coords, order=3, mode="reflect")


def _make_layers(rng, height, width, max_disp):
    margin = max_disp + 8
    ext_h, ext_w = height + 2 * margin, width + 2 * margin

    def layer(a, b, c, shape, box, faint):
        scale = rng.uniform(1.5, 4.0)
        grid = rng.standard_normal((int(ext_h / scale) + 4, int(ext_w / scale) + 4))
        amp = rng.uniform(1.0, 2.5) if faint else rng.uniform(25.0, 45.0)
        return _Layer(a, b, c, shape, box, rng.uniform(80, 170), amp, scale, grid)

    lo = max(2.0, 0.1 * max_disp)
    hi = 0.8 * max_disp
    # background: gently slanted, mid-low disparity
    bg_d = rng.uniform(lo, lo + 0.25 * (hi - lo))
    bg = layer(bg_d, rng.uniform(-0.01, 0.01), rng.uniform(0.0, 0.03), "all", None, faint=False)
    if bg.disparity(width, height) < 1 or bg.disparity(0, height) < 1:
        bg.b = bg.c = 0.0
    layers = [bg]
    n_obj = rng.integers(4, 7)
    for i in range(n_obj):
        w = rng.uniform(0.15, 0.4) * width
        h = rng.uniform(0.2, 0.5) * height
        x0 = rng.uniform(0, width - w)
        y0 = rng.uniform(0, height - h)
        d0 = rng.uniform(lo + 0.3 * (hi - lo), hi)
        slope_x = rng.uniform(-0.03, 0.03)
        slope_y = rng.uniform(-0.03, 0.03)
        # keep the plane inside [lo, hi] over its box
        a = d0 - slope_x * (x0 + w / 2) - slope_y * (y0 + h / 2)
        faint = i % 2 == 0
        shape = "rect" if rng.random() < 0.5 else "ellipse"
        layers.append(layer(a, slope_x, slope_y, shape, (x0, y0, x0 + w, y0 + h), faint))
    return layers, margin


def _render(layers, height, width, margin, right_view):
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    best_d = np.full((height, width), -np.inf)
    value = np.zeros((height, width))
    for layer in layers:
        if right_view:
            # left coordinate u that projects to xs: u - d(u, y) = xs
            u = (xs + layer.a + layer.c * ys) / (1.0 - layer.b)
        else:
            u = xs
        d = layer.disparity(u, ys)
        hit = layer.covers(u, ys) & (d > best_d)
        if hit.any():
            tex = layer.texture(u[hit], ys[hit], margin)
            value[hit] = tex
            best_d[hit] = d[hit]
    return value, best_d


def make_scene(seed, height=180, width=240, max_disp=64, noise=1.5):
    """Return ``(left, right, gt)`` for a random layered scene."""
    rng = np.random.default_rng(seed)
    layers, margin = _make_layers(rng, height, width, max_disp)
    left, gt = _render(layers, height, width, margin, right_view=False)
    right, _ = _render(layers, height, width, margin, right_view=True)
    gain = rng.uniform(0.95, 1.05)
    left = left + rng.normal(0, noise, left.shape)
    right = gain * right + rng.normal(0, noise, right.shape)
    to_u8 = lambda a: np.clip(np.rint(a), 0, 255).astype(np.uint8)
    gt = np.clip(gt, 0, max_disp - 1)
    return GrayImage(to_u8(left)), GrayImage(to_u8(right)), DisparityMap(gt.astype(np.float32))


def shifted_pair(seed, height=48, width=64, shift=4):
    """Fronto-parallel textured noise: right = left shifted by ``shift`` px."""
    rng = np.random.default_rng(seed)
    wide = rng.integers(0, 256, size=(height, width + shift)).astype(np.uint8)
    left = wide[:, :width]
    right = wide[:, shift:]
    gt = np.full((height, width), float(shift), dtype=np.float32)
    return GrayImage(left), GrayImage(right), DisparityMap(gt)
