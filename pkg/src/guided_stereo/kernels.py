"""Hot inner loops: census transform, Hamming cost volume, SGM scanline pass.

Every kernel exists as ``*_numba`` (explicit loops under ``@njit``) and
``*_numpy`` (vectorised over one image axis). The public dispatchers at the
bottom pick one according to :mod:`guided_stereo._accel`. The two variants
perform the same float32 operations in the same order, so their outputs are
bit-identical; the test-suite checks this.
"""

import numpy as np

from ._accel import USE_NUMBA, njit

_ONE = np.uint64(1)
_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)
_S1 = np.uint64(1)
_S2 = np.uint64(2)
_S4 = np.uint64(4)
_S56 = np.uint64(56)


def census_words(radius):
    """Number of uint64 words needed for a census descriptor of ``radius``."""
    nbits = (2 * radius + 1) ** 2 - 1
    return (nbits + 63) // 64


# --------------------------------------------------------------------------
# census transform


@njit
def census_numba(img, radius, n_words):
    h, w = img.shape
    out = np.zeros((h, w, n_words), dtype=np.uint64)
    for y in range(h):
        for x in range(w):
            center = img[y, x]
            bit = 0
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    if dy == 0 and dx == 0:
                        continue
                    yy = y + dy
                    xx = x + dx
                    if 0 <= yy < h and 0 <= xx < w and img[yy, xx] < center:
                        out[y, x, bit >> 6] |= _ONE << np.uint64(bit & 63)
                    bit += 1
    return out


def census_numpy(img, radius, n_words):
    h, w = img.shape
    out = np.zeros((h, w, n_words), dtype=np.uint64)
    bit = 0
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            if dy == 0 and dx == 0:
                continue
            # pixels whose neighbour (y+dy, x+dx) is inside the image
            y0, y1 = max(0, -dy), min(h, h - dy)
            x0, x1 = max(0, -dx), min(w, w - dx)
            less = np.zeros((h, w), dtype=np.uint64)
            if y0 < y1 and x0 < x1:
                less[y0:y1, x0:x1] = (
                    img[y0 + dy:y1 + dy, x0 + dx:x1 + dx] < img[y0:y1, x0:x1]
                )
            out[:, :, bit >> 6] |= less << np.uint64(bit & 63)
            bit += 1
    return out


# --------------------------------------------------------------------------
# Hamming cost volume


@njit
def _popcount64(x):
    x = x - ((x >> _S1) & _M1)
    x = (x & _M2) + ((x >> _S2) & _M2)
    x = (x + (x >> _S4)) & _M4
    return (x * _H01) >> _S56


@njit
def hamming_volume_numba(left, right, max_disp, worst):
    h, w, n_words = left.shape
    out = np.empty((h, w, max_disp), dtype=np.float32)
    for y in range(h):
        for x in range(w):
            for d in range(max_disp):
                if x - d < 0:
                    out[y, x, d] = worst
                else:
                    count = 0
                    for k in range(n_words):
                        count += _popcount64(left[y, x, k] ^ right[y, x - d, k])
                    out[y, x, d] = count
    return out


def hamming_volume_numpy(left, right, max_disp, worst):
    h, w, _ = left.shape
    out = np.full((h, w, max_disp), worst, dtype=np.float32)
    for d in range(min(max_disp, w)):
        diff = left[:, d:] ^ right[:, :w - d]
        out[:, d:, d] = np.bitwise_count(diff).sum(axis=-1, dtype=np.int64)
    return out


# --------------------------------------------------------------------------
# SGM scanline pass
#
# L(p, d) = C(p, d) + min(L(q, d), L(q, d-1) + P1, L(q, d+1) + P1,
#                         min_k L(q, k) + P2) - min_k L(q, k),   q = p - r
# with L = C wherever q falls outside the image.


@njit
def accumulate_path_numba(costs, dy, dx, p1, p2, out):
    """Add the path costs along direction ``(dy, dx)`` into ``out`` in place."""
    h, w, nd = costs.shape
    prev_row = np.empty((w, nd), dtype=np.float32)
    cur_row = np.empty((w, nd), dtype=np.float32)
    if dy >= 0:
        ya, yb, ys = 0, h, 1
    else:
        ya, yb, ys = h - 1, -1, -1
    if dx >= 0:
        xa, xb, xs = 0, w, 1
    else:
        xa, xb, xs = w - 1, -1, -1
    for y in range(ya, yb, ys):
        for x in range(xa, xb, xs):
            py = y - dy
            px = x - dx
            if py < 0 or py >= h or px < 0 or px >= w:
                for d in range(nd):
                    v = costs[y, x, d]
                    cur_row[x, d] = v
                    out[y, x, d] += v
                continue
            if dy == 0:
                src = cur_row
            else:
                src = prev_row
            m = src[px, 0]
            for d in range(1, nd):
                if src[px, d] < m:
                    m = src[px, d]
            jump = m + p2
            for d in range(nd):
                best = src[px, d]
                if d > 0:
                    best = min(best, src[px, d - 1] + p1)
                if d < nd - 1:
                    best = min(best, src[px, d + 1] + p1)
                best = min(best, jump)
                v = costs[y, x, d] + best - m
                cur_row[x, d] = v
                out[y, x, d] += v
        prev_row, cur_row = cur_row, prev_row


def _path_step(cost, pred, p1, p2):
    # cost, pred: (n, D) float32
    m = pred.min(axis=1, keepdims=True)
    best = pred.copy()
    np.minimum(best[:, 1:], pred[:, :-1] + p1, out=best[:, 1:])
    np.minimum(best[:, :-1], pred[:, 1:] + p1, out=best[:, :-1])
    np.minimum(best, m + p2, out=best)
    return cost + best - m


def path_numpy(costs, dy, dx, p1, p2):
    """Return the full path-cost volume along direction ``(dy, dx)``."""
    h, w, _ = costs.shape
    L = np.empty_like(costs)
    if dx != 0:
        xs = range(w) if dx > 0 else range(w - 1, -1, -1)
        for x in xs:
            px = x - dx
            if px < 0 or px >= w:
                L[:, x] = costs[:, x]
                continue
            prev = L[:, px]
            if dy == 0:
                L[:, x] = _path_step(costs[:, x], prev, p1, p2)
                continue
            pred = np.empty_like(prev)
            if dy > 0:
                pred[dy:] = prev[:h - dy]
                pred[:dy] = prev[:dy]  # placeholder rows, overwritten below
            else:
                pred[:h + dy] = prev[-dy:]
                pred[h + dy:] = prev[h + dy:]
            col = _path_step(costs[:, x], pred, p1, p2)
            if dy > 0:
                col[:dy] = costs[:dy, x]
            else:
                col[h + dy:] = costs[h + dy:, x]
            L[:, x] = col
    else:
        ys = range(h) if dy > 0 else range(h - 1, -1, -1)
        for y in ys:
            py = y - dy
            if py < 0 or py >= h:
                L[y] = costs[y]
            else:
                L[y] = _path_step(costs[y], L[py], p1, p2)
    return L


def aggregate_numba(costs, directions, p1, p2):
    out = np.zeros_like(costs)
    for dy, dx in directions:
        accumulate_path_numba(costs, dy, dx, np.float32(p1), np.float32(p2), out)
    return out


def aggregate_numpy(costs, directions, p1, p2):
    out = np.zeros_like(costs)
    for dy, dx in directions:
        out += path_numpy(costs, dy, dx, np.float32(p1), np.float32(p2))
    return out


def path_numba(costs, dy, dx, p1, p2):
    out = np.zeros_like(costs)
    accumulate_path_numba(costs, dy, dx, np.float32(p1), np.float32(p2), out)
    return out


if USE_NUMBA:
    census = census_numba
    hamming_volume = hamming_volume_numba
    aggregate_paths = aggregate_numba
    single_path = path_numba
else:
    census = census_numpy
    hamming_volume = hamming_volume_numpy
    aggregate_paths = aggregate_numpy
    single_path = path_numpy
