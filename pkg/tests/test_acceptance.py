"""Acceptance checks, one test per criterion.

Each test is wrapped by ``record`` so the terminal summary prints one
PASS/FAIL line per criterion.
"""

import struct
import sys
import time
import zlib

import mpmath
import numpy as np
import pytest
from conftest import record

from guided_stereo import dataset_io as dio
from guided_stereo.census import CostParams
from guided_stereo.evaluation import evaluate
from guided_stereo.guide import (
    enhance_value,
    enhance_volume,
    modulation_gradient,
    modulation_weight,
    sample_hints,
)
from guided_stereo.sgm import PATHS_4, SgmParams, aggregate_costs, path_costs, run_pipeline
from guided_stereo.synthetic import make_scene
from guided_stereo.types import CostVolume, DisparityMap, GuideParams, Polarity, SparseHints

REL_TOL_WEIGHT = 1e-12
REL_TOL_GRAD = 1e-6
FD_STEP = 1e-4
KITTI_PNG_TOL = 1 / 256
TREND_MIN_REL_REDUCTION = 25.0
QUARTER_RES_SECONDS = 30.0

SCENE_SEEDS = (0, 1, 2, 3, 4)
SCENE_KW = dict(height=180, width=240, max_disp=64)


def random_tuples(rng, n):
    for _ in range(n):
        yield (
            float(rng.uniform(0, 128)),
            float(rng.uniform(0, 128)),
            GuideParams(float(rng.uniform(1, 20)), float(rng.uniform(0.1, 8))),
            Polarity.SIMILARITY if rng.random() < 0.5 else Polarity.DISSIMILARITY,
        )


def reference_weight(d, g, params, polarity):
    with mpmath.workdps(60):
        e = mpmath.exp(-((mpmath.mpf(d) - mpmath.mpf(g)) ** 2) / (2 * mpmath.mpf(params.c) ** 2))
        w = mpmath.mpf(params.k) * (e if polarity is Polarity.SIMILARITY else 1 - e)
        return float(w)


@record(1, "modulation weight vs 60-digit reference, 1000 tuples")
def test_modulation_weight_exactness():
    rng = np.random.default_rng(1)
    tuples = list(random_tuples(rng, 1000))
    # a few exact hits and near misses on the hinted disparity
    tuples[:4] = [(5.0, 5.0, GuideParams(), Polarity.DISSIMILARITY),
                  (5.0, 5.0, GuideParams(), Polarity.SIMILARITY),
                  (5.0, 5.0 + 1e-9, GuideParams(), Polarity.DISSIMILARITY),
                  (0.0, 127.0, GuideParams(), Polarity.SIMILARITY)]
    t0 = time.perf_counter()
    got = [modulation_weight(d, g, True, p, pol) for d, g, p, pol in tuples]
    unhinted = [modulation_weight(d, g, False, p, pol) for d, g, p, pol in tuples]
    elapsed = time.perf_counter() - t0
    worst = 0.0
    for (d, g, p, pol), w in zip(tuples, got):
        ref = reference_weight(d, g, p, pol)
        # below the smallest normal double, relative error is meaningless
        err = abs(w - ref) / max(abs(ref), sys.float_info.min)
        worst = max(worst, err)
    assert worst <= REL_TOL_WEIGHT, f"worst relative error {worst:.3e}"
    assert all(u == 1.0 and type(u) is float for u in unhinted)
    assert elapsed < 1.0, f"{elapsed:.3f} s"


@record(2, "unhinted enhance is bit-identical, 100 volumes")
def test_identity_without_hints():
    rng = np.random.default_rng(2)
    for i in range(100):
        h, w, d = rng.integers(1, 17, 3)
        costs = (rng.random((h, w, d)) * rng.choice([1, 100, 1e6])).astype(np.float32)
        pol = Polarity.SIMILARITY if i % 2 else Polarity.DISSIMILARITY
        vol = CostVolume(costs, pol)
        g = rng.uniform(0, d, (h, w))
        hints = SparseHints(g, np.zeros((h, w), bool))
        out = enhance_volume(vol, hints, GuideParams(float(rng.uniform(1, 20)), float(rng.uniform(0.1, 5))))
        assert out.costs.dtype == costs.dtype
        assert out.costs.tobytes() == costs.tobytes()


@record(3, "gradient vs central differences, 1000 entries")
def test_gradient_contract():
    rng = np.random.default_rng(3)
    worst = 0.0
    for d, g, p, pol in random_tuples(rng, 1000):
        f = float(rng.uniform(0, 100))
        fd = (enhance_value(f + FD_STEP, d, g, True, p, pol)
              - enhance_value(f - FD_STEP, d, g, True, p, pol)) / (2 * FD_STEP)
        grad = modulation_gradient(d, g, True, p, pol)
        if grad == 0.0:
            assert fd == 0.0
            continue
        # same normal-range floor as the weight check
        worst = max(worst, abs(fd - grad) / max(abs(grad), sys.float_info.min))
        assert modulation_gradient(d, g, False, p, pol) == 1.0
    assert worst <= REL_TOL_GRAD, f"worst relative error {worst:.3e}"


def row_dp(costs, p1, p2, reverse=False):
    """Horizontal scanline DP over one row, penalties written out per transition."""
    n, nd = costs.shape
    order = range(n - 1, -1, -1) if reverse else range(n)
    out = np.zeros((n, nd))
    prev = None
    for x in order:
        c = [int(v) for v in costs[x]]
        if prev is None:
            cur = c
        else:
            m = min(prev)
            cur = []
            for d in range(nd):
                best = min(prev[k] + (0 if k == d else p1 if abs(k - d) == 1 else p2) for k in range(nd))
                cur.append(c[d] + best - m)
        out[x] = cur
        prev = cur
    return out


@record(4, "horizontal scanline vs DP oracle; zero penalties keep raw argmin")
def test_scanline_oracle():
    rng = np.random.default_rng(4)
    for _ in range(100):
        n, nd = int(rng.integers(1, 17)), int(rng.integers(1, 9))
        costs = rng.integers(0, 50, (1, n, nd)).astype(np.float32)
        p1 = int(rng.integers(0, 20))
        p2 = p1 + int(rng.integers(0, 60))
        east = row_dp(costs[0], p1, p2)
        west = row_dp(costs[0], p1, p2, reverse=True)
        np.testing.assert_array_equal(path_costs(costs, (0, 1), p1, p2)[0], east)
        np.testing.assert_array_equal(path_costs(costs, (0, -1), p1, p2)[0], west)
        # vertical paths on a single row reduce to the raw costs
        np.testing.assert_array_equal(aggregate_costs(costs, p1, p2, paths=4)[0], east + west + 2 * costs[0])
    for _ in range(20):
        h, w, nd = rng.integers(1, 12, 3)
        costs = rng.random((h, w, nd)).astype(np.float32)
        for paths in (4, 8):
            agg = aggregate_costs(costs, 0.0, 0.0, paths=paths)
            np.testing.assert_array_equal(agg.argmin(axis=2), costs.argmin(axis=2))


def nearest_integer(g):
    # ties go to the smaller disparity
    return int(np.ceil(g - 0.5))


@record(5, "argmin steering at hinted pixels, 10% hints")
def test_argmin_steering():
    rng = np.random.default_rng(5)
    params = GuideParams()
    total = 0
    for trial in range(50):
        h, w, nd = int(rng.integers(4, 20)), int(rng.integers(4, 20)), int(rng.integers(2, 65))
        v = np.zeros(h * w, bool)
        v[rng.choice(h * w, size=max(1, round(0.1 * h * w)), replace=False)] = True
        v = v.reshape(h, w)
        # hints on the disparity grid, arbitrary positive costs
        costs = rng.uniform(1e-3, 100, (h, w, nd)).astype(np.float32)
        g = rng.integers(0, nd, (h, w)).astype(np.float64)
        vol = enhance_volume(CostVolume(costs), SparseHints(g, v), params)
        am = vol.costs.argmin(axis=2)
        np.testing.assert_array_equal(am[v], g[v].astype(int))
        # fractional hints, costs constant along disparity
        flat = np.repeat(rng.uniform(1e-3, 100, (h, w, 1)), nd, axis=2).astype(np.float32)
        gf = rng.uniform(0, nd - 1, (h, w))
        gf[0, 0] = 1.5  # exact tie between 1 and 2
        vol = enhance_volume(CostVolume(flat), SparseHints(gf, v), params)
        am = vol.costs.argmin(axis=2)
        expect = np.vectorize(nearest_integer)(gf)
        np.testing.assert_array_equal(am[v], expect[v])
        total += int(v.sum())
    assert total > 500


@pytest.fixture(scope="module")
def scenes():
    return {seed: make_scene(seed, **SCENE_KW) for seed in SCENE_SEEDS}


def run(left, right, hints, max_disp):
    return run_pipeline(left, right, hints, GuideParams(10.0, 1.0), SgmParams(), CostParams(max_disp))


@record(6, "guided SGM beats SGM on every fixture pair; >2 rate cut >= 25%; runtime")
def test_trend_reproduction(scenes):
    reductions = []
    for seed, (left, right, gt) in scenes.items():
        base = evaluate(run(left, right, None, SCENE_KW["max_disp"]), gt)
        hints = sample_hints(gt, 0.05, seed=100 + seed)
        guided = evaluate(run(left, right, hints, SCENE_KW["max_disp"]), gt)
        assert guided.avg_error < base.avg_error, f"scene {seed}: {guided.avg_error} vs {base.avg_error}"
        reductions.append(100.0 * (base.rate(2.0) - guided.rate(2.0)) / base.rate(2.0))
    mean_reduction = float(np.mean(reductions))
    assert mean_reduction >= TREND_MIN_REL_REDUCTION, f"mean >2 reduction {mean_reduction:.1f}%"
    # quarter-resolution-sized pair, single thread
    left, right, gt = make_scene(100, height=496, width=736, max_disp=80)
    hints = sample_hints(gt, 0.05, seed=0)
    t0 = time.perf_counter()
    run(left, right, hints, 80)
    elapsed = time.perf_counter() - t0
    assert elapsed < QUARTER_RES_SECONDS, f"{elapsed:.1f} s"


@record(7, "mean avg error non-increasing over densities 0, 0.01, 0.05")
def test_density_monotonicity(scenes):
    means = []
    for dens in (0.0, 0.01, 0.05):
        errs = []
        for seed, (left, right, gt) in scenes.items():
            base = run(left, right, None, SCENE_KW["max_disp"])
            for s in range(3):
                hints = sample_hints(gt, dens, seed=s)
                disp = run(left, right, hints, SCENE_KW["max_disp"])
                if dens == 0.0:
                    assert hints.count == 0
                    assert disp.d.tobytes() == base.d.tobytes()
                errs.append(evaluate(disp, gt).avg_error)
        means.append(float(np.mean(errs)))
    assert means[0] >= means[1] >= means[2], means


@record(8, "PFM bit-exact, KITTI PNG within 1/256, golden bytes")
def test_io_exactness(tmp_path):
    rng = np.random.default_rng(8)
    for i in range(30):
        h, w = rng.integers(1, 40, 2)
        # KITTI PNG covers [0, 65535 / 256]
        d = rng.uniform(0, 65535 / 256, (h, w)).astype(np.float32)
        d[rng.random((h, w)) < 0.25] = -1
        disp = DisparityMap(d)
        dio.write_pfm(disp, tmp_path / "a.pfm")
        assert dio.read_pfm(tmp_path / "a.pfm").d.tobytes() == disp.d.tobytes()
        dio.write_kitti_disparity(disp, tmp_path / "a.png")
        back = dio.read_kitti_disparity(tmp_path / "a.png")
        np.testing.assert_array_equal(back.valid, disp.valid)
        assert np.all(np.abs(back.d[disp.valid] - disp.d[disp.valid]) <= KITTI_PNG_TOL)
    golden_pfm = b"Pf\n2 2\n-1.0\n" + struct.pack("<4f", 3.5, np.inf, 1.5, 2.5)
    assert dio.pfm_bytes(DisparityMap(np.array([[1.5, 2.5], [3.5, -1]], np.float32))) == golden_pfm

    def chunk(kind, data):
        return struct.pack(">I", len(data)) + kind + data + struct.pack(">I", zlib.crc32(kind + data))

    golden_png = (b"\x89PNG\r\n\x1a\n"
                  + chunk(b"IHDR", struct.pack(">IIBBBBB", 2, 1, 16, 0, 0, 0, 0))
                  + chunk(b"IDAT", zlib.compress(bytes([0, 1, 0, 0, 0]), 6))
                  + chunk(b"IEND", b""))
    disp = DisparityMap(np.array([[1.0, -1.0]], np.float32))
    assert dio.encode_png16(dio.kitti_raw(disp)) == golden_png


@record(9, "metric oracles on 10-pixel cases; NoG = All minus hinted")
def test_metric_correctness():
    gt = DisparityMap(np.arange(1, 11, dtype=np.float32).reshape(1, 10))
    err = np.array([0, 0, 0, 0, 0, 0, 0, 5, 5, 5], np.float32)
    pred = DisparityMap(gt.d + err)
    r = evaluate(pred, gt, (2, 3, 4, 5))
    assert r.error_rates == (30.0, 30.0, 30.0, 0.0) and r.avg_error == 1.5
    v = err[None, :] > 0
    nog = evaluate(pred, gt, (3,), "nog", SparseHints(np.where(v, gt.d, 0), v))
    assert nog.error_rates == (0.0,) and nog.avg_error == 0.0
    assert evaluate(gt, gt).error_rates == (0.0,) * 4
    rng = np.random.default_rng(9)
    for _ in range(200):
        shape = tuple(rng.integers(1, 12, 2))
        g = np.where(rng.random(shape) < 0.7, rng.uniform(0, 30, shape), -1).astype(np.float32)
        if not (g >= 0).any():
            continue
        hv = rng.random(shape) < 0.3
        gt = DisparityMap(g)
        if not (gt.valid & ~hv).any():
            continue
        pred = DisparityMap(rng.uniform(0, 30, shape).astype(np.float32))
        hints = SparseHints(np.zeros(shape), hv)
        all_n = evaluate(pred, gt).evaluated_pixels
        nog_n = evaluate(pred, gt, mask="nog", hints=hints).evaluated_pixels
        assert nog_n == all_n - int((hv & gt.valid).sum())
