"""Bad-pixel rates, average error, All/NoG masks, and CSV reports."""

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .types import StereoError, density

KITTI_THRESHOLDS = (2.0, 3.0, 4.0, 5.0)
MIDDLEBURY_THRESHOLDS = (0.5, 1.0, 2.0, 4.0)
PRESETS = {"kitti": KITTI_THRESHOLDS, "middlebury": MIDDLEBURY_THRESHOLDS, "eth3d": MIDDLEBURY_THRESHOLDS}

MASKS = ("all", "nog")


@dataclass(frozen=True)
class EvalReport:
    """Error rates (percent) per threshold plus mean absolute error.

    Pixels whose prediction is invalid count as errors at every threshold.
    They enter ``avg_error`` only when evaluated with ``invalid_as_error``;
    ``invalid_frac`` reports their share of the evaluated set either way.
    """

    thresholds: tuple
    error_rates: tuple
    avg_error: float
    mask: str
    evaluated_pixels: int
    hint_density_achieved: float = 0.0
    invalid_frac: float = 0.0

    def rate(self, threshold):
        return self.error_rates[self.thresholds.index(threshold)]


def threshold_label(t):
    return f">{t:g}"


def _check_thresholds(thresholds):
    thresholds = tuple(float(t) for t in thresholds)
    if not thresholds:
        raise StereoError("at least one threshold is required")
    if any(t < 0 or not math.isfinite(t) for t in thresholds):
        raise StereoError(f"thresholds must be finite and >= 0, got {thresholds}")
    if len(set(thresholds)) != len(thresholds):
        raise StereoError(f"duplicate thresholds in {thresholds}")
    return thresholds


def evaluation_mask(gt, mask="all", hints=None):
    """Boolean mask of the pixels an evaluation counts."""
    if mask not in MASKS:
        raise StereoError(f"mask must be one of {MASKS}, got {mask!r}")
    sel = gt.valid.copy()
    if mask == "nog":
        if hints is None:
            raise StereoError("NoG evaluation needs the hints that were used")
        if hints.v.shape != sel.shape:
            raise StereoError(f"hints are {hints.v.shape}, ground truth is {sel.shape}")
        sel &= ~hints.v
    return sel


def evaluate(pred, gt, thresholds=KITTI_THRESHOLDS, mask="all", hints=None,
             invalid_as_error=False, max_disparity=None):
    """Compare ``pred`` against ``gt`` over the pixels where ``gt`` is valid.

    With ``mask="nog"`` the hinted pixels are removed from that set. When
    ``invalid_as_error`` is set, invalid predictions add ``max_disparity`` to
    the average error.
    """
    if pred.d.shape != gt.d.shape:
        raise StereoError(f"prediction is {pred.d.shape}, ground truth is {gt.d.shape}")
    thresholds = _check_thresholds(thresholds)
    sel = evaluation_mask(gt, mask, hints)
    n = int(sel.sum())
    if n == 0:
        raise StereoError("evaluation set is empty")
    pv = pred.valid[sel]
    err = np.abs(pred.d[sel].astype(np.float64) - gt.d[sel].astype(np.float64))
    rates = tuple(100.0 * float(np.count_nonzero(~pv | (err > t))) / n for t in thresholds)
    n_invalid = int(np.count_nonzero(~pv))
    if invalid_as_error:
        if max_disparity is None:
            raise StereoError("invalid_as_error needs max_disparity")
        avg = (float(err[pv].sum()) + n_invalid * float(max_disparity)) / n
    elif n_invalid == n:
        avg = float("nan")
    else:
        avg = float(err[pv].mean())
    return EvalReport(
        thresholds=thresholds,
        error_rates=rates,
        avg_error=avg,
        mask=mask,
        evaluated_pixels=n,
        hint_density_achieved=density(hints) if hints is not None else 0.0,
        invalid_frac=n_invalid / n,
    )


@dataclass(frozen=True)
class MetricDelta:
    baseline: float
    guided: float
    absolute: float
    relative_pct: Optional[float]


def compare(baseline, guided):
    """Signed guided-minus-baseline deltas per metric, keyed ``">t"`` and ``"avg"``.

    ``relative_pct`` is ``None`` when the baseline metric is zero.
    """
    if baseline.thresholds != guided.thresholds:
        raise StereoError(f"threshold sets differ: {baseline.thresholds} vs {guided.thresholds}")
    if baseline.mask != guided.mask:
        raise StereoError(f"masks differ: {baseline.mask} vs {guided.mask}")
    pairs = [(threshold_label(t), b, g)
             for t, b, g in zip(baseline.thresholds, baseline.error_rates, guided.error_rates)]
    pairs.append(("avg", baseline.avg_error, guided.avg_error))
    out = {}
    for name, b, g in pairs:
        rel = None if b == 0 else 100.0 * (g - b) / b
        out[name] = MetricDelta(b, g, g - b, rel)
    return out


# --------------------------------------------------------------------------
# CSV

BASE_COLUMNS = ("pair", "mask", "density", "k", "c")
TAIL_COLUMNS = ("avg", "invalid_frac")


def csv_header(thresholds, extra=()):
    return list(BASE_COLUMNS) + [threshold_label(t) for t in thresholds] + list(TAIL_COLUMNS) + list(extra)


def report_row(report, pair, k, c, density=None, extra=None):
    """CSV row dict for ``report``; ``density`` defaults to the achieved one."""
    row = {
        "pair": pair,
        "mask": report.mask,
        "density": f"{report.hint_density_achieved if density is None else density:.6g}",
        "k": f"{k:g}",
        "c": f"{c:g}",
    }
    for t, r in zip(report.thresholds, report.error_rates):
        row[threshold_label(t)] = f"{r:.6f}"
    row["avg"] = f"{report.avg_error:.6f}"
    row["invalid_frac"] = f"{report.invalid_frac:.6f}"
    if extra:
        row.update({key: str(val) for key, val in extra.items()})
    return row


def append_rows(path, header, rows):
    """Append rows to a CSV file, writing the header if the file is new."""
    path = str(path)
    try:
        with open(path, newline="") as f:
            existing = next(csv.reader(f), None)
    except FileNotFoundError:
        existing = None
    if existing is not None and existing != list(header):
        raise StereoError(f"{path} has header {existing}, expected {list(header)}")
    with open(path, "a", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(header))
        if existing is None:
            writer.writeheader()
        for row in rows:
            writer.writerow(row)


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def report_from_row(row):
    """Rebuild an :class:`EvalReport` from a CSV row dict."""
    thresholds, rates = [], []
    for key, value in row.items():
        if key.startswith(">"):
            thresholds.append(float(key[1:]))
            rates.append(float(value))
    return EvalReport(
        thresholds=tuple(thresholds),
        error_rates=tuple(rates),
        avg_error=float(row["avg"]),
        mask=row["mask"],
        evaluated_pixels=0,
        hint_density_achieved=float(row.get("density") or 0.0),
        invalid_frac=float(row.get("invalid_frac") or 0.0),
    )
