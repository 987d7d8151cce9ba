"""Command-line front end.

Sub-commands: ``compute``, ``sample-hints``, ``eval``, ``compare``, ``sweep``
and ``synth``. Option values come from, in decreasing priority, the command
line, a ``key=value`` file given with the top-level ``--config`` option
(keys are option names without dashes, e.g. ``max_disp=96``), and built-in
defaults.

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 computation error.
"""

import argparse
import os
import sys
import time

import numpy as np

from . import dataset_io as dio
from .census import CostParams
from .evaluation import (
    KITTI_THRESHOLDS,
    PRESETS,
    append_rows,
    compare,
    csv_header,
    evaluate,
    read_rows,
    report_from_row,
    report_row,
    threshold_label,
)
from .guide import read_hints, sample_hints, write_hints
from .sgm import SgmParams, run_pipeline
from .types import GuideParams, SparseHints, StereoError, density

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DOMAIN = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text):
    text = text.strip().lower()
    if text in PRESETS:
        return PRESETS[text]
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_guide_flags(p):
    p.add_argument("--k", type=float, default=10.0, help="Gaussian peak magnitude (default: %(default)s)")
    p.add_argument("--c", type=float, default=1.0, help="Gaussian width in disparities (default: %(default)s)")


def _add_sgm_flags(p):
    p.add_argument("--p1", type=float, default=10.0, help="small-jump penalty (default: %(default)s)")
    p.add_argument("--p2", type=float, default=120.0, help="large-jump penalty (default: %(default)s)")
    p.add_argument("--paths", type=int, choices=(4, 8), default=8, help="scanline directions (default: %(default)s)")
    p.add_argument("--max-disp", type=int, default=64, help="number of disparity candidates (default: %(default)s)")
    p.add_argument("--census-radius", type=int, default=2, help="census window radius (default: %(default)s)")
    p.add_argument("--cost", choices=("census", "sad"), default="census", help="matching cost (default: %(default)s)")
    p.add_argument("--lr-threshold", type=float, default=None,
                   help="left-right check tolerance in px; omitted disables the check (default: %(default)s)")
    p.add_argument("--no-subpixel", action="store_true", help="disable parabola refinement (default: off)")


def build_parser():
    parser = _Parser(prog="guided-stereo", description="Guided semi-global stereo matching.")
    parser.add_argument("--config", help="key=value file with option defaults")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("compute", help="compute a disparity map for a stereo pair")
    p.add_argument("--left", required=True, help="left (reference) image")
    p.add_argument("--right", required=True, help="right image")
    p.add_argument("--out", required=True, help="output disparity file")
    p.add_argument("--hints", help="hint file ('row col disparity' lines); omitted runs plain SGM")
    _add_guide_flags(p)
    _add_sgm_flags(p)
    p.add_argument("--out-format", choices=("pfm", "kitti-png"), default="pfm",
                   help="output format (default: %(default)s)")
    p.add_argument("--preview", help="also write a colour-mapped PNG preview here")
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("sample-hints", help="sample sparse hints from a ground-truth map")
    p.add_argument("--gt", required=True, help="ground-truth disparity (.pfm or KITTI .png)")
    p.add_argument("--density", type=float, default=0.05, help="fraction of pixels to sample (default: %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default: %(default)s)")
    p.add_argument("--out", required=True, help="output hint file")
    p.add_argument("--restrict-to-valid", action="store_true",
                   help="draw only among valid ground-truth pixels (default: draw over the whole image "
                        "and drop unlabelled ones)")
    p.set_defaults(func=cmd_sample_hints)

    p = sub.add_parser("eval", help="score a disparity map against ground truth")
    p.add_argument("--pred", required=True, help="predicted disparity (.pfm or .png)")
    p.add_argument("--gt", required=True, help="ground-truth disparity (.pfm or .png)")
    p.add_argument("--thresholds", type=_float_list, default=KITTI_THRESHOLDS,
                   help="comma-separated error bounds or a preset (kitti, middlebury, eth3d) "
                        "(default: 2,3,4,5)")
    p.add_argument("--mask", choices=("all", "nog"), default="all",
                   help="all ground-truth pixels, or exclude hinted pixels (default: %(default)s)")
    p.add_argument("--hints", help="hint file used for the prediction (required by --mask nog)")
    p.add_argument("--csv", help="append the report as a CSV row to this file")
    p.add_argument("--pair", default="pair", help="pair name for the CSV row (default: %(default)s)")
    _add_guide_flags(p)
    p.add_argument("--invalid-as-error", action="store_true",
                   help="count invalid predictions as max-disp error in avg (default: off)")
    p.add_argument("--max-disp", type=int, default=None, help="error charged by --invalid-as-error")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="deltas between a baseline and a guided CSV report")
    p.add_argument("--baseline", required=True, help="CSV with the baseline row")
    p.add_argument("--guided", required=True, help="CSV with the guided row")
    p.add_argument("--pair", help="pick rows for this pair (default: first row)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="guided vs unguided over a manifest, densities and seeds")
    p.add_argument("--manifest", required=True, help="'name left right gt [calib]' lines")
    p.add_argument("--densities", type=_float_list, default=(0.0, 0.01, 0.05),
                   help="hint densities (default: 0,0.01,0.05)")
    p.add_argument("--seeds", type=int, default=3, help="seeds 0..N-1 per density (default: %(default)s)")
    p.add_argument("--thresholds", type=_float_list, default=KITTI_THRESHOLDS,
                   help="error bounds or preset (default: 2,3,4,5)")
    p.add_argument("--masks", default="all", help="comma-separated subset of all,nog (default: %(default)s)")
    p.add_argument("--csv", required=True, help="output CSV; existing rows are kept and skipped")
    p.add_argument("--restrict-to-valid", action="store_true", help="as in sample-hints")
    _add_guide_flags(p)
    _add_sgm_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="write procedural stereo pairs with dense ground truth")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, default=3, help="number of pairs (default: %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="first scene seed (default: %(default)s)")
    p.add_argument("--height", type=int, default=180, help="image height (default: %(default)s)")
    p.add_argument("--width", type=int, default=240, help="image width (default: %(default)s)")
    p.add_argument("--max-disp", type=int, default=64, help="disparity range (default: %(default)s)")
    p.set_defaults(func=cmd_synth)
    return parser


def _read_config(path):
    values = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def _apply_config(parser, argv, config_path):
    """Install config values as defaults of the selected sub-command."""
    values = _read_config(config_path)
    command = next((a for a in argv if not a.startswith("-") and a in _subparsers(parser)), None)
    if command is None:
        return
    sub = _subparsers(parser)[command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in values.items():
        if key not in known:
            raise UsageError(f"{config_path}: unknown option {key!r} for {command}")
        action = known[key]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
        else:
            defaults[key] = action.type(value) if action.type else value
            if action.required:
                action.required = False
    sub.set_defaults(**defaults)


def _subparsers(parser):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices
    return {}


def _params(args):
    guide = GuideParams(args.k, args.c)
    sgm = SgmParams(args.p1, args.p2, args.paths, args.lr_threshold, not args.no_subpixel)
    cost = CostParams(args.max_disp, args.cost, args.census_radius)
    return guide, sgm, cost


def write_preview(disp, path, max_disp=None):
    """Colour-mapped PNG of a disparity map; invalid pixels are black."""
    from matplotlib import colormaps
    from PIL import Image

    d = disp.d
    valid = disp.valid
    top = max_disp if max_disp else (float(d[valid].max()) if valid.any() else 1.0)
    norm = np.clip(np.where(valid, d, 0) / max(top, 1e-6), 0, 1)
    rgb = (colormaps["magma"](norm)[..., :3] * 255).astype(np.uint8)
    rgb[~valid] = 0
    Image.fromarray(rgb, mode="RGB").save(path)


def cmd_compute(args):
    guide, sgm, cost = _params(args)
    left = dio.read_image(args.left)
    right = dio.read_image(args.right)
    hints = read_hints(args.hints, left.height, left.width) if args.hints else None
    if hints is not None and hints.count == 0:
        hints = None
    timings = {}
    t0 = time.perf_counter()
    disp = run_pipeline(left, right, hints, guide, sgm, cost, timings=timings)
    total = time.perf_counter() - t0
    dio.write_disparity(disp, args.out, args.out_format)
    if args.preview:
        write_preview(disp, args.preview, args.max_disp)
    for stage, seconds in timings.items():
        print(f"{stage:>10s}: {seconds:8.3f} s")
    print(f"{'total':>10s}: {total:8.3f} s")
    if hints is not None:
        print(f"hint density: {density(hints):.4%} ({hints.count} px)")
    return EXIT_OK


def cmd_sample_hints(args):
    gt = dio.read_disparity(args.gt)
    hints = sample_hints(gt, args.density, args.seed, args.restrict_to_valid)
    write_hints(hints, args.out)
    print(f"achieved density: {density(hints):.6f} ({hints.count} of {hints.v.size} px)")
    return EXIT_OK


def _print_report(report, label=""):
    cells = "  ".join(f"{threshold_label(t)}: {r:7.3f}%" for t, r in zip(report.thresholds, report.error_rates))
    print(f"{label}[{report.mask}] {cells}  avg: {report.avg_error:.4f} px  "
          f"n={report.evaluated_pixels}  invalid: {report.invalid_frac:.4f}")


def cmd_eval(args):
    pred = dio.read_disparity(args.pred)
    gt = dio.read_disparity(args.gt)
    hints = read_hints(args.hints, gt.height, gt.width) if args.hints else None
    report = evaluate(pred, gt, args.thresholds, args.mask, hints,
                      invalid_as_error=args.invalid_as_error, max_disparity=args.max_disp)
    _print_report(report)
    if args.csv:
        append_rows(args.csv, csv_header(report.thresholds), [report_row(report, args.pair, args.k, args.c)])
    return EXIT_OK


def _pick_row(path, pair):
    rows = read_rows(path)
    if pair is not None:
        rows = [r for r in rows if r["pair"] == pair]
    if not rows:
        raise StereoError(f"{path}: no report row{'' if pair is None else ' for ' + pair}")
    return report_from_row(rows[0])


def cmd_compare(args):
    deltas = compare(_pick_row(args.baseline, args.pair), _pick_row(args.guided, args.pair))
    print(f"{'metric':>8s} {'baseline':>10s} {'guided':>10s} {'abs':>10s} {'rel':>9s}")
    for name, d in deltas.items():
        rel = "n/a" if d.relative_pct is None else f"{d.relative_pct:+.1f}%"
        print(f"{name:>8s} {d.baseline:10.3f} {d.guided:10.3f} {d.absolute:+10.3f} {rel:>9s}")
    return EXIT_OK


SWEEP_EXTRA = ("seed", "method", "density_achieved")


def _sweep_key(row):
    return (row["pair"], row["method"], row["mask"], float(row["density"]), row["seed"],
            float(row["k"]), float(row["c"]))


def cmd_sweep(args):
    guide, sgm, cost = _params(args)
    masks = [m.strip() for m in args.masks.split(",") if m.strip()]
    for m in masks:
        if m not in ("all", "nog"):
            raise UsageError(f"unknown mask {m!r}")
    header = csv_header(args.thresholds, SWEEP_EXTRA)
    done = set()
    if os.path.exists(args.csv):
        done = {_sweep_key(r) for r in read_rows(args.csv)}
    records = dio.read_manifest(args.manifest)
    for rec in records:
        if rec.gt_disparity is None:
            raise StereoError(f"pair {rec.name} has no ground truth")
    skipped = written = 0
    for rec in records:
        left = right = gt = None

        def load():
            return dio.read_image(rec.left), dio.read_image(rec.right), dio.read_disparity(rec.gt_disparity)

        cells = [("sgm", 0.0, "")] + [("sgm-gd", dens, str(seed))
                                     for dens in args.densities for seed in range(args.seeds)]
        for method, dens, seed in cells:
            keys = {m: (rec.name, method, m, float(dens), seed, float(args.k), float(args.c)) for m in masks}
            todo = [m for m in masks if keys[m] not in done]
            skipped += len(masks) - len(todo)
            if not todo:
                continue
            if left is None:
                left, right, gt = load()
            if method == "sgm":
                hints = None
                disp = run_pipeline(left, right, None, guide, sgm, cost)
            else:
                hints = sample_hints(gt, dens, int(seed), args.restrict_to_valid)
                disp = run_pipeline(left, right, hints, guide, sgm, cost)
            rows = []
            for m in todo:
                eval_hints = hints if hints is not None else SparseHints.empty(gt.height, gt.width)
                report = evaluate(disp, gt, args.thresholds, m, eval_hints)
                rows.append(report_row(report, rec.name, args.k, args.c, density=dens, extra={
                    "seed": seed, "method": method,
                    "density_achieved": f"{report.hint_density_achieved:.6g}",
                }))
                _print_report(report, f"{rec.name} {method} d={dens:g} s={seed or '-'} ")
            append_rows(args.csv, header, rows)
            written += len(rows)
    print(f"sweep: {written} rows written, {skipped} already present")
    return EXIT_OK


def cmd_synth(args):
    from .synthetic import make_scene

    os.makedirs(args.out, exist_ok=True)
    lines = []
    for i in range(args.count):
        seed = args.seed + i
        left, right, gt = make_scene(seed, args.height, args.width, args.max_disp)
        name = f"scene{seed:03d}"
        dio.write_image(left, os.path.join(args.out, f"{name}_left.png"))
        dio.write_image(right, os.path.join(args.out, f"{name}_right.png"))
        dio.write_pfm(gt, os.path.join(args.out, f"{name}_gt.pfm"))
        lines.append(f"{name} {name}_left.png {name}_right.png {name}_gt.pfm")
    with open(os.path.join(args.out, "manifest.txt"), "w") as f:
        f.write("# name left right gt\n" + "\n".join(lines) + "\n")
    print(f"wrote {args.count} pairs and manifest.txt to {args.out}")
    return EXIT_OK


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--config")
        known, _ = pre.parse_known_args(argv)
        if known.config:
            _apply_config(parser, argv, known.config)
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"guided-stereo: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, dio.FormatError) as exc:
        print(f"guided-stereo: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except StereoError as exc:
        print(f"guided-stereo: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
