"""Command-line interface.

One executable with subcommands refine / dvf / warp / checkerboard /
eval / pipeline / synth. Exit codes: 0 success, 1 usage error, 2 data
error (malformed or inconsistent input files), 3 external matcher
failure. Every randomized subcommand takes --seed (default 0); JSON
reports are rendered with fixed key order and 9-significant-digit
floats, so identical runs produce identical bytes.
"""

import argparse
import os
import sys

import numpy as np

from . import evaluation, io, multiscale, synth, tps
from .errors import DataError, MatcherUnavailableError
from .warp import checkerboard, warp as warp_image
from .iforest import IsolationForestFilter
from .local_affine import LocalAffineFilter
from .refinery import refine
from .types import ImageMeta

USAGE_EXIT = 1
DATA_EXIT = 2
MATCHER_EXIT = 3


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures remapped from exit code 2 to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(USAGE_EXIT)


def _add_threads_flag(parser):
    parser.add_argument(
        "--threads",
        type=int,
        default=int(os.environ.get("HISTOREG_THREADS", "0")) or None,
        help="cap worker threads (1 forces sequential; results are "
        "identical at any setting — evaluation order never changes them)",
    )


def _add_filter_flags(parser):
    g = parser.add_argument_group("outlier filters")
    g.add_argument("--if-trees", type=int, default=100, help="isolation forest tree count")
    g.add_argument("--if-subsample", type=int, default=256, help="per-tree subsample size")
    g.add_argument("--if-threshold", type=float, default=0.6, help="anomaly score threshold")
    g.add_argument(
        "--if-contamination", type=float, default=None,
        help="flag this top fraction of scores instead of using --if-threshold",
    )
    g.add_argument("--la-rounds", type=int, default=10, help="local affine sampling rounds")
    g.add_argument("--la-fraction", type=float, default=0.25, help="per-round sample fraction")
    g.add_argument(
        "--la-threshold", type=float, default=None,
        help="mean deviation threshold in pixels (default: 2%% of the source extent diagonal)",
    )
    g.add_argument("--dedup-radius", type=float, default=1.0,
                   help="merge radius in pixels; 0 disables deduplication")


def _filters_from(args):
    forest = IsolationForestFilter(
        n_trees=args.if_trees,
        subsample_size=args.if_subsample,
        score_threshold=args.if_threshold,
        contamination=args.if_contamination,
        random_state=args.seed,
    )
    local = LocalAffineFilter(
        rounds=args.la_rounds,
        sample_fraction=args.la_fraction,
        deviation_threshold=args.la_threshold,
        random_state=args.seed,
    )
    return forest, local


def _cmd_refine(args):
    sets = [io.read_match_csv(p) for p in args.matches]
    forest, local = _filters_from(args)
    surviving, report = refine(
        sets, forest=forest, local=local, dedup_radius=args.dedup_radius
    )
    io.write_match_csv(surviving, args.out)
    if args.report:
        io.write_report(report.to_json_dict(), args.report)
    print(f"kept {len(surviving)} of {report.merged_count} merged matches")
    return 0


def _meta(width, height):
    try:
        return ImageMeta(width, height)
    except ValueError as exc:
        raise DataError(str(exc)) from exc


def _cmd_dvf(args):
    matches = io.read_match_csv(args.matches)
    model = tps.fit_matches(matches, regularization=args.lam)
    meta = _meta(args.width, args.height)
    field = tps.rasterize(model, meta)
    io.write_dvf(field, args.out)
    report = {
        "width": meta.width,
        "height": meta.height,
        "control_points": int(len(model.controls_)),
        "lambda": float(args.lam),
        "jacobian": tps.jacobian_stats(field),
    }
    text = io.write_report(report, args.report)
    if args.report is None:
        sys.stdout.write(text)
    return 0


def _cmd_warp(args):
    if args.image is None and args.landmarks is None:
        raise DataError("nothing to do: provide --image and/or --landmarks")
    if (args.image is None) != (args.out is None):
        raise DataError("--image and --out must be given together")
    if (args.landmarks is None) != (args.landmarks_out is None):
        raise DataError("--landmarks and --landmarks-out must be given together")
    field = io.read_dvf(args.dvf)
    if args.image is not None:
        moving = io.read_image(args.image)
        io.write_image(warp_image(moving, field), args.out)
    if args.landmarks is not None:
        landmarks = io.read_landmarks_csv(args.landmarks)
        io.write_landmarks_csv(
            evaluation.transfer_landmarks(landmarks, field), args.landmarks_out
        )
    return 0


def _cmd_checkerboard(args):
    a = io.read_image(args.a)
    b = io.read_image(args.b)
    io.write_image(checkerboard(a, b, tile=args.tile), args.out)
    return 0


def _cmd_eval(args):
    if len(args.pred) != len(args.truth):
        raise DataError(
            f"{len(args.pred)} --pred files vs {len(args.truth)} --truth files"
        )
    widths = _broadcast(args.width, len(args.pred), "--width")
    heights = _broadcast(args.height, len(args.pred), "--height")
    pairs = []
    for pred_path, truth_path, w, h in zip(args.pred, args.truth, widths, heights):
        pairs.append(
            (
                io.read_landmarks_csv(pred_path),
                io.read_landmarks_csv(truth_path),
                _meta(w, h),
            )
        )
    report = evaluation.evaluate(pairs, squared=args.squared)
    text = io.write_report(report.to_json_dict(), args.out)
    if args.out is None:
        sys.stdout.write(text)
    return 0


def _broadcast(values, n, flag):
    if len(values) == 1:
        return values * n
    if len(values) != n:
        raise DataError(f"{flag} given {len(values)} times for {n} pairs")
    return values


def _cmd_pipeline(args):
    moving = io.read_image(args.moving)
    fixed = io.read_image(args.fixed)
    forest, local = _filters_from(args)
    matcher = multiscale.CommandMatcher(args.matcher)
    matches = multiscale.run_pyramid(
        moving,
        fixed,
        matcher,
        forest=forest,
        local=local,
        dedup_radius=args.dedup_radius,
        crop_size=args.crop_size,
        max_windows=args.max_windows,
        workdir=args.workdir,
    )
    io.write_match_csv(matches, args.out)
    print(f"pyramid produced {len(matches)} matches")
    return 0


def _field_from(args, meta):
    params = {}
    if args.kind == "translation":
        _put(params, "dx", args.dx)
        _put(params, "dy", args.dy)
    elif args.kind == "affine":
        if args.matrix is not None:
            values = [float(v) for v in args.matrix.split(",")]
            if len(values) != 4:
                raise DataError("--matrix needs 4 comma-separated values (a11,a12,a21,a22)")
            params["matrix"] = np.array(values).reshape(2, 2)
        _put(params, "dx", args.dx)
        _put(params, "dy", args.dy)
    elif args.kind == "sinusoidal":
        _put(params, "amplitude", args.amplitude)
        _put(params, "cycles", args.cycles)
        _put(params, "phase", args.phase)
    else:
        _put(params, "cx", args.cx)
        _put(params, "cy", args.cy)
        _put(params, "sigma", args.sigma)
        _put(params, "dx", args.dx)
        _put(params, "dy", args.dy)
    try:
        return synth.make_field(meta, args.kind, params, seed=args.seed)
    except ValueError as exc:
        raise DataError(str(exc)) from exc


def _put(params, key, value):
    if value is not None:
        params[key] = value


def _cmd_synth_field(args):
    meta = _meta(args.width, args.height)
    field = _field_from(args, meta)
    io.write_dvf(field.rasterize(), args.out)
    return 0


def _cmd_synth_matches(args):
    meta = _meta(args.width, args.height)
    field = _field_from(args, meta)
    matches, labels = synth.make_matches(
        field,
        count=args.count,
        noise_sigma=args.noise,
        outlier_fraction=args.outlier_fraction,
        outlier_magnitude=args.outlier_magnitude,
        seed=args.seed,
    )
    io.write_match_csv(matches, args.out)
    if args.labels:
        _write_labels(labels, args.labels)
    return 0


def _write_labels(labels, path):
    try:
        with open(path, "w", newline="") as fp:
            fp.write("index,is_outlier\n")
            for i, flag in enumerate(labels):
                fp.write(f"{i},{int(flag)}\n")
    except OSError as exc:
        raise DataError(str(exc)) from exc


def _cmd_synth_pair(args):
    import pathlib

    out_dir = pathlib.Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = _meta(args.width, args.height)
    field = _field_from(args, meta)
    moving, fixed = synth.make_pair(field, seed=args.seed)
    matches, labels = synth.make_matches(
        field,
        count=args.count,
        noise_sigma=args.noise,
        outlier_fraction=args.outlier_fraction,
        outlier_magnitude=args.outlier_magnitude,
        seed=args.seed,
    )
    rng = np.random.default_rng(args.seed + 1)
    landmarks_fixed = np.column_stack([
        rng.uniform(0.0, meta.width - 1.0, size=args.landmarks),
        rng.uniform(0.0, meta.height - 1.0, size=args.landmarks),
    ])
    landmarks_moving = landmarks_fixed + field(landmarks_fixed)
    io.write_image(moving, out_dir / "moving.png")
    io.write_image(fixed, out_dir / "fixed.png")
    io.write_dvf(field.rasterize(), out_dir / "field.dvf")
    io.write_match_csv(matches, out_dir / "matches.csv")
    _write_labels(labels, out_dir / "labels.csv")
    io.write_landmarks_csv(landmarks_fixed, out_dir / "landmarks_fixed.csv")
    io.write_landmarks_csv(landmarks_moving, out_dir / "landmarks_moving.csv")
    print(f"wrote synthetic pair into {out_dir}")
    return 0


def _add_field_flags(parser):
    parser.add_argument("--width", type=int, required=True)
    parser.add_argument("--height", type=int, required=True)
    parser.add_argument("--kind", choices=synth.FIELD_KINDS, default="sinusoidal")
    parser.add_argument("--dx", type=float, default=None, help="translation/bump x component")
    parser.add_argument("--dy", type=float, default=None, help="translation/bump y component")
    parser.add_argument("--matrix", default=None, help="affine linear part a11,a12,a21,a22")
    parser.add_argument("--amplitude", type=float, default=None, help="sinusoidal amplitude, px")
    parser.add_argument("--cycles", type=float, default=None, help="sinusoidal cycles across the image")
    parser.add_argument("--phase", type=float, default=None, help="sinusoidal phase, radians")
    parser.add_argument("--cx", type=float, default=None, help="bump center x")
    parser.add_argument("--cy", type=float, default=None, help="bump center y")
    parser.add_argument("--sigma", type=float, default=None, help="bump width, px")


def _add_match_gen_flags(parser):
    parser.add_argument("--count", type=int, default=500, help="matches to generate")
    parser.add_argument("--noise", type=float, default=1.0, help="coordinate noise sigma, px")
    parser.add_argument("--outlier-fraction", type=float, default=0.0)
    parser.add_argument("--outlier-magnitude", type=float, default=50.0,
                        help="minimum planted outlier offset, px")


def build_parser():
    parser = _Parser(prog="historeg", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("refine", help="merge match CSVs and reject outliers")
    p.add_argument("--matches", action="append", required=True,
                   help="match CSV (repeat for multiple matchers)")
    p.add_argument("--out", required=True, help="surviving matches CSV")
    p.add_argument("--report", default=None, help="JSON stage report")
    p.add_argument("--seed", type=int, default=0)
    _add_filter_flags(p)
    _add_threads_flag(p)
    p.set_defaults(func=_cmd_refine)

    p = sub.add_parser("dvf", help="interpolate matches into a dense displacement field")
    p.add_argument("--matches", required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0,
                   help="spline regularization (0 interpolates exactly)")
    p.add_argument("--out", required=True, help="output DVF raster")
    p.add_argument("--report", default=None,
                   help="JSON diagnostics (printed to stdout when omitted)")
    _add_threads_flag(p)
    p.set_defaults(func=_cmd_dvf)

    p = sub.add_parser("warp", help="apply a displacement field to an image / landmarks")
    p.add_argument("--dvf", required=True)
    p.add_argument("--image", default=None, help="moving image to resample")
    p.add_argument("--out", default=None, help="output image")
    p.add_argument("--landmarks", default=None, help="landmark CSV to transfer")
    p.add_argument("--landmarks-out", default=None, help="output landmark CSV")
    _add_threads_flag(p)
    p.set_defaults(func=_cmd_warp)

    p = sub.add_parser("checkerboard", help="tile two registered images for inspection")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--tile", type=int, default=64)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_checkerboard)

    p = sub.add_parser("eval", help="score predicted landmarks against truth")
    p.add_argument("--pred", action="append", required=True)
    p.add_argument("--truth", action="append", required=True)
    p.add_argument("--width", type=int, action="append", required=True)
    p.add_argument("--height", type=int, action="append", required=True)
    p.add_argument("--squared", action="store_true",
                   help="report squared relative errors")
    p.add_argument("--out", default=None, help="JSON report (stdout when omitted)")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("pipeline", help="run an external matcher coarse-to-fine and refine")
    p.add_argument("--moving", required=True)
    p.add_argument("--fixed", required=True)
    p.add_argument("--matcher", required=True,
                   help='command template, e.g. "adapter {a} {b} {out}"')
    p.add_argument("--out", required=True, help="refined matches CSV")
    p.add_argument("--crop-size", type=int, default=multiscale.DEFAULT_CROP_SIZE)
    p.add_argument("--max-windows", type=int, default=multiscale.DEFAULT_MAX_WINDOWS,
                   help="cap on matcher invocations per level")
    p.add_argument("--workdir", default=None, help="keep crops here instead of a temp dir")
    p.add_argument("--seed", type=int, default=0)
    _add_filter_flags(p)
    _add_threads_flag(p)
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("synth", help="generate synthetic benchmark data")
    synth_sub = p.add_subparsers(dest="synth_command", parser_class=_Parser)

    q = synth_sub.add_parser("field", help="write an analytic displacement raster")
    _add_field_flags(q)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True)
    q.set_defaults(func=_cmd_synth_field)

    q = synth_sub.add_parser("matches", help="sample matches consistent with a field")
    _add_field_flags(q)
    _add_match_gen_flags(q)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True)
    q.add_argument("--labels", default=None, help="outlier label CSV")
    q.set_defaults(func=_cmd_synth_matches)

    q = synth_sub.add_parser("pair", help="write a full synthetic registration bundle")
    _add_field_flags(q)
    _add_match_gen_flags(q)
    q.add_argument("--landmarks", type=int, default=50, help="evaluation landmarks to sample")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out-dir", required=True)
    q.set_defaults(func=_cmd_synth_pair)

    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        return USAGE_EXIT
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except MatcherUnavailableError as exc:
        print(f"matcher error: {exc}", file=sys.stderr)
        return MATCHER_EXIT


if __name__ == "__main__":
    raise SystemExit(main())
