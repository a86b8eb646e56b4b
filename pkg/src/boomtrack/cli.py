"""``boomtrack`` command line.

Subcommands::

    boomtrack dict      generate a marker dictionary file
    boomtrack simulate  render a lab-boom scenario (frames, truth, sensor trace)
    boomtrack detect    decode markers in an image folder -> detections JSONL
    boomtrack quantify  detections -> metric displacement CSV
    boomtrack incline   inclinometer CSV -> arc displacement CSV
    boomtrack validate  compare vision and sensor displacement, pass/fail
    boomtrack eval      precision/recall/AP against ground truth

Exit status: 0 success, 1 validation failed, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import io
import sys
from pathlib import Path
from typing import Sequence

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_ERROR = 2


class UsageError(Exception):
    pass


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _unit_interval(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{v} is outside [0, 1]")
    return v


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"{v} must be positive")
    return v


def _require(*paths: str | None) -> None:
    for p in paths:
        if p is not None and not Path(p).exists():
            raise UsageError(f"input not found: {p}")


def _emit(text: str, out: str | None) -> None:
    from boomtrack._io import atomic_write_text

    if out:
        atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_dict(args: argparse.Namespace) -> int:
    from boomtrack.fiducial.dictionary import generate_dictionary

    d = generate_dictionary(args.grid, args.count, args.min_hamming, seed=args.seed)
    _emit(d.dumps(), args.out)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    from boomtrack.sim.scenario import Scenario, load_scenario, summarize, write_scenario

    if args.config:
        _require(args.config)
        scenario = load_scenario(args.config, seed=args.seed)
    else:
        scenario = Scenario(seed=args.seed)
    res = write_scenario(scenario, args.out)
    print(summarize(res))
    return EXIT_OK


def cmd_detect(args: argparse.Namespace) -> int:
    from boomtrack.detections import dumps_detections
    from boomtrack.fiducial.detect import DetectorParams
    from boomtrack.fiducial.dictionary import MarkerDictionary
    from boomtrack.pipeline import detect_directory

    _require(args.dict, args.images)
    d = MarkerDictionary.load(args.dict)
    params = DetectorParams(threshold_window=args.window, threshold_offset=args.offset)
    dets, n_images = detect_directory(args.images, d, params, marker_id=args.marker_id)
    _emit(dumps_detections(dets), args.out)
    frames_hit = len({x.t for x in dets})
    print(f"images={n_images} detections={len(dets)} frames_with_detection={frames_hit}", file=sys.stderr)
    return EXIT_OK


def cmd_quantify(args: argparse.Namespace) -> int:
    from boomtrack.detections import load_detections
    from boomtrack.displacement import CalibrationProfile, EmptyStreamError, dumps_displacements
    from boomtrack.pipeline import quantify

    _require(args.dets)
    stream = load_detections(args.dets)
    calib = CalibrationProfile(args.pitch)
    try:
        samples = quantify(stream, calib, args.min_conf)
    except EmptyStreamError:
        # no anchor exists; every frame is a gap and nothing is fabricated
        samples = []
        print("warning: no detection reached --min-conf; displacement is empty (all frames are gaps)", file=sys.stderr)
    _emit(dumps_displacements(samples), args.out)
    if args.plot and samples:
        from boomtrack.plotting import plot_displacement

        plot_displacement(samples, args.plot)
    return EXIT_OK


def cmd_incline(args: argparse.Namespace) -> int:
    from boomtrack.displacement import dumps_displacements
    from boomtrack.incline import load_readings, readings_to_displacement

    _require(args.readings)
    readings = load_readings(args.readings)
    samples = readings_to_displacement(readings, args.radius, paper_compat=args.paper_compat, axis=args.axis)
    _emit(dumps_displacements(samples), args.out)
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    from boomtrack.displacement import load_displacements
    from boomtrack.pipeline import frame_timeline
    from boomtrack.validate import align, compare, count_gaps, dumps_report, empty_report

    _require(args.vision, args.sensor, args.frames)
    vision = load_displacements(args.vision)
    sensor = load_displacements(args.sensor)
    gaps = count_gaps(frame_timeline(args.frames), vision) if args.frames else 0
    if not sensor:
        raise UsageError(f"sensor stream {args.sensor} is empty")
    if not vision:
        report = empty_report(args.tolerance, gaps, note="no vision samples")
    else:
        al = align(vision, sensor, args.max_lag)
        if al.pairs:
            report = compare(
                al.pairs, args.tolerance, use_magnitude=args.magnitude,
                gap_count=gaps, dropped_count=len(al.dropped),
            )
        else:
            report = empty_report(args.tolerance, gaps, len(al.dropped), note="no aligned pairs")
    text = dumps_report(report)
    if args.out:
        _emit(text, args.out)
        footer = text.split("\n\n", 1)[1] if "\n\n" in text else text
        sys.stdout.write(footer)
    else:
        sys.stdout.write(text)
    if args.plot and report.pairs:
        from boomtrack.plotting import plot_validation

        plot_validation(report, args.plot)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_eval(args: argparse.Namespace) -> int:
    from boomtrack.detections import image_key, load_detections, load_ground_truth
    from boomtrack.metrics import EvalConfig, evaluate, match_detections, precision_recall_curve

    _require(args.dets, args.gt)
    cfg = EvalConfig(tuple(sorted(args.iou)))
    stream = load_detections(args.dets)
    gt = load_ground_truth(args.gt)
    dets: dict[str, list] = {}
    for d in stream:
        if d.confidence >= args.min_conf:
            dets.setdefault(image_key(d), []).append(d)
    rows = evaluate(dets, gt, cfg)
    buf = io.StringIO()
    buf.write("iou_threshold,ap,precision,recall,tp,fp,fn\n")
    for m in rows:
        buf.write(f"{m.iou_threshold:.2f},{m.ap:.6f},{m.precision:.6f},{m.recall:.6f},{m.tp},{m.fp},{m.fn}\n")
    _emit(buf.getvalue(), args.out)
    if args.out:
        for m in rows:
            print(f"mAP@{round(m.iou_threshold * 100)}={m.ap:.6f}")
    if args.plot:
        from boomtrack.plotting import plot_pr_curves

        curves = {}
        for t in cfg.iou_thresholds:
            mr = match_detections(dets, gt, t)
            curves[t] = precision_recall_curve([ok for _, ok in mr.labeled], mr.n_gt)
        plot_pr_curves(curves, args.plot)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="boomtrack", description="Sprayer boom displacement from camera frames.")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    s = sub.add_parser("dict", help="generate a marker dictionary")
    s.add_argument("--grid", type=int, default=6)
    s.add_argument("--count", type=int, default=50)
    s.add_argument("--min-hamming", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_dict)

    s = sub.add_parser("simulate", help="render a boom scenario")
    s.add_argument("--config", help="key = value scenario file (defaults to the built-in lab scenario)")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("detect", help="decode markers in an image folder")
    s.add_argument("--dict", required=True)
    s.add_argument("--images", required=True)
    s.add_argument("--out")
    s.add_argument("--marker-id", type=int)
    s.add_argument("--window", type=int, default=15, help="adaptive threshold window, px")
    s.add_argument("--offset", type=float, default=7.0, help="adaptive threshold offset, gray levels")
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("quantify", help="detections -> displacement CSV")
    s.add_argument("--dets", required=True)
    s.add_argument("--pitch", type=_positive, default=0.003196, help="meters per pixel at target depth")
    s.add_argument("--min-conf", type=_unit_interval, default=0.5)
    s.add_argument("--out")
    s.add_argument("--plot", help="optional figure path (png/pdf/svg)")
    s.set_defaults(func=cmd_quantify)

    s = sub.add_parser("incline", help="inclinometer readings -> displacement CSV")
    s.add_argument("--readings", required=True)
    s.add_argument("--radius", type=_positive, default=18.2, help="boom length from pivot, meters")
    s.add_argument("--axis", type=int, choices=(1, 2), default=1)
    s.add_argument("--paper-compat", action="store_true", help="use the legacy 1.046 ft/deg x 304.8 chain")
    s.add_argument("--out")
    s.set_defaults(func=cmd_incline)

    s = sub.add_parser("validate", help="vision vs sensor agreement report")
    s.add_argument("--vision", required=True)
    s.add_argument("--sensor", required=True)
    s.add_argument("--tolerance", type=_positive, default=0.026)
    s.add_argument("--max-lag", type=float, default=0.15)
    s.add_argument("--magnitude", action="store_true", help="score |displacement| instead of the vertical axis")
    s.add_argument("--frames", help="frame timeline (image folder or CSV with t_s) used to count gaps")
    s.add_argument("--out")
    s.add_argument("--plot", help="optional figure path (png/pdf/svg)")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("eval", help="AP at IoU thresholds against ground truth")
    s.add_argument("--dets", required=True)
    s.add_argument("--gt", required=True)
    s.add_argument("--iou", type=_float_list, default=(0.5, 0.9))
    s.add_argument("--min-conf", type=_unit_interval, default=0.0)
    s.add_argument("--out")
    s.add_argument("--plot", help="optional precision-recall figure path")
    s.set_defaults(func=cmd_eval)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_ERROR
    try:
        return args.func(args)
    except (UsageError, OSError, ValueError) as exc:
        print(f"boomtrack {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
