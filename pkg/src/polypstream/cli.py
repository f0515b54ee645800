"""Command-line surface: filter, eval, ssim, synth, bench, sweep.

Exit codes: 0 success, 1 input error (bad flags, malformed files), 2
internal invariant violation. Reports are printed as ``key = value`` text;
``--json`` writes the same report as JSON.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

from .benchmark import bench_correlator, compare_backends, make_bench_detections, make_bench_frames
from .config import build_run_config, derive_sweep_config, parse_config_file
from .correlator import process_sequence
from .errors import InputError
from .evaluation import EvalReport, evaluate_sequences
from .formats import (
    parse_detections,
    parse_groundtruth,
    read_frames,
    read_image,
    write_detections,
    write_frames,
    write_groundtruth,
)
from .similarity import prepare_luma, ssim
from .synthetic import ScenarioConfig, TrackSpec, generate_scenario, standard_noise_config
from .geometry import BoundingBox


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (not 2) on usage errors."""

    def error(self, message):  # noqa: D102 - argparse hook
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


_CONFIG_FLAGS = {
    "half_window": int,
    "similarity_threshold": float,
    "confidence_gate": float,
    "fc_quorum": int,
    "fill_quorum": int,
    "fill_iou": float,
    "ssim_k1": float,
    "ssim_k2": float,
    "ssim_dynamic_range": float,
    "ssim_mode": str,
    "ssim_window_size": int,
    "ssim_stride": int,
    "downsample_w": int,
    "downsample_h": int,
}


def _add_config_flags(p: argparse.ArgumentParser, exclude: tuple[str, ...] = ()) -> None:
    p.add_argument("--config", help="key = value config file; flags override it")
    for key, typ in _CONFIG_FLAGS.items():
        if key in exclude:
            continue
        p.add_argument(f"--{key.replace('_', '-')}", type=typ, default=None, dest=key)


def _run_config(args: argparse.Namespace):
    file_values = parse_config_file(args.config) if args.config else {}
    overrides = {key: getattr(args, key, None) for key in _CONFIG_FLAGS}
    return build_run_config(file_values, overrides)


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        w, h = int(w), int(h)
    except ValueError:
        raise InputError(f"expected WIDTHxHEIGHT, got {text!r}") from None
    if w <= 0 or h <= 0:
        raise InputError(f"frame size must be positive, got {text!r}")
    return w, h


def _load_with_context(path: str, loader, *load_args, **load_kwargs):
    try:
        return loader(path, *load_args, **load_kwargs)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


def _format_value(value) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _print_report(report: EvalReport, out=None) -> None:
    out = out or sys.stdout
    for key, value in report.to_dict().items():
        if key.endswith("_pct") and value is not None:
            print(f"{key} = {value:.2f}", file=out)
        else:
            print(f"{key} = {_format_value(value)}", file=out)


def _write_json(path: str, payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if path == "-":
        print(text)
    else:
        Path(path).write_text(text + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_filter(args: argparse.Namespace) -> int:
    rc = _run_config(args)
    frames_dir = args.frames or rc.frames_dir
    det_path = args.detections or rc.detections
    out_path = args.output or rc.output
    if not frames_dir or not det_path or not out_path:
        raise InputError("filter needs --frames, --detections and --output")
    frames = read_frames(frames_dir)
    w, h = frames[0].width, frames[0].height
    dets = _load_with_context(det_path, parse_detections, w, h, len(frames))
    results = process_sequence(frames, dets, rc.iscu)
    write_detections(out_path, results, include_origin=True)
    kept = sum(len(r.kept) for r in results)
    added = sum(len(r.added) for r in results)
    removed = sum(r.removed_count for r in results)
    print(f"frames = {len(results)}")
    print(f"kept = {kept}")
    print(f"added = {added}")
    print(f"removed = {removed}")
    print(f"output = {out_path}")
    return 0


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None


def _infer_eval_dims(det_path: str, gt_path: str) -> tuple[int, int]:
    """Smallest frame that contains every record (clipping then a no-op)."""
    max_x = max_y = 1.0
    for raw in _read_text(det_path).splitlines():
        fields = raw.split("#", 1)[0].split()
        if len(fields) >= 6:
            try:
                max_x = max(max_x, float(fields[3]))
                max_y = max(max_y, float(fields[4]))
            except ValueError:
                pass  # the real parser reports the line
    for raw in _read_text(gt_path).splitlines():
        fields = raw.split("#", 1)[0].split()
        if len(fields) == 6:
            try:
                max_x = max(max_x, float(fields[2]) + float(fields[4]) / 2)
                max_y = max(max_y, float(fields[3]) + float(fields[5]) / 2)
            except ValueError:
                pass
    return math.ceil(max_x), math.ceil(max_y)


def _cmd_eval(args: argparse.Namespace) -> int:
    if len(args.detections) != len(args.ground_truth):
        raise InputError(
            f"{len(args.detections)} detection files but "
            f"{len(args.ground_truth)} ground-truth files"
        )
    if args.num_frames and len(args.num_frames) != len(args.detections):
        raise InputError("--num-frames must list one value per sequence")

    sequences = []
    for i, (det_path, gt_path) in enumerate(zip(args.detections, args.ground_truth)):
        if args.frame_size:
            w, h = _parse_size(args.frame_size)
        else:
            w, h = _infer_eval_dims(det_path, gt_path)
        declared = args.num_frames[i] if args.num_frames else None
        dets = _load_with_context(det_path, parse_detections, w, h, declared)
        gts = _load_with_context(gt_path, parse_groundtruth, declared)
        length = max(len(dets), len(gts))
        dets = _load_with_context(det_path, parse_detections, w, h, length)
        gts = _load_with_context(gt_path, parse_groundtruth, length)
        sequences.append((dets, gts))

    report = evaluate_sequences(sequences, iou_cut=args.iou_cut)
    _print_report(report)
    if args.json:
        _write_json(args.json, report.to_dict())
    return 0


def _cmd_ssim(args: argparse.Namespace) -> int:
    rc = _run_config(args)
    a = read_image(args.images[0])
    b = read_image(args.images[1])
    p = rc.iscu.ssim_params
    a = prepare_luma(a, p)
    b = prepare_luma(b, p)
    value = ssim(a, b, p)
    print(f"ssim = {value:.6f}")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    if args.preset == "standard":
        cfg = standard_noise_config(args.seed, args.n_frames)
    else:
        track = TrackSpec(
            start=BoundingBox(60.0, 60.0, 100.0, 100.0),
            velocity=(0.15, 0.1),
            wobble_amplitude=(2.0, 2.0),
            wobble_period=(61.0, 47.0),
        )
        cfg = ScenarioConfig(
            n_frames=args.n_frames, rng_seed=args.seed, tracks=(track,)
        )
    replacements = {}
    if args.frame_size:
        w, h = _parse_size(args.frame_size)
        replacements["frame_w"] = w
        replacements["frame_h"] = h
    if args.fp_rate is not None:
        replacements["transient_fp_rate"] = args.fp_rate
    if args.fp_lifetime is not None:
        replacements["fp_lifetime"] = args.fp_lifetime
    if args.dropout_rate is not None:
        replacements["tp_dropout_rate"] = args.dropout_rate
    if args.scene_breaks is not None:
        breaks = frozenset(int(s) for s in args.scene_breaks.split(",") if s.strip())
        replacements["scene_break_frames"] = breaks
    if replacements:
        try:
            cfg = dataclasses.replace(cfg, **replacements)
        except ValueError as exc:
            raise InputError(str(exc)) from None

    scenario = generate_scenario(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_frames(out / "frames", scenario.frames, args.image_format)
    write_detections(out / "detections.txt", scenario.raw_detections)
    write_groundtruth(out / "groundtruth.txt", scenario.ground_truth)
    print(f"frames = {cfg.n_frames}")
    print(f"tracks = {len(cfg.tracks)}")
    print(f"out = {out}")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    rc = _run_config(args)
    if args.frames:
        frames = read_frames(args.frames)
        w, h = frames[0].width, frames[0].height
        if args.detections:
            dets = _load_with_context(args.detections, parse_detections, w, h, len(frames))
        else:
            dets = make_bench_detections(w, h, len(frames))
        pool = frames
    else:
        w, h = _parse_size(args.frame_size)
        pool = make_bench_frames(w, h, seed=args.seed)
        dets = make_bench_detections(w, h, args.synthetic_frames)

    if args.compare_backends:
        results = compare_backends(pool, dets, rc.iscu)
    else:
        results = [bench_correlator(pool, dets, rc.iscu)]

    payload = {"frame_size": f"{w}x{h}", "results": []}
    for r in results:
        print(f"[backend = {r.backend}]")
        print(f"n_frames = {r.n_frames}")
        print(f"mpt_ms = {r.mpt_ms:.4f}")
        print(f"max_ms = {r.max_ms:.4f}")
        payload["results"].append(dataclasses.asdict(r))
    if len(results) == 2 and results[1].mpt_ms > 0:
        print(f"speedup = {results[1].mpt_ms / results[0].mpt_ms:.2f}")
    if args.json:
        _write_json(args.json, payload)
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    rc = _run_config(args)
    try:
        half_windows = [int(s) for s in args.half_windows.split(",") if s.strip()]
    except ValueError:
        raise InputError(f"--half-window expects integers, got {args.half_windows!r}") from None
    if not half_windows:
        raise InputError("--half-window list is empty")

    frames = read_frames(args.frames)
    w, h = frames[0].width, frames[0].height
    dets = _load_with_context(args.detections, parse_detections, w, h, len(frames))
    gts = _load_with_context(args.ground_truth, parse_groundtruth, len(frames))

    payload = []
    for n in half_windows:
        if n < 1:
            raise InputError(f"half window must be >= 1, got {n}")
        cfg = derive_sweep_config(rc.iscu, n)
        results = process_sequence(frames, dets, cfg)
        report = evaluate_sequences([(results, gts)], iou_cut=args.iou_cut)
        print(f"[half_window = {n}]")
        _print_report(report)
        payload.append({"half_window": n, **report.to_dict()})
    if args.json:
        _write_json(args.json, {"sweep": payload})
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="polypstream", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filter", parents=[], help="correlate detections across frames")
    p.add_argument("--frames", help="directory of PGM/PPM frames")
    p.add_argument("--detections", help="detection records file")
    p.add_argument("--output", help="filtered detection records (with origin column)")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_filter)

    p = sub.add_parser("eval", help="score detections against ground truth")
    p.add_argument("--detections", nargs="+", required=True)
    p.add_argument("--ground-truth", nargs="+", required=True)
    p.add_argument("--num-frames", nargs="+", type=int, default=None)
    p.add_argument("--frame-size", help="WxH used to clip records (inferred when absent)")
    p.add_argument("--iou-cut", type=float, default=0.5)
    p.add_argument("--json", help="also write the report as JSON ('-' for stdout)")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ssim", help="similarity score of two frames")
    p.add_argument("images", nargs=2)
    _add_config_flags(p)
    p.set_defaults(func=_cmd_ssim)

    p = sub.add_parser("synth", help="generate a synthetic scenario")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-frames", type=int, default=300)
    p.add_argument("--preset", choices=("standard", "clean"), default="standard")
    p.add_argument("--frame-size")
    p.add_argument("--fp-rate", type=float, default=None)
    p.add_argument("--fp-lifetime", type=int, default=None)
    p.add_argument("--dropout-rate", type=float, default=None)
    p.add_argument("--scene-breaks", help="comma-separated frame indices")
    p.add_argument("--image-format", choices=("pgm", "ppm"), default="pgm")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("bench", help="per-frame timing of the correlation unit")
    p.add_argument("--frames", help="directory of frames (else synthetic)")
    p.add_argument("--detections")
    p.add_argument("--synthetic-frames", type=int, default=1000)
    p.add_argument("--frame-size", default="1280x1080")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--compare-backends", action="store_true")
    p.add_argument("--json")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("sweep", help="evaluate across half-window sizes")
    p.add_argument(
        "--half-window", dest="half_windows", required=True, help="comma-separated sizes"
    )
    p.add_argument("--frames", required=True)
    p.add_argument("--detections", required=True)
    p.add_argument("--ground-truth", required=True)
    p.add_argument("--iou-cut", type=float, default=0.5)
    p.add_argument("--json")
    _add_config_flags(p, exclude=("half_window",))
    p.set_defaults(func=_cmd_sweep)

    return parser


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # internal invariant violation
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
