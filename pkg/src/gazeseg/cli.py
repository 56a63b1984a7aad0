"""Command-line entry point.

Subcommands: synth, prompts, segment, evaluate, ablate, overlay,
compare-reports. Configuration precedence is CLI flag > config file >
built-in default; --dry-run prints the resolved configuration and exits.

Exit codes: 0 success, 2 argument error, 3 i/o error, 4 wire-protocol
error, 5 evaluation-fatal error.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict

import numpy as np

from . import pnm, report, synth
from .clustering import dbscan
from .dataset import load_manifest, split_dataset
from .errors import (ConfigError, GazeSegError, ManifestError,
                     SegmenterProtocolError, SegmenterTimeoutError)
from .evaluation import (PipelineConfig, PromptPipeline, ablation_temporal_window,
                         run_evaluation, write_prompt_files)
from .foveation import CameraModel, load_shape_priors
from .overlay import render_overlay
from .prompts import (MODE_POINTS, MODE_POINTS_MASK, DiskMockSegmenter,
                      FloodMockSegmenter, OracleMockSegmenter,
                      SubprocessSegmenter)

EXIT_OK = 0
EXIT_ARGS = 2
EXIT_IO = 3
EXIT_PROTOCOL = 4
EXIT_EVAL = 5


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None,
                        help="master seed for all randomness (default 0)")
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--manifest", help="JSONL dataset manifest")
    parser.add_argument("--segmenter", help="oracle | flood[:tol] | disk:DIR | cmd:COMMAND")
    parser.add_argument("--segmenter-cmd", help="adapter command line (same as cmd:...)")
    parser.add_argument("--mode", choices=[MODE_POINTS, MODE_POINTS_MASK])
    parser.add_argument("--split", help="random:RATIO | participants:ID,ID,...")
    parser.add_argument("--window", type=int, help="temporal window T")
    parser.add_argument("--epsilon", type=float, help="DBSCAN radius in px")
    parser.add_argument("--min-pts", type=int, help="DBSCAN min points")
    parser.add_argument("--point-cap", type=int, help="max prompt points")
    parser.add_argument("--bandwidth", type=float, help="KDE bandwidth in px")
    parser.add_argument("--camera", help="camera config file")
    parser.add_argument("--priors", help="object shape prior file")
    parser.add_argument("--timeout", type=float, help="segmenter timeout in s")
    parser.add_argument("--dry-run", action="store_true",
                        help="print the resolved configuration and exit")


_DEFAULTS = {
    "seed": 0, "workers": 1, "mode": MODE_POINTS, "window": 5,
    "epsilon": 1.4, "min_pts": None, "point_cap": 5, "bandwidth": None,
    "camera": None, "priors": None, "segmenter": "flood",
    "split": None, "timeout": 60.0, "manifest": None,
}


def _resolve_options(args) -> dict:
    """Merge CLI > config file > defaults."""
    resolved = dict(_DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config) as f:
                file_cfg = json.load(f)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        unknown = set(file_cfg) - set(_DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        resolved.update(file_cfg)
    for key in _DEFAULTS:
        arg = getattr(args, key, None)
        if arg is not None:
            resolved[key] = arg
    if getattr(args, "segmenter_cmd", None):
        resolved["segmenter"] = f"cmd:{args.segmenter_cmd}"
    return resolved


def _pipeline_config(opts: dict) -> PipelineConfig:
    camera = CameraModel.load(opts["camera"]) if opts["camera"] else None
    priors = load_shape_priors(opts["priors"]) if opts["priors"] else {}
    return PipelineConfig(
        window=opts["window"],
        epsilon=opts["epsilon"],
        min_points=opts["min_pts"],
        camera=camera,
        shape_priors=priors,
        mode=opts["mode"],
        point_cap=opts["point_cap"],
        bandwidth_px=opts["bandwidth"],
        seed=opts["seed"],
        workers=opts["workers"],
        segmenter_timeout_s=opts["timeout"],
    )


def _segmenter_factory(spec: str, timeout_s: float):
    if spec == "oracle":
        seg = OracleMockSegmenter()
        return lambda: seg
    if spec == "flood" or spec.startswith("flood:"):
        tol = int(spec.split(":", 1)[1]) if ":" in spec else 8
        seg = FloodMockSegmenter(color_tolerance=tol)
        return lambda: seg
    if spec.startswith("disk:"):
        seg = DiskMockSegmenter(spec.split(":", 1)[1])
        return lambda: seg
    if spec.startswith("cmd:"):
        command = spec.split(":", 1)[1]
        return lambda: SubprocessSegmenter(command, timeout_s=timeout_s).open()
    raise ConfigError(f"unknown segmenter {spec!r}")


def _parse_split(spec: str):
    kind, _, rest = spec.partition(":")
    if kind == "random":
        return {"mode": "random", "ratio": float(rest or 0.7)}
    if kind == "participants":
        ids = [p for p in rest.split(",") if p]
        if not ids:
            raise ConfigError("participants split needs ids, e.g. participants:1,2,3")
        return {"mode": "by_participant", "participants": ids}
    raise ConfigError(f"unknown split spec {spec!r}")


def _select_refs(entries, opts):
    from .dataset import all_frame_refs

    if not opts["split"]:
        return all_frame_refs(entries)
    split = _parse_split(opts["split"])
    if split["mode"] == "random":
        _, test = split_dataset(entries, "random", ratio=split["ratio"],
                                seed=opts["seed"])
    else:
        _, test = split_dataset(entries, "by_participant",
                                participants=split["participants"])
    return test


def _print_resolved(opts: dict) -> None:
    for key in sorted(opts):
        print(f"{key} = {opts[key]!r}")


# ---------------------------------------------------------------------------
# Subcommands

def cmd_synth(args) -> int:
    class_names = args.classes.split(",")
    participants = args.participants.split(",")
    configs = []
    for cls in class_names:
        for pid in participants:
            configs.append(synth.SynthConfig(
                frames=args.frames, warmup=args.warmup,
                width=args.width, height=args.height,
                class_name=cls, participant_id=pid,
                outlier_period=args.outlier_period,
                seed=args.seed if args.seed is not None else 0))
    manifest = synth.generate_dataset(args.out, configs)
    print(manifest)
    return EXIT_OK


def cmd_prompts(args) -> int:
    opts = _resolve_options(args)
    if args.dry_run:
        _print_resolved(opts)
        return EXIT_OK
    if not opts["manifest"]:
        raise ConfigError("prompts requires --manifest")
    config = _pipeline_config(opts)
    entries = load_manifest(opts["manifest"])
    for entry in entries:
        sub = os.path.join(
            args.out, f"{entry.class_name}_p{entry.participant_id}_{entry.scene_id}")
        indices = [fr.index for fr in entry.frames]
        write_prompt_files(entry, indices, config, sub)
        if args.dump_clusters:
            _dump_clusters(entry, config, sub)
    return EXIT_OK


def _dump_clusters(entry, config, outdir) -> None:
    pipeline = PromptPipeline(entry, config)
    path = os.path.join(outdir, "clusters.csv")
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["frame_index", "x", "y", "label"])
        for fr in entry.frames:
            result = pipeline.prompt_for(fr.index)
            if result.projected is None or len(result.projected.points) == 0:
                continue
            labels = dbscan(result.projected.points, config.cluster_config)
            for (x, y), label in zip(result.projected.points, labels):
                writer.writerow([fr.index, f"{x:.3f}", f"{y:.3f}", int(label)])


def cmd_segment(args) -> int:
    opts = _resolve_options(args)
    if args.dry_run:
        _print_resolved(opts)
        return EXIT_OK
    if not opts["manifest"]:
        raise ConfigError("segment requires --manifest")
    config = _pipeline_config(opts)
    entries = load_manifest(opts["manifest"])
    factory = _segmenter_factory(opts["segmenter"], opts["timeout"])
    os.makedirs(args.out, exist_ok=True)
    segmenter = factory()
    try:
        for entry in entries:
            pipeline = PromptPipeline(entry, config)
            for fr in entry.frames:
                result = pipeline.prompt_for(fr.index)
                if result.prompt is None:
                    continue
                fuzzy_path = None
                if result.fuzzy is not None:
                    fuzzy_path = os.path.join(args.out, f"{fr.frame_id}_fuzzy.pgm")
                    result.fuzzy.save(fuzzy_path)
                mask, _ = segmenter.segment(
                    fr.image, result.prompt.foreground_points,
                    fuzzy_mask_path=fuzzy_path, gt_mask_path=fr.gt_mask,
                    frame_id=fr.frame_id)
                mask.save(os.path.join(args.out, f"{fr.frame_id}_pred.pgm"))
    finally:
        close = getattr(segmenter, "close", None)
        if callable(close):
            close()
    return EXIT_OK


def cmd_evaluate(args) -> int:
    opts = _resolve_options(args)
    if args.dry_run:
        _print_resolved(opts)
        return EXIT_OK
    if not opts["manifest"]:
        raise ConfigError("evaluate requires --manifest")
    config = _pipeline_config(opts)
    entries = load_manifest(opts["manifest"])
    refs = _select_refs(entries, opts)
    factory = _segmenter_factory(opts["segmenter"], opts["timeout"])
    os.makedirs(args.report_dir, exist_ok=True)
    records = run_evaluation(refs, config, factory, workdir=args.report_dir)
    paths = report.write_report_bundle(records, args.report_dir,
                                       stem=args.stem,
                                       title=f"mode={config.mode} T={config.window}")
    reports = report.summarize(records)
    print(report.to_text(reports, title=f"mode={config.mode} T={config.window}"),
          end="")
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_ablate(args) -> int:
    opts = _resolve_options(args)
    if args.dry_run:
        _print_resolved(opts)
        return EXIT_OK
    if not opts["manifest"]:
        raise ConfigError("ablate requires --manifest")
    lo, _, hi = args.t_range.partition(":")
    t_values = list(range(int(lo), int(hi or lo) + 1))
    if not t_values or any(t < 1 for t in t_values):
        raise ConfigError(f"invalid temporal window range {args.t_range!r}")
    config = _pipeline_config(opts)
    entries = load_manifest(opts["manifest"])
    refs = _select_refs(entries, opts)
    factory = _segmenter_factory(opts["segmenter"], opts["timeout"])
    os.makedirs(args.report_dir, exist_ok=True)
    per_window = ablation_temporal_window(refs, t_values, config, factory,
                                          workdir=args.report_dir)
    summaries = {}
    for t, records in per_window.items():
        paths = report.write_report_bundle(records, args.report_dir,
                                           stem=f"report_T{t}",
                                           title=f"T={t}")
        summaries[t] = report.summarize(records)
        for p in paths:
            print(p)
    fig_path = os.path.join(args.report_dir, "ablation.png")
    report.render_ablation_figure(summaries, fig_path)
    print(fig_path)
    return EXIT_OK


def cmd_overlay(args) -> int:
    opts = _resolve_options(args)
    if args.dry_run:
        _print_resolved(opts)
        return EXIT_OK
    if not opts["manifest"]:
        raise ConfigError("overlay requires --manifest")
    config = _pipeline_config(opts)
    entries = load_manifest(opts["manifest"])
    os.makedirs(args.out, exist_ok=True)
    for entry in entries:
        pipeline = PromptPipeline(entry, config)
        for fr in entry.frames:
            if args.frame_index is not None and fr.index != args.frame_index:
                continue
            frame = pnm.read_ppm(fr.image)
            result = pipeline.prompt_for(fr.index)
            points = (result.projected.points
                      if result.projected is not None else None)
            current = pipeline.frame_gazes.get(fr.index)
            recent = ((current.x, current.y)
                      if current is not None and current.valid else None)
            mask_bits = None
            if args.with_mask and fr.gt_mask:
                mask_bits = pnm.read_binary_mask(fr.gt_mask)
            cluster_pts = (result.cluster.member_points
                           if result.cluster is not None else None)
            img, skipped = render_overlay(
                frame, points=points, recent_point=recent,
                cluster_points=cluster_pts, mask_bits=mask_bits,
                bbox=result.bbox)
            if skipped:
                print(f"warning: {skipped} point(s) outside frame "
                      f"{fr.frame_id}", file=sys.stderr)
            pnm.write_ppm(os.path.join(args.out, f"{fr.frame_id}_overlay.ppm"), img)
    return EXIT_OK


def cmd_compare_reports(args) -> int:
    reports_a = report.parse_report_csv(args.report_a)
    reports_b = report.parse_report_csv(args.report_b)
    text = report.compare_csv(reports_a, reports_b)
    if args.out:
        with open(args.out, "w", newline="") as f:
            f.write(text)
        print(args.out)
    else:
        print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gazeseg",
        description="Gaze-driven segmentation prompts and evaluation harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic scene fixture")
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=104)
    p.add_argument("--warmup", type=int, default=4)
    p.add_argument("--width", type=int, default=320)
    p.add_argument("--height", type=int, default=240)
    p.add_argument("--classes", default="SynthBox")
    p.add_argument("--participants", default="1")
    p.add_argument("--outlier-period", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("prompts", help="write per-frame prompt files")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-clusters", action="store_true",
                   help="also dump a point,label CSV per entry")
    p.set_defaults(func=cmd_prompts)

    p = sub.add_parser("segment", help="run the segmenter, saving predicted masks")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("evaluate", help="evaluate and write reports")
    _add_common(p)
    p.add_argument("--report-dir", required=True)
    p.add_argument("--stem", default="report")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="temporal window sweep")
    _add_common(p)
    p.add_argument("--report-dir", required=True)
    p.add_argument("--t-range", default="1:5", help="inclusive range, e.g. 1:5")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("overlay", help="render diagnostic overlays")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--frame-index", type=int)
    p.add_argument("--with-mask", action="store_true",
                   help="draw the ground-truth mask contour")
    p.set_defaults(func=cmd_overlay)

    p = sub.add_parser("compare-reports", help="paired report comparison")
    p.add_argument("report_a")
    p.add_argument("report_b")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare_reports)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SegmenterProtocolError, SegmenterTimeoutError) as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except (ConfigError, ManifestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except GazeSegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EVAL


if __name__ == "__main__":
    sys.exit(main())
