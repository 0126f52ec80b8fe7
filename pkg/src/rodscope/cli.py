"""Command-line interface: preprocess, segment, evaluate and analyze.

Exit codes: 0 success (or a valid prediction), 1 invalid prediction or at
least one failed frame, 2 usage or configuration error.

Settings resolve in the order built-in default < ``--config`` JSON file <
manifest ``config`` block < command-line flag.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields

import numpy as np

from . import __version__
from ._validation import ConfigurationError
from .analyzer import AnalysisConfig, CellAnalyzer
from .components import label_components
from .database import DatabaseTable, write_csv
from .evaluation import EvalConfig, GroundTruthPair, validity, write_reports
from .imaging import (
    GrayImage,
    ImageReadError,
    compose_fluor_input,
    load_image,
    pad_to_multiple,
    render_diff,
    render_labels,
    save_image,
    save_mask,
    to_8bit,
)
from .pipeline import ChannelSpec, FrameSpec, ManifestError, RunManifest, analyze_frame
from .thresholding import METHODS, DegenerateHistogramError, ThresholdSegmenter

logger = logging.getLogger("rodscope")

EXIT_OK, EXIT_INVALID, EXIT_USAGE = 0, 1, 2

ANALYSIS_KEYS = [f.name for f in fields(AnalysisConfig)]
DEFAULTS = {"jobs": 1, "seed": 42, "pad_multiple": 32}


class UsageError(Exception):
    pass


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="JSON file with default settings")
    p.add_argument("--pixel-size-um", type=float, help="micrometers per pixel (default 1.0)")
    p.add_argument("--jobs", type=int, help="worker processes (default 1)")
    p.add_argument("--seed", type=int, help="render palette seed (default 42)")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_inputs(p: argparse.ArgumentParser, masks: bool = False) -> None:
    p.add_argument("--manifest", help="JSON run manifest")
    p.add_argument("--cell-image", help="single-frame shorthand: cell image")
    if masks:
        p.add_argument("--cell-mask", help="single-frame shorthand: cell mask")
        p.add_argument(
            "--channel",
            action="append",
            default=[],
            metavar="NAME=IMAGE[,CLUSTER_MASK]",
            help="single-frame shorthand: fluorescence channel (repeatable)",
        )


def _add_filters(p: argparse.ArgumentParser) -> None:
    p.add_argument("--min-area-px", type=int)
    p.add_argument("--min-length-um", type=float)
    p.add_argument("--min-width-um", type=float)
    p.add_argument("--min-gap-px", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rodscope", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="8-bit conversion, padding and RGB composites")
    _add_common(p)
    _add_inputs(p, masks=True)
    p.add_argument("--pad-multiple", type=int, help="pad dimensions to a multiple of this (default 32)")

    p = sub.add_parser("segment", help="threshold baseline segmentation")
    _add_common(p)
    _add_inputs(p)
    p.add_argument("--method", choices=METHODS, default="minimum_error")
    p.add_argument("--invert", action="store_true", help="foreground is dark (v <= level)")
    p.add_argument("--post", action="store_true", help="apply the cell filters to the mask")
    _add_filters(p)

    p = sub.add_parser("evaluate", help="score a prediction against two ground truths")
    _add_common(p)
    p.add_argument("--pred", required=True)
    p.add_argument("--gt1", required=True)
    p.add_argument("--gt2", required=True)
    p.add_argument("--mode", choices=("cell", "fluor"), default="cell")
    p.add_argument("--iou-threshold", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--render", action="store_true", help="write label and diff images")
    p.add_argument("--frame-id", type=int, default=0, help="id used in render file names")

    p = sub.add_parser("analyze", help="filter, measure and write the cell database")
    _add_common(p)
    _add_inputs(p, masks=True)
    _add_filters(p)
    p.add_argument("--polar-low", type=float)
    p.add_argument("--polar-high", type=float)
    p.add_argument("--profile-points", type=int)
    p.add_argument("--no-render", action="store_true")
    return parser


class Settings:
    """Layered lookup: flag > manifest config > config file > default."""

    def __init__(self, args, manifest_config=None):
        self.args = args
        self.file = {}
        if getattr(args, "config", None):
            try:
                with open(args.config, encoding="utf-8") as f:
                    self.file = json.load(f)
            except (OSError, json.JSONDecodeError) as exc:
                raise UsageError(f"cannot read config {args.config}: {exc}") from exc
            if not isinstance(self.file, dict):
                raise UsageError(f"config {args.config} must hold a JSON object")
        self.manifest = dict(manifest_config or {})

    def get(self, key, default=None):
        value = getattr(self.args, key, None)
        if value is not None and value is not False:
            return value
        for layer in (self.manifest, self.file):
            if key in layer:
                return layer[key]
        return DEFAULTS.get(key, default)

    def analysis_config(self) -> AnalysisConfig:
        params = {k: self.get(k) for k in ANALYSIS_KEYS if self.get(k) is not None}
        return AnalysisConfig(**params)


def _parse_channel(text: str) -> ChannelSpec:
    if "=" not in text:
        raise UsageError(f"--channel expects NAME=IMAGE[,CLUSTER_MASK], got {text!r}")
    name, rest = text.split("=", 1)
    parts = rest.split(",")
    if len(parts) > 2 or not name or not parts[0]:
        raise UsageError(f"--channel expects NAME=IMAGE[,CLUSTER_MASK], got {text!r}")
    return ChannelSpec(name, parts[0], parts[1] if len(parts) == 2 else None)


def _load_manifest(args) -> RunManifest:
    if args.manifest:
        if any(getattr(args, k, None) for k in ("cell_image", "cell_mask", "channel")):
            raise UsageError("use either --manifest or the single-frame flags, not both")
        try:
            manifest = RunManifest.load(args.manifest)
        except FileNotFoundError as exc:
            raise UsageError(f"manifest not found: {args.manifest}") from exc
        except ManifestError as exc:
            raise UsageError(str(exc)) from exc
    else:
        channels = tuple(_parse_channel(c) for c in getattr(args, "channel", []) or [])
        cell_image, cell_mask = getattr(args, "cell_image", None), getattr(args, "cell_mask", None)
        if not (cell_image or cell_mask or channels):
            raise UsageError("no input: pass --manifest or --cell-image/--cell-mask")
        manifest = RunManifest([FrameSpec(0, cell_image, cell_mask, channels)])
    missing = manifest.missing_paths()
    if missing:
        raise UsageError(f"missing input file: {missing[0]}")
    return manifest


def _as_8bit(img: GrayImage) -> GrayImage:
    return to_8bit(img) if img.bit_depth == 16 else img


def cmd_preprocess(args) -> int:
    manifest = _load_manifest(args)
    settings = Settings(args, manifest.config)
    m = int(settings.get("pad_multiple"))
    if not manifest.frames:
        logger.warning("manifest has no frames; nothing to do")
        return EXIT_OK
    out = os.path.join(args.out, "preprocessed")
    os.makedirs(out, exist_ok=True)
    for fr in manifest.frames:
        if fr.cell_image is None:
            raise UsageError(f"frame {fr.frame_id}: no cell image")
        cells = _as_8bit(load_image(fr.cell_image))
        padded = pad_to_multiple(cells, m)
        save_image(np.repeat(padded.pixels[..., None], 3, axis=-1), os.path.join(out, f"frame_{fr.frame_id}_cells.png"))
        for ch in fr.channels:
            fluor = _as_8bit(load_image(ch.image))
            rgb = pad_to_multiple(compose_fluor_input(cells, fluor), m)
            save_image(rgb, os.path.join(out, f"frame_{fr.frame_id}_{ch.name}.png"))
        logger.info("frame %d: %s -> %s", fr.frame_id, cells.shape, padded.shape)
    return EXIT_OK


def cmd_segment(args) -> int:
    manifest = _load_manifest(args)
    settings = Settings(args, manifest.config)
    if not manifest.frames:
        logger.warning("manifest has no frames; nothing to do")
        return EXIT_OK
    cfg = settings.analysis_config() if args.post else None
    out = os.path.join(args.out, "masks")
    os.makedirs(out, exist_ok=True)
    seg = ThresholdSegmenter(method=args.method, foreground="below" if args.invert else "above")
    for fr in manifest.frames:
        if fr.cell_image is None:
            raise UsageError(f"frame {fr.frame_id}: no cell image")
        img = _as_8bit(load_image(fr.cell_image))
        try:
            mask = seg.fit_transform(img)
            logger.info("frame %d: threshold %d", fr.frame_id, seg.threshold_)
        except DegenerateHistogramError as exc:
            logger.warning("frame %d: %s; writing a blank mask", fr.frame_id, exc)
            mask = np.zeros(img.shape, dtype=bool)
        if cfg is not None:
            mask = CellAnalyzer(
                cfg.min_area_px, cfg.min_length_um, cfg.min_width_um, cfg.min_gap_px, cfg.pixel_size_um
            ).fit_transform(mask)
        save_mask(mask, os.path.join(out, f"frame_{fr.frame_id}_cells.png"))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    settings = Settings(args)
    try:
        cfg = EvalConfig.for_mode(
            args.mode,
            iou_threshold=settings.get("iou_threshold"),
            beta=settings.get("beta"),
        )
    except ConfigurationError as exc:
        raise UsageError(str(exc)) from exc
    for p in (args.pred, args.gt1, args.gt2):
        if not os.path.exists(p):
            raise UsageError(f"missing input file: {p}")
    pred, g1, g2 = (load_image(p, kind="mask") for p in (args.pred, args.gt1, args.gt2))
    if not (pred.shape == g1.shape == g2.shape):
        raise UsageError(f"dimension mismatch: pred {pred.shape}, gt1 {g1.shape}, gt2 {g2.shape}")
    try:
        pair = GroundTruthPair(g1, g2, cfg.iou_threshold)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    pred_cs = label_components(pred)
    report = validity(pred_cs, pair, cfg)
    os.makedirs(args.out, exist_ok=True)
    write_reports([report], os.path.join(args.out, "report.csv"))
    if args.render:
        rdir = os.path.join(args.out, "renders")
        os.makedirs(rdir, exist_ok=True)
        seed = int(settings.get("seed"))
        save_image(render_labels(pred_cs, seed), os.path.join(rdir, f"frame_{args.frame_id}_labels.png"))
        save_image(render_diff(g1, g2), os.path.join(rdir, f"frame_{args.frame_id}_diff.png"))
        save_image(render_diff(pred, g1), os.path.join(rdir, f"frame_{args.frame_id}_diff_pred_gt1.png"))
        save_image(render_diff(pred, g2), os.path.join(rdir, f"frame_{args.frame_id}_diff_pred_gt2.png"))
    verdict = "valid" if report.valid else "invalid"
    print(f"avg l_ex {report.avg_l_ex:.4f}  d_ex {report.d_ex:.4f}  -> {verdict}")
    return EXIT_OK if report.valid else EXIT_INVALID


def _analyze_job(frame: FrameSpec, cfg: AnalysisConfig, render_dir: str | None, seed: int):
    """Worker entry point; returns (frame_id, records, error message)."""
    try:
        if frame.cell_mask is None:
            raise ValueError(f"frame {frame.frame_id}: no cell mask")
        cell_mask = load_image(frame.cell_mask, kind="mask")
        channels = []
        for ch in frame.channels:
            if ch.cluster_mask is None:
                raise ValueError(f"frame {frame.frame_id}, channel {ch.name!r}: missing cluster mask")
            channels.append((ch.name, load_image(ch.image), load_image(ch.cluster_mask, kind="mask")))
        result = analyze_frame(cell_mask, channels, cfg, frame.frame_id)
        if render_dir is not None:
            save_image(
                render_labels(result.cells, seed),
                os.path.join(render_dir, f"frame_{frame.frame_id}_labels.png"),
            )
        return frame.frame_id, result.records, None
    except (ValueError, OSError, ImageReadError) as exc:
        return frame.frame_id, [], str(exc)


def cmd_analyze(args) -> int:
    manifest = _load_manifest(args)
    settings = Settings(args, manifest.config)
    try:
        cfg = settings.analysis_config()
    except (ConfigurationError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    jobs = max(1, int(settings.get("jobs")))
    seed = int(settings.get("seed"))
    os.makedirs(args.out, exist_ok=True)
    render_dir = None
    if not args.no_render:
        render_dir = os.path.join(args.out, "renders")
        os.makedirs(render_dir, exist_ok=True)

    work = [(fr, cfg, render_dir, seed) for fr in manifest.frames]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_analyze_job, *zip(*work)))
    else:
        results = [_analyze_job(*w) for w in work]

    records, failed = [], 0
    for frame_id, recs, err in results:
        if err:
            failed += 1
            logger.error("frame %d failed: %s", frame_id, err)
        records.extend(recs)
    table = DatabaseTable.from_records(records, manifest.channel_names())
    write_csv(table, os.path.join(args.out, "database.csv"))
    logger.info("wrote %d rows from %d frames", len(table.rows), len(manifest.frames))
    return EXIT_INVALID if failed else EXIT_OK


COMMANDS = {
    "preprocess": cmd_preprocess,
    "segment": cmd_segment,
    "evaluate": cmd_evaluate,
    "analyze": cmd_analyze,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"rodscope {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigurationError, ImageReadError) as exc:
        print(f"rodscope {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
