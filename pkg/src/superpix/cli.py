"""Command-line front end: single-image segmentation and dataset benchmarks."""

from __future__ import annotations

import argparse
import csv
import json
import statistics
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .gmm import EmConfig, run_em, set_thread_count
from .grid import GridGeometry, geometry_from_intervals, intervals_from_count
from .imaging import (ImageError, load_image, load_label_map, save_label_map,
                      save_label_overlay, to_feature_image)
from .labeling import LabelMap, assign_labels, enforce_connectivity
from .metrics import MetricsReport, evaluate

EXIT_USAGE = 1
EXIT_IO = 2
EXIT_INTERNAL = 3

IMAGE_SUFFIXES = (".ppm", ".pgm", ".png")


@dataclass
class RunConfig:
    superpixels: int | None = None
    interval: tuple[int, int] | None = None
    em: EmConfig = field(default_factory=EmConfig)
    threads: int = 1
    repeat: int = 1
    total_time: bool = False
    boundary_tol: int = 2

    def __post_init__(self):
        if (self.superpixels is None) == (self.interval is None):
            raise ValueError("exactly one of superpixels/interval required")
        if self.threads < 1 or self.repeat < 1:
            raise ValueError("threads and repeat must be >= 1")

    def geometry(self, width: int, height: int) -> GridGeometry:
        if self.superpixels is not None:
            return intervals_from_count(width, height, self.superpixels)
        vx, vy = self.interval
        return geometry_from_intervals(width, height, vx, vy)

    def echo(self) -> dict:
        return {
            "superpixels": self.superpixels,
            "interval": self.interval,
            "iterations": self.em.iterations,
            "lambda": self.em.lam,
            "eps_spatial": self.em.eps_spatial,
            "eps_color": self.em.eps_color,
            "threads": self.threads,
            "repeat": self.repeat,
            "total_time": self.total_time,
            "version": __version__,
        }


def segment_image(img, cfg: RunConfig) -> tuple[LabelMap, GridGeometry, float]:
    """Full pipeline on a decoded raster; returns the connected label map,
    the grid, and the algorithm wall time in milliseconds (median over
    cfg.repeat runs, decode/encode excluded)."""
    set_thread_count(cfg.threads)
    times = []
    label_map = None
    geom = None
    for _ in range(cfg.repeat):
        t0 = time.perf_counter()
        features = to_feature_image(img)
        geom = cfg.geometry(img.width, img.height)
        result = run_em(features, geom, cfg.em)
        raw = assign_labels(features, geom, result.params)
        label_map = enforce_connectivity(raw, features, geom)
        times.append((time.perf_counter() - t0) * 1000.0)
    return label_map, geom, statistics.median(times)


def run_single(input_path, cfg: RunConfig, labels_out=None, overlay_out=None,
               gt_paths=(), report_out=None) -> MetricsReport:
    """Segment one image, write requested outputs, score against ground
    truth when provided."""
    t_total = time.perf_counter()
    img = load_image(input_path)
    label_map, geom, runtime_ms = segment_image(img, cfg)
    if labels_out:
        save_label_map(label_map.labels, labels_out)
    if overlay_out:
        save_label_overlay(img, label_map.labels, overlay_out)
    if cfg.total_time:
        runtime_ms = (time.perf_counter() - t_total) * 1000.0
    if gt_paths:
        gts = [load_label_map(p) for p in gt_paths]
        report = evaluate(label_map, gts, tol=cfg.boundary_tol,
                          runtime_ms=runtime_ms)
    else:
        report = MetricsReport(superpixel_count=label_map.num_labels,
                               runtime_ms=runtime_ms)
    if report_out:
        with open(report_out, "w") as f:
            f.write(json.dumps({"config": cfg.echo(),
                                "input": str(input_path)}) + "\n")
            f.write(json.dumps(record_for(input_path, report)) + "\n")
    return report


def record_for(path, report: MetricsReport, annotation=None) -> dict:
    rec = {"image": str(path), **report.to_dict()}
    if annotation is not None:
        rec["annotation"] = annotation
    return rec


def _gt_files(gt_dir: Path, stem: str) -> list[Path]:
    return sorted(p for p in gt_dir.glob(f"{stem}*.pgm"))


def _linear_fit(ns, ts):
    """Least-squares runtime = a*N + b with its R^2."""
    ns = np.asarray(ns, dtype=np.float64)
    ts = np.asarray(ts, dtype=np.float64)
    a, b = np.polyfit(ns, ts, 1)
    pred = a * ns + b
    ss_res = float(np.sum((ts - pred) ** 2))
    ss_tot = float(np.sum((ts - ts.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(a), float(b), r2


def run_benchmark(input_dir, cfg: RunConfig, gt_dir=None, report_out=None,
                  csv_out=None, thread_sweep=()) -> list[dict]:
    """Segment every image in a directory, scoring and aggregating.

    Unreadable files are skipped with a warning; the records returned (and
    written as JSONL) carry per-image metrics, per-K aggregates, a runtime
    vs pixel-count fit, and an optional thread sweep on the first image.
    """
    input_dir = Path(input_dir)
    gt_dir = Path(gt_dir) if gt_dir else None
    images = sorted(p for p in input_dir.iterdir()
                    if p.suffix.lower() in IMAGE_SUFFIXES)
    if not images:
        raise ImageError(f"no images found in {input_dir}")
    records = []
    failures = 0
    first_ok = None
    for path in images:
        try:
            img = load_image(path)
            label_map, geom, runtime_ms = segment_image(img, cfg)
        except ImageError as exc:
            print(f"warning: skipping {path}: {exc}", file=sys.stderr)
            failures += 1
            continue
        first_ok = first_ok or path
        gts = _gt_files(gt_dir, path.stem) if gt_dir else []
        if gts:
            report = evaluate(label_map, [load_label_map(p) for p in gts],
                              tol=cfg.boundary_tol, runtime_ms=runtime_ms)
        else:
            report = MetricsReport(superpixel_count=label_map.num_labels,
                                   runtime_ms=runtime_ms)
        rec = record_for(path, report)
        rec["num_pixels"] = img.width * img.height
        rec["grid_superpixels"] = geom.num_superpixels
        records.append(rec)
    if not records:
        raise ImageError("all input images failed to decode")

    summary = {"record": "summary", "aggregates": _aggregate(records)}
    sizes = sorted({r["num_pixels"] for r in records})
    if len(sizes) >= 2:
        by_n = {n: statistics.mean(r["runtime_ms"] for r in records
                                   if r["num_pixels"] == n) for n in sizes}
        a, b, r2 = _linear_fit(list(by_n), list(by_n.values()))
        summary["runtime_vs_pixels"] = {
            "points": by_n, "slope_ms_per_pixel": a, "intercept_ms": b,
            "r_squared": r2}
    if thread_sweep and first_ok is not None:
        img = load_image(first_ok)
        sweep = []
        for t in thread_sweep:
            sweep_cfg = RunConfig(
                superpixels=cfg.superpixels, interval=cfg.interval,
                em=cfg.em, threads=t, repeat=cfg.repeat)
            label_map, _, runtime_ms = segment_image(img, sweep_cfg)
            sweep.append({"threads": t, "runtime_ms": runtime_ms,
                          "label_checksum": int(np.bitwise_xor.reduce(
                              label_map.labels.ravel().astype(np.int64)))})
        summary["thread_sweep"] = {"image": str(first_ok), "runs": sweep}

    if report_out:
        with open(report_out, "w") as f:
            f.write(json.dumps({"config": cfg.echo(),
                                "input": str(input_dir)}) + "\n")
            for rec in records:
                f.write(json.dumps(rec) + "\n")
            f.write(json.dumps(summary) + "\n")
    if csv_out:
        with open(csv_out, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["superpixel_count", "n_images", "boundary_recall",
                             "undersegmentation_error", "achievable_accuracy",
                             "runtime_ms"])
            for row in summary["aggregates"]:
                writer.writerow([row["superpixel_count"], row["n_images"],
                                 row["boundary_recall"],
                                 row["undersegmentation_error"],
                                 row["achievable_accuracy"],
                                 row["runtime_ms"]])
    records.append(summary)
    return records


def _aggregate(records: list[dict]) -> list[dict]:
    """Mean metrics grouped by produced superpixel count."""
    def mean_of(vals):
        vals = [v for v in vals if v is not None]
        return statistics.mean(vals) if vals else None

    groups = {}
    for rec in records:
        groups.setdefault(rec["superpixel_count"], []).append(rec)
    out = []
    for k in sorted(groups):
        grp = groups[k]
        out.append({
            "superpixel_count": k,
            "n_images": len(grp),
            "boundary_recall": mean_of(r["boundary_recall"] for r in grp),
            "undersegmentation_error": mean_of(
                r["undersegmentation_error"] for r in grp),
            "achievable_accuracy": mean_of(
                r["achievable_accuracy"] for r in grp),
            "runtime_ms": mean_of(r["runtime_ms"] for r in grp),
        })
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _parse_interval(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) == 1:
        v = int(parts[0])
        return v, v
    if len(parts) == 2:
        return int(parts[0]), int(parts[1])
    raise ValueError(f"bad interval {text!r}; expected V or VXxVY")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--superpixels", type=int,
                   help="desired superpixel count (grid-rounded)")
    p.add_argument("--interval", type=_parse_interval,
                   help="seed interval, e.g. 16 or 16x12")
    p.add_argument("--iters", type=int, default=10,
                   help="EM iterations (default 10)")
    p.add_argument("--lambda", dest="lam", type=float, default=8.0,
                   help="initial color std (default 8)")
    p.add_argument("--eps-s", type=float, default=2.0,
                   help="spatial eigenvalue floor (default 2)")
    p.add_argument("--eps-c", type=float, default=8.0,
                   help="color eigenvalue floor (default 8)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--repeat", type=int, default=1,
                   help="timing repetitions, median reported")
    p.add_argument("--total-time", action="store_true",
                   help="include file I/O in reported runtime")
    p.add_argument("--report", help="JSONL report path")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="superpix",
                     description="GMM superpixel segmentation and benchmarks")
    parser.add_argument("--version", action="version",
                        version=f"superpix {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    seg = sub.add_parser("segment", help="segment one image")
    seg.add_argument("input")
    _add_common(seg)
    seg.add_argument("--labels-out", help="16-bit PGM label map path")
    seg.add_argument("--overlay-out", help="boundary overlay image path")
    seg.add_argument("--gt", nargs="*", default=[],
                     help="ground-truth label maps (16-bit PGM)")

    bench = sub.add_parser("bench", help="benchmark a directory of images")
    bench.add_argument("input")
    _add_common(bench)
    bench.add_argument("--gt", help="ground-truth directory")
    bench.add_argument("--csv", help="aggregate CSV path")
    bench.add_argument("--thread-sweep",
                       help="comma-separated thread counts to sweep")
    return parser


def _config_from(args) -> RunConfig:
    return RunConfig(
        superpixels=args.superpixels,
        interval=args.interval,
        em=EmConfig(iterations=args.iters, lam=args.lam,
                    eps_spatial=args.eps_s, eps_color=args.eps_c),
        threads=args.threads,
        repeat=args.repeat,
        total_time=args.total_time,
    )


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    try:
        cfg = _config_from(args)
    except ValueError as exc:
        print(f"superpix: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "segment":
            report = run_single(args.input, cfg, labels_out=args.labels_out,
                                overlay_out=args.overlay_out,
                                gt_paths=args.gt, report_out=args.report)
            print(json.dumps(record_for(args.input, report)))
        else:
            sweep = ([int(t) for t in args.thread_sweep.split(",")]
                     if args.thread_sweep else [])
            run_benchmark(args.input, cfg, gt_dir=args.gt,
                          report_out=args.report, csv_out=args.csv,
                          thread_sweep=sweep)
    except (ImageError, OSError) as exc:
        print(f"superpix: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # internal faults
        print(f"superpix: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
