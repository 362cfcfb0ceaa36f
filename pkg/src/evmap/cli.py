"""Command-line pipeline: synth, build, eval, export.

Exit codes: 0 on success, 1 on runtime or data errors, 2 on usage errors
(argparse's default).  Scan order always comes from the sequence manifest,
never from directory listings, and `--threads` never changes the output.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from evmap.evidence import select_uncertainty
from evmap.mapio import (
    LoadedMap,
    export_map,
    import_map,
    load_config,
    load_ground_truth,
    map_rows,
    write_map_csv,
    write_ply,
)
from evmap.metrics import compare_report
from evmap.sbki import SbkiMap
from evmap.scan import load_manifest, load_scan, transform_to_world
from evmap.synth import SynthParams, write_synthetic_sequence
from evmap.voxmap import IntegrationStats, VoxelMap

MEASURES = ("vacuity", "variance", "entropy")


def _class_count(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 2:
        raise argparse.ArgumentTypeError("need at least 2 classes")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evmap",
        description="Evidential sparse-voxel semantic mapping pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic scan sequence")
    p_synth.add_argument("--out", required=True, type=Path, help="output directory")
    p_synth.add_argument("--seed", type=int, default=0, help="generator seed")
    p_synth.add_argument("--num-scans", type=_positive_int, default=5)
    p_synth.add_argument("--points", type=_positive_int, default=1000, help="points per scan")
    p_synth.add_argument("--classes", type=_class_count, default=3)
    p_synth.add_argument("--noise", type=float, default=0.4, help="boundary ambiguity in [0, 1]")
    p_synth.add_argument("--extent", type=float, default=6.3, help="scene side length (m)")
    p_synth.add_argument("--strength", type=float, default=10.0, help="clean evidence total")
    p_synth.add_argument("--voxel", type=float, default=0.5, help="voxel size for ground truth (m)")
    p_synth.set_defaults(func=cmd_synth)

    p_build = sub.add_parser("build", help="integrate a scan sequence into a map")
    p_build.add_argument("--config", required=True, type=Path)
    p_build.add_argument("--scans", required=True, type=Path, help="sequence directory")
    p_build.add_argument("--method", required=True, choices=("evidential", "sbki"))
    p_build.add_argument("--out", required=True, type=Path, help="map CSV path")
    p_build.add_argument(
        "--threads",
        type=_positive_int,
        default=os.cpu_count() or 1,
        help="worker threads; output is identical for any value",
    )
    p_build.set_defaults(func=cmd_build)

    p_eval = sub.add_parser("eval", help="score maps against ground truth")
    p_eval.add_argument("--map", required=True, type=Path, dest="map_path")
    p_eval.add_argument("--baseline", type=Path, default=None)
    p_eval.add_argument("--gt", required=True, type=Path)
    p_eval.add_argument("--config", required=True, type=Path)
    p_eval.add_argument("--out", required=True, type=Path, help="report JSON path")
    p_eval.set_defaults(func=cmd_eval)

    p_export = sub.add_parser("export", help="re-export a map CSV as CSV or PLY")
    p_export.add_argument("--map", required=True, type=Path, dest="map_path")
    p_export.add_argument("--format", required=True, choices=("csv", "ply"))
    p_export.add_argument("--measure", choices=MEASURES, default="vacuity")
    p_export.add_argument("--out", required=True, type=Path)
    p_export.set_defaults(func=cmd_export)

    return parser


def cmd_synth(args) -> int:
    params = SynthParams(
        extent=args.extent,
        num_classes=args.classes,
        num_scans=args.num_scans,
        points_per_scan=args.points,
        boundary_noise=args.noise,
        evidence_strength=args.strength,
        voxel_size=args.voxel,
    )
    out = write_synthetic_sequence(args.out, args.seed, params)
    print(f"wrote {params.num_scans} scans + ground truth + manifest to {out}")
    return 0


def _stats_sidecar(map_path: Path) -> Path:
    return Path(str(map_path) + ".stats.json")


def cmd_build(args) -> int:
    config = load_config(args.config)
    manifest = load_manifest(args.scans)
    if manifest.num_classes != config.map.num_classes:
        raise ValueError(
            f"manifest has {manifest.num_classes} classes, config has {config.map.num_classes}"
        )
    if args.method == "evidential":
        built = VoxelMap(config.map)
    else:
        built = SbkiMap(config.map, config.sbki_prior)

    total = IntegrationStats()
    t0 = time.perf_counter()
    for path in manifest.scan_paths():
        frame = transform_to_world(load_scan(path))
        total = total + built.integrate_scan(frame, threads=args.threads)
    runtime = time.perf_counter() - t0

    export_map(built, args.out, "csv")
    sidecar = {
        "method": args.method,
        "scans": len(manifest.scan_files),
        "runtime_seconds": runtime,
        "points_kept": total.points_kept,
        "points_dropped_range": total.points_dropped_range,
        "points_skipped_invalid": total.points_skipped_invalid,
        "cells_created": total.cells_created,
        "cells_updated": total.cells_updated,
    }
    _stats_sidecar(args.out).write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"integrated {len(manifest.scan_files)} scans: {total.summary()}")
    print(f"wrote {args.out} ({len(built)} cells) in {runtime:.2f}s")
    return 0


def _maybe_runtime(map_path: Path) -> float | None:
    sidecar = _stats_sidecar(map_path)
    if not sidecar.is_file():
        return None
    try:
        payload = json.loads(sidecar.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, OSError):
        return None
    value = payload.get("runtime_seconds")
    return float(value) if isinstance(value, (int, float)) else None


def cmd_eval(args) -> int:
    config = load_config(args.config)
    gt = load_ground_truth(args.gt)
    primary = import_map(args.map_path)
    baseline = import_map(args.baseline) if args.baseline else None

    runtimes = {}
    primary_name = "map" if baseline is None else "evidential"
    rt = _maybe_runtime(args.map_path)
    if rt is not None:
        runtimes[primary_name] = rt
    if args.baseline:
        rt = _maybe_runtime(args.baseline)
        if rt is not None:
            runtimes["baseline"] = rt

    report = compare_report(primary, baseline, gt, config, args.out, runtimes=runtimes)
    for name, block in report["methods"].items():
        m = block["metrics"]
        rho = m["spearman_uncertainty_error"]
        rho_text = "n/a" if rho is None else f"{rho:.4f}"
        print(
            f"{name}: accuracy={m['accuracy']:.4f} miou={m['miou']:.4f} "
            f"ece={m['ece']:.4f} ause={m['ause']:.4f} coverage={m['coverage']:.4f} "
            f"spearman={rho_text}"
        )
    print(f"wrote {args.out}")
    return 0


def cmd_export(args) -> int:
    loaded = import_map(args.map_path)
    rows = []
    for _, row in sorted(loaded.cells.items()):
        row.uncertainty = select_uncertainty(row.mass, loaded.num_classes, args.measure)
        rows.append(row)
    if not rows:
        raise ValueError("refusing to export an empty map")
    if args.format == "csv":
        write_map_csv(args.out, rows, loaded.num_classes)
    else:
        write_ply(args.out, rows, loaded.num_classes)
    print(f"wrote {args.out} ({len(rows)} cells, measure={args.measure})")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"evmap: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
