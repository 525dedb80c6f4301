"""Command-line front end.

Subcommands cover the offline workflow end to end: phantom generation,
volume ingestion (segmentation), centerline extraction, protocol
simulation with a metrics report, log replay, and the live session server.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import phantom as ph
from . import pipeline
from .centerline import distance_transform, extract_centerline, save_centerline_csv
from .errors import IvcError
from .protocol import GAZE_MODES, PROTOCOLS, run_protocol
from .server import serve
from .session import SessionEngine, replay
from .surface import extract_isosurface, save_obj
from .volume import (
    DEFAULT_AIR_THRESHOLD_HU,
    load_mask,
    load_volume,
    segment_lumen,
    write_mask,
    write_volume,
)


def _xyz(text: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z got {text!r}")
    return np.array([float(p) for p in parts])


def _cmd_phantom(args) -> int:
    polyps = ()
    if args.polyps:
        spec_list = json.loads(Path(args.polyps).read_text(encoding="utf-8"))
        polyps = tuple(
            ph.PolypSpec(
                s_mm=float(p["s_mm"]),
                azimuth_deg=float(p.get("azimuth_deg", 0.0)),
                radius_mm=float(p["radius_mm"]),
            )
            for p in spec_list
        )
    spec = ph.PhantomSpec(
        preset=args.preset,
        length_mm=args.length,
        radius_mm=args.radius,
        spacing_mm=args.spacing,
        polyps=polyps,
    )
    result = ph.generate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_volume(result.volume, out / "volume.json", "volume.raw")
    ph.write_ground_truth(result, out / "ground_truth.json")
    print(f"phantom '{args.preset}' written to {out}/ "
          f"(dims {result.volume.dims}, {len(result.polyps)} polyps)")
    return 0


def _cmd_ingest(args) -> int:
    volume = load_volume(args.header)
    mask = segment_lumen(volume, args.seed, args.threshold)
    out = Path(args.out)
    write_mask(mask, out)
    print(f"lumen mask written to {out} ({mask.count()} voxels)")
    if args.mesh:
        mesh = extract_isosurface(mask, volume)
        save_obj(mesh, args.mesh)
        print(f"mesh written to {args.mesh} ({mesh.triangle_count} triangles)")
    return 0


def _cmd_centerline(args) -> int:
    mask = load_mask(args.mask)
    df = distance_transform(mask)
    line = extract_centerline(mask, df, args.start, args.end)
    save_centerline_csv(line, args.out)
    print(
        f"centerline written to {args.out} "
        f"({len(line)} samples, {line.total_length:.1f} mm)"
    )
    return 0


def _cmd_simulate(args) -> int:
    artifacts = pipeline.build_from_phantom_dir(args.dir)
    polyps = artifacts.ground_truth.get("polyps", []) if artifacts.ground_truth else []
    report, engine = run_protocol(
        artifacts.volume,
        artifacts.mesh,
        artifacts.ray_index,
        artifacts.centerline,
        protocol=args.protocol,
        level=args.level,
        gaze_mode=args.gaze,
        polyps=polyps,
    )
    if args.report:
        report.write_json(args.report)
        print(f"report written to {args.report}")
    if args.log:
        engine.write_log(args.log)
        print(f"event log written to {args.log}")
    print(
        f"{report.runs}: time {report.time_consumed_s:.2f} s, "
        f"coverage {report.coverage_fraction:.3f}, visited {report.visited_fraction:.3f}, "
        f"{len(report.bookmarks)} bookmarks, hash {engine.state_hash():016x}"
    )
    return 0


def _cmd_replay(args) -> int:
    artifacts = pipeline.build_from_phantom_dir(args.dir)
    engine, digest = replay(
        Path(args.log),
        artifacts.volume,
        artifacts.mesh,
        artifacts.ray_index,
        artifacts.fresh_centerline,
    )
    print(
        f"replayed {len(engine.log)} events over {engine.now:.2f} s, "
        f"state hash {digest:016x}"
    )
    return 0


def _cmd_serve(args) -> int:
    artifacts = pipeline.build_from_phantom_dir(args.dir)
    engine = SessionEngine(
        artifacts.volume, artifacts.mesh, artifacts.ray_index, artifacts.centerline
    )
    print(f"serving on port {args.port} (ctrl-c to stop)")
    serve(
        engine,
        args.port,
        realtime=not args.fast,
        log_path=args.log,
        ready_callback=lambda p: print(f"listening on {p}", flush=True),
    )
    print("client disconnected, session over")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ivc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a synthetic ground-truth colon")
    p.add_argument("--preset", choices=("straight", "s_curve"), default="straight")
    p.add_argument("--length", type=float, default=200.0, help="tube length along the sweep (mm)")
    p.add_argument("--radius", type=float, default=12.5, help="tube radius (mm)")
    p.add_argument("--spacing", type=float, default=1.0, help="voxel spacing (mm)")
    p.add_argument("--polyps", help="JSON file: [{s_mm, azimuth_deg, radius_mm}, ...]")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_phantom)

    p = sub.add_parser("ingest", help="segment the lumen from a CT volume")
    p.add_argument("header", help="volume header JSON")
    p.add_argument("--seed", type=_xyz, required=True, help="world point inside the lumen (x,y,z mm)")
    p.add_argument("--threshold", type=float, default=DEFAULT_AIR_THRESHOLD_HU)
    p.add_argument("--out", required=True, help="mask header output path")
    p.add_argument("--mesh", help="optionally also write the lumen mesh OBJ here")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("centerline", help="extract the mid-line path from a mask")
    p.add_argument("mask", help="mask header JSON")
    p.add_argument("--start", type=_xyz, required=True, help="rectum-end seed (x,y,z mm)")
    p.add_argument("--end", type=_xyz, required=True, help="cecum-end seed (x,y,z mm)")
    p.add_argument("--out", required=True, help="centerline CSV output path")
    p.set_defaults(func=_cmd_centerline)

    p = sub.add_parser("simulate", help="run a scripted reading protocol")
    p.add_argument("--dir", required=True, help="phantom directory (volume.json + ground_truth.json)")
    p.add_argument("--protocol", choices=PROTOCOLS, default="one_run")
    p.add_argument("--level", type=int, default=4, help="velocity level 1..4")
    p.add_argument("--gaze", choices=GAZE_MODES, default="forward")
    p.add_argument("--report", help="metrics report JSON output path")
    p.add_argument("--log", help="event log JSONL output path")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("replay", help="re-run an event log and print the state hash")
    p.add_argument("log", help="event log (JSON Lines)")
    p.add_argument("--dir", required=True, help="phantom directory the log was recorded against")
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("serve", help="serve a live session on a TCP port")
    p.add_argument("--dir", required=True, help="phantom directory")
    p.add_argument("--port", type=int, default=4700)
    p.add_argument("--fast", action="store_true", help="no wall-clock pacing (tests)")
    p.add_argument("--log", help="write the event log here when the client leaves")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IvcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
