"""Command-line surface of the toolkit.

Five subcommands cover the pipeline end to end: ``gen-gt`` (annotation
to reference depth), ``render`` (boundary pair to floor/ceiling depth
plus an optional SVG), ``fit`` (depth to recovered layout), ``eval``
(predicted vs. truth IoU tables), and ``ablate-m`` (ray-count
approximation error study).

Exit codes: 0 success, 2 input/format problems, 3 geometry failures,
4 optimization failures.  Commands are deterministic given their inputs
and flags; the ``HDK_THREADS`` environment variable caps concurrency
without affecting results (outputs are collected in input order).
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .errors import (
    DomainError,
    FitFailureError,
    FormatError,
    GeometryError,
    SnapFailureError,
)
from .fit import FitConfig, fit_layout, manhattan_snap
from .jsonio import (
    RunManifest,
    atomic_write_text,
    config_hash,
    dumps,
    format_float,
    load_depth_csv,
    load_json,
    save_depth_csv,
)
from .layout import (
    DEFAULT_CAMERA_HEIGHT,
    LayoutAnnotation,
    boundary_pair_from_json,
    boundary_pair_to_json,
    densify_boundaries,
    lift_to_plane,
)
from .metrics import bucket_by_corners, layout_iou
from .render import HorizonDepthMap, render_pair
from .sphere import make_ray_fan
from .svgplot import render_summary

DEFAULT_M = 256
DEFAULT_REFERENCE_M = 4096
DEFAULT_M_LIST = "16,64,256,1024"


def _max_workers(n_items: int) -> int:
    raw = os.environ.get("HDK_THREADS", "").strip()
    if raw:
        try:
            limit = int(raw)
        except ValueError as exc:
            raise FormatError(f"HDK_THREADS must be an integer, got {raw!r}") from exc
        if limit < 1:
            raise FormatError(f"HDK_THREADS must be at least 1, got {limit}")
    else:
        limit = os.cpu_count() or 1
    return max(1, min(limit, n_items))


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def _manifest(args, command: str, inputs: list, flags: dict, started: float) -> dict:
    return RunManifest(
        command=command,
        inputs=[str(p) for p in inputs],
        config_hash=config_hash(flags),
        seed=args.seed,
        version=__version__,
        duration_s=time.perf_counter() - started,
    ).to_json()


def _load_depth(path: str) -> HorizonDepthMap:
    """Depth map from either the JSON object or the flat-CSV format."""
    if path.endswith(".csv"):
        values = load_depth_csv(path)
        if len(values) < 4:
            raise FormatError(f"{path} holds {len(values)} values; need at least 4")
        return HorizonDepthMap(make_ray_fan(len(values)), values)
    return HorizonDepthMap.from_json(load_json(path))


def _write_depth(out: str, values: np.ndarray, extra: dict, manifest: dict) -> None:
    """Write a depth map as JSON, or as flat CSV with a JSON sidecar.

    The CSV format has no room for metadata, so ``<out>.manifest.json``
    carries the extra fields and the manifest instead.
    """
    if out.endswith(".csv"):
        save_depth_csv(out, values)
        sidecar = dict(extra)
        sidecar["manifest"] = manifest
        atomic_write_text(out + ".manifest.json", dumps(sidecar))
        return
    payload = {"m": len(values), "values": [float(v) for v in values]}
    payload.update(extra)
    payload["manifest"] = manifest
    atomic_write_text(out, dumps(payload))


def _periodic_interp(values: np.ndarray, target_count: int) -> np.ndarray:
    """Resample an equiangular periodic profile onto a finer fan.

    Both grids start at longitude -pi, so sample k of the target grid
    sits at fractional index k*m/target of the source; aligned samples
    come back bit-identical (interpolation weight exactly zero).
    """
    m = len(values)
    pos = np.arange(target_count) * (m / target_count)
    base = np.floor(pos)
    i0 = base.astype(int) % m
    i1 = (i0 + 1) % m
    w = pos - base
    return (1.0 - w) * values[i0] + w * values[i1]


def _json_names(directory: str) -> list[str]:
    try:
        entries = os.listdir(directory)
    except OSError as exc:
        raise FormatError(f"cannot list {directory}: {exc}") from exc
    return sorted(name for name in entries if name.endswith(".json"))


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_gt(args) -> int:
    started = time.perf_counter()
    annotation = LayoutAnnotation.from_json(load_json(args.annotation))
    fan = make_ray_fan(args.m)
    pair = densify_boundaries(annotation, args.m)
    d_f, d_c, _, _ = render_pair(
        pair, annotation.camera_height, annotation.ceiling_ratio, fan
    )
    fc = float(np.max(np.abs(d_f.values - d_c.values)))
    manifest = _manifest(args, "gen-gt", [args.annotation], {"m": args.m}, started)
    _write_depth(args.out, d_f.values, {"fc_discrepancy": fc}, manifest)
    _say(args, f"wrote {args.out} (m={args.m}, fc_discrepancy={fc:.3e})")
    return 0


def cmd_render(args) -> int:
    started = time.perf_counter()
    pair, height, ratio = boundary_pair_from_json(load_json(args.boundary))
    fan = make_ray_fan(args.m)
    d_f, d_c, _, _ = render_pair(pair, height, ratio, fan)
    flags = {"m": args.m, "svg": bool(args.svg)}
    manifest = _manifest(args, "render", [args.boundary], flags, started)
    extra = {"ceiling_values": [float(v) for v in d_c.values]}
    _write_depth(args.out, d_f.values, extra, manifest)
    if args.svg:
        lifted = lift_to_plane(pair.floor, height, 1.0)
        svg = render_summary(
            lifted[:, [0, 2]], fan.thetas, d_f.values, manifest["config_hash"]
        )
        atomic_write_text(args.svg, svg)
        _say(args, f"wrote {args.svg}")
    _say(args, f"wrote {args.out} (m={args.m})")
    return 0


def cmd_fit(args) -> int:
    started = time.perf_counter()
    d_bar = _load_depth(args.depth)
    if args.config:
        config = FitConfig.from_json(load_json(args.config))
    else:
        config = FitConfig(n_points=d_bar.fan.count, m_rays=d_bar.fan.count)
    result = fit_layout(d_bar, config)
    snapped = None
    snap_error = None
    try:
        snapped = manhattan_snap(result.pair, result.estimated_ceiling_ratio)
    except SnapFailureError as exc:
        snap_error = str(exc)

    inputs = [args.depth] + ([args.config] if args.config else [])
    payload = {
        "boundary": boundary_pair_to_json(
            result.pair, DEFAULT_CAMERA_HEIGHT, result.estimated_ceiling_ratio
        ),
        "converged": result.converged,
        "iterations": result.iterations,
        "final_loss": result.final_loss,
        "estimated_ceiling_ratio": result.estimated_ceiling_ratio,
        "loss_trajectory": [float(v) for v in result.loss_trajectory],
        "snapped_annotation": snapped.to_json() if snapped is not None else None,
        "snap_error": snap_error,
        "config": config.to_json(),
        "manifest": _manifest(args, "fit", inputs, config.to_json(), started),
    }
    atomic_write_text(args.out, dumps(payload))
    status = "converged" if result.converged else "hit the iteration cap"
    _say(
        args,
        f"wrote {args.out} ({status} after {result.iterations} iterations, "
        f"loss {result.final_loss:.3e})",
    )
    if snap_error is not None:
        _say(args, f"note: snapping failed: {snap_error}")
    return 0


def cmd_eval(args) -> int:
    started = time.perf_counter()
    pred_names = _json_names(args.pred_dir)
    gt_names = _json_names(args.gt_dir)
    matched = sorted(set(pred_names) & set(gt_names))
    unmatched_pred = sorted(set(pred_names) - set(gt_names))
    unmatched_gt = sorted(set(gt_names) - set(pred_names))

    def one(name: str):
        pred = LayoutAnnotation.from_json(load_json(os.path.join(args.pred_dir, name)))
        gt = LayoutAnnotation.from_json(load_json(os.path.join(args.gt_dir, name)))
        return layout_iou(pred, gt)

    if matched:
        with ThreadPoolExecutor(max_workers=_max_workers(len(matched))) as pool:
            reports = list(pool.map(one, matched))
    else:
        reports = []
    table = bucket_by_corners(reports)

    payload = {
        "pairs": [
            {
                "name": name,
                "iou_2d": report.iou_2d,
                "iou_3d": report.iou_3d,
                "corner_count_bucket": report.corner_count_bucket,
            }
            for name, report in zip(matched, reports)
        ],
        "unmatched_pred": unmatched_pred,
        "unmatched_gt": unmatched_gt,
        "buckets": table.to_json(),
        "manifest": _manifest(args, "eval", [args.pred_dir, args.gt_dir], {}, started),
    }
    atomic_write_text(args.out, dumps(payload))
    if not args.quiet:
        print(table.format_text())
    if unmatched_pred or unmatched_gt:
        for name in unmatched_pred:
            print(f"unmatched prediction: {name}", file=sys.stderr)
        for name in unmatched_gt:
            print(f"unmatched truth: {name}", file=sys.stderr)
        return 2
    return 0


def _ablate_room(path: str, m_list: list[int], reference_m: int) -> dict:
    """Max/mean grid-resampling error per ray count for one room.

    The wall set is densified once at the reference resolution and held
    fixed, so the comparison isolates the effect of the ray count M.
    """
    annotation = LayoutAnnotation.from_json(load_json(path))
    pair = densify_boundaries(annotation, reference_m)
    h, r = annotation.camera_height, annotation.ceiling_ratio
    d_ref, _, _, _ = render_pair(pair, h, r, make_ray_fan(reference_m))
    row = {}
    for m in m_list:
        d_m, _, _, _ = render_pair(pair, h, r, make_ray_fan(m))
        err = np.abs(_periodic_interp(d_m.values, reference_m) - d_ref.values)
        row[m] = (float(np.max(err)), float(np.mean(err)))
    return row


def cmd_ablate_m(args) -> int:
    started = time.perf_counter()
    try:
        m_list = [int(part) for part in args.m_list.split(",") if part.strip()]
    except ValueError as exc:
        raise FormatError(f"--m-list must be comma-separated integers: {exc}") from exc
    if not m_list:
        raise FormatError("--m-list must name at least one ray count")
    for m in m_list:
        if m < 4:
            raise DomainError(f"ray count {m} is below the minimum of 4")
        if m > args.reference_m:
            raise DomainError(
                f"ray count {m} exceeds the reference count {args.reference_m}"
            )
    names = _json_names(args.annotation_dir)
    if not names:
        raise FormatError(f"no annotation files (*.json) in {args.annotation_dir}")
    paths = [os.path.join(args.annotation_dir, name) for name in names]

    with ThreadPoolExecutor(max_workers=_max_workers(len(paths))) as pool:
        per_room = list(
            pool.map(lambda p: _ablate_room(p, m_list, args.reference_m), paths)
        )

    rows = []
    for m in m_list:
        maxes = [room[m][0] for room in per_room]
        means = [room[m][1] for room in per_room]
        rows.append(
            {
                "m": m,
                "max_error": max(maxes),
                "mean_error": float(np.mean(means)),
            }
        )
    payload = {
        "reference_m": args.reference_m,
        "m_list": m_list,
        "rooms": names,
        "rows": rows,
        "per_room": {
            name: {
                str(m): {"max_error": room[m][0], "mean_error": room[m][1]}
                for m in m_list
            }
            for name, room in zip(names, per_room)
        },
        "manifest": _manifest(
            args,
            "ablate-m",
            [args.annotation_dir],
            {"m_list": m_list, "reference_m": args.reference_m},
            started,
        ),
    }
    atomic_write_text(args.out, dumps(payload))
    for row in rows:
        _say(
            args,
            f"M={row['m']:>5}  max_error={row['max_error']:.6e}  "
            f"mean_error={row['mean_error']:.6e}",
        )
    return 0


# ---------------------------------------------------------------------------
# parser / dispatch


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hdk",
        description="Horizon-depth geometry toolkit for Manhattan room layouts.",
    )
    parser.add_argument("--version", action="version", version=f"hdk {__version__}")
    parser.add_argument("--seed", type=int, default=0, help="recorded in manifests")
    parser.add_argument("--quiet", action="store_true", help="suppress status output")

    # the same flags are accepted after the subcommand; SUPPRESS keeps
    # the top-level value when the subcommand position omits them
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument(
        "--quiet", action="store_true", default=argparse.SUPPRESS
    )

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "gen-gt", parents=[common], help="reference depth from a layout annotation"
    )
    p.add_argument("annotation", help="annotation JSON file")
    p.add_argument("--m", type=int, default=DEFAULT_M, help="ray count")
    p.add_argument("--out", required=True, help="output depth file (.json or .csv)")
    p.set_defaults(func=cmd_gen_gt)

    p = sub.add_parser(
        "render", parents=[common], help="floor/ceiling depth from a boundary pair"
    )
    p.add_argument("boundary", help="boundary-pair JSON file")
    p.add_argument("--m", type=int, default=DEFAULT_M, help="ray count")
    p.add_argument("--out", required=True, help="output depth file (.json or .csv)")
    p.add_argument("--svg", help="also write a floor-plan/depth SVG here")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser(
        "fit", parents=[common], help="recover a layout from a depth file"
    )
    p.add_argument("depth", help="reference depth file (.json or .csv)")
    p.add_argument("--config", help="fit configuration JSON file")
    p.add_argument("--out", required=True, help="output result JSON")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser(
        "eval", parents=[common], help="IoU of predicted vs. truth annotations"
    )
    p.add_argument("pred_dir", help="directory of predicted annotation JSONs")
    p.add_argument("gt_dir", help="directory of truth annotation JSONs")
    p.add_argument("--out", required=True, help="output report JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser(
        "ablate-m",
        parents=[common],
        help="approximation error of coarse ray counts vs. a fine reference",
    )
    p.add_argument("annotation_dir", help="directory of annotation JSONs")
    p.add_argument(
        "--m-list", default=DEFAULT_M_LIST, help="comma-separated ray counts"
    )
    p.add_argument(
        "--reference-m", type=int, default=DEFAULT_REFERENCE_M, help="reference count"
    )
    p.add_argument("--out", required=True, help="output table JSON")
    p.set_defaults(func=cmd_ablate_m)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GeometryError as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return 3
    except FitFailureError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        if exc.trajectory:
            print(
                "loss trajectory: " + ", ".join(format_float(v) for v in exc.trajectory),
                file=sys.stderr,
            )
        return 4


if __name__ == "__main__":
    sys.exit(main())
