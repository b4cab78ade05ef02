"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error. Angles on the command
line are degrees. ``MEMSLIDAR_WORKERS`` sets the default worker count.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import shutil
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import dataset as ds
from ._backend import BACKEND
from .evaluation import AP_MODES, evaluate
from .fileio import FormatError, read_depth, write_depth, write_labels, write_points
from .geometry import CameraIntrinsics, RigidTransform
from .scanpattern import ScanConfig
from .scene import MOUNT_PRESETS, SceneScript, SensorMount, mount_to_transform, render_depth
from .sensor import (
    DEFAULT_MIN_POINTS, NORMALIZED, SENSOR_RAW, add_range_noise, check_depth_resolution,
    ingest_external_depth, simulate_frame_depthpath, simulate_frame_direct,
)

log = logging.getLogger("memslidar")

DEFAULT_SEED = 0
EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get("MEMSLIDAR_WORKERS", "1")))
    except ValueError:
        return 1


def _resolution(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"resolution must look like 1024x768, got {text!r}") from None


def _frame_name(fid: int) -> str:
    return f"{fid:06d}"


def _prepare_out(out: Path) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / ".write_test").touch()
        (out / ".write_test").unlink()
    except OSError as exc:
        raise ds.DatasetError(f"{out}: output directory not writable ({exc.strerror})") from None


def _run_frames(fn, items, workers: int, init=None, initargs=()):
    """Map ``fn`` over ``items``; results come back in input order."""
    if workers <= 1 or len(items) <= 1:
        if init is not None:
            init(*initargs)
        return [fn(i) for i in items]
    chunk = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(workers, initializer=init, initargs=initargs) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


# simulate ---------------------------------------------------------------

_SIM: dict = {}


def _sim_init(scene_doc, out, path, resolution, sigma, seed, min_points):
    _SIM.update(scene=SceneScript.from_dict(scene_doc), out=Path(out), path=path, resolution=resolution,
                sigma=sigma, seed=seed, min_points=min_points)


def _sim_one(fid: int):
    s = _SIM
    t = s["scene"].frame_times[fid]
    if s["path"] == "depth":
        cloud, labels = simulate_frame_depthpath(s["scene"], t, s["resolution"], fid, s["min_points"])
    else:
        cloud, labels = simulate_frame_direct(s["scene"], t, fid, s["min_points"])
    if s["sigma"] > 0:
        cloud = add_range_noise(cloud, s["sigma"], s["seed"])
    name = _frame_name(fid)
    write_points(s["out"] / "frames" / f"{name}.bin", cloud.points)
    write_labels(s["out"] / "labels" / f"{name}.txt", labels)
    return len(cloud), len(labels)


def cmd_simulate(args) -> int:
    scene = SceneScript.load(args.scene)
    out = Path(args.out)
    _prepare_out(out)
    (out / "frames").mkdir(exist_ok=True)
    (out / "labels").mkdir(exist_ok=True)
    if args.path == "depth":
        check_depth_resolution(scene.scan, *args.resolution)
    seed = scene.seed if args.seed is None else args.seed
    n = len(scene.frame_times)
    if n == 0:
        log.warning("scene script has no frame times; writing an empty manifest")
    counts = _run_frames(_sim_one, list(range(n)), args.workers, _sim_init,
                         (scene.to_dict(), str(out), args.path, tuple(args.resolution), args.noise_sigma, seed,
                          args.min_points))
    entries = [ds.ManifestEntry(out / "frames" / f"{_frame_name(i)}.bin", out / "labels" / f"{_frame_name(i)}.txt",
                                "synthetic", i, {"time": scene.frame_times[i]}) for i in range(n)]
    meta = {"frame_convention": SENSOR_RAW, "mount": scene.mount.to_dict(), "sensor": scene.scan.to_dict(),
            "generator": {"path": args.path, "noise_sigma": args.noise_sigma, "min_points": args.min_points}}
    if args.path == "depth":
        meta["generator"]["resolution"] = list(args.resolution)
    ds.DatasetManifest(entries, seed, meta).save(out / "manifest.json")
    pts = sum(c[0] for c in counts)
    lbl = sum(c[1] for c in counts)
    print(f"frames: {n}, points: {pts}, labels: {lbl}")
    return EXIT_OK


# render-depth / ingest --------------------------------------------------

def cmd_render_depth(args) -> int:
    scene = SceneScript.load(args.scene)
    out = Path(args.out)
    _prepare_out(out)
    (out / "depth").mkdir(exist_ok=True)
    k = check_depth_resolution(scene.scan, *args.resolution)
    pose = mount_to_transform(scene.mount)
    poses = []
    for fid, t in enumerate(scene.frame_times):
        depth = render_depth(scene.at(t), pose, k)
        name = f"{_frame_name(fid)}.mdpt"
        write_depth(out / "depth" / name, depth)
        poses.append({"frame_id": fid, "file": name, "time": t, "rotation": pose.rotation.tolist(),
                      "translation": pose.translation.tolist()})
    (out / "poses.json").write_text(json.dumps(poses, indent=1) + "\n")
    (out / "intrinsics.json").write_text(json.dumps(k.to_dict(), indent=1) + "\n")
    (out / "scan.json").write_text(json.dumps(scene.scan.to_dict(), indent=1) + "\n")
    print(f"depth frames: {len(poses)} ({k.width}x{k.height})")
    return EXIT_OK


def _mount_from_pose(pose: RigidTransform) -> SensorMount | None:
    r = pose.rotation
    tilt = math.asin(max(-1.0, min(1.0, -r[2, 0])))
    heading = math.atan2(r[1, 0], r[0, 0])
    try:
        m = SensorMount(tuple(pose.translation), tilt, heading)
    except ValueError:
        return None
    if np.max(np.abs(mount_to_transform(m).rotation - r)) > 1e-6:
        return None  # rolled sensor: not expressible as tilt + heading
    return m


def _scan_from_args(args) -> ScanConfig:
    base = ScanConfig.from_dict(json.loads(Path(args.scan).read_text())) if args.scan else ScanConfig()
    kw = base.to_dict()
    for key in ("num_scanlines", "points_per_line", "fov_h", "fov_v"):
        v = getattr(args, key, None)
        if v is not None:
            kw[key] = v
    return ScanConfig.from_dict(kw)


def cmd_ingest(args) -> int:
    depth_dir = Path(args.depth_dir)
    files = sorted(depth_dir.glob("*.mdpt")) if depth_dir.is_dir() else []
    if not files:
        raise ds.DatasetError(f"{depth_dir}: no depth frames found")
    poses = json.loads(Path(args.poses).read_text())
    if len(poses) != len(files):
        raise ds.DatasetError(f"pose count ({len(poses)}) does not match depth-file count ({len(files)})")
    k = CameraIntrinsics.from_dict(json.loads(Path(args.intrinsics).read_text()))
    scan = _scan_from_args(args)
    out = Path(args.out)
    _prepare_out(out)
    (out / "frames").mkdir(exist_ok=True)
    (out / "labels").mkdir(exist_ok=True)
    by_name = {p.get("file"): p for p in poses}
    entries, errors, written = [], [], []
    mount = None
    for i, f in enumerate(files):
        p = by_name.get(f.name, poses[i])
        fid = int(p.get("frame_id", i))
        try:
            pose = RigidTransform(p["rotation"], p["translation"])
            cloud = ingest_external_depth(read_depth(f), pose, k, scan, fid, args.intensity)
        except (ValueError, KeyError) as exc:
            errors.append(f"{f.name}: {exc}")
            continue
        name = _frame_name(fid)
        fp, lp = out / "frames" / f"{name}.bin", out / "labels" / f"{name}.txt"
        write_points(fp, cloud.points)
        supplied = Path(args.labels_dir) / f"{f.stem}.txt" if args.labels_dir else None
        if supplied is not None and supplied.exists():
            shutil.copyfile(supplied, lp)
        else:
            lp.write_text("")
        written += [fp, lp]
        entries.append(ds.ManifestEntry(fp, lp, args.source, fid, {"depth_file": f.name}))
        mount = mount or _mount_from_pose(pose)
    if errors:
        for e in errors:
            print(f"error: {e}", file=sys.stderr)
        if not args.keep_partial:
            for p in written:
                p.unlink(missing_ok=True)
            return EXIT_DATA
    meta = {"frame_convention": SENSOR_RAW, "sensor": scan.to_dict(), "intrinsics": k.to_dict()}
    if mount is not None:
        meta["mount"] = mount.to_dict()
    if errors:
        meta["failed"] = errors
    ds.DatasetManifest(entries, DEFAULT_SEED, meta).save(out / "manifest.json")
    print(f"frames: {len(entries)}, points: {sum(p.stat().st_size // 16 for p in written[::2])}")
    return EXIT_DATA if errors else EXIT_OK


# normalize / augment ----------------------------------------------------

def _mount_from_args(args, manifest) -> SensorMount:
    if args.preset:
        return MOUNT_PRESETS[args.preset]
    if args.height is not None or args.tilt is not None:
        if args.height is None or args.tilt is None:
            raise UsageError("--height and --tilt must be given together")
        return SensorMount((0.0, 0.0, args.height), math.radians(args.tilt), 0.0)
    if "mount" in manifest.metadata:
        return SensorMount.from_dict(manifest.metadata["mount"])
    raise UsageError("no mount given and the manifest records none (use --preset or --height/--tilt)")


_FRAMEJOB: dict = {}


def _framejob_init(kind, payload, out, convention):
    _FRAMEJOB.update(kind=kind, payload=payload, out=Path(out), convention=convention)


def _framejob_one(entry: ds.ManifestEntry):
    j = _FRAMEJOB
    frame, labels = ds.read_frame(entry, j["convention"])
    if j["kind"] == "normalize":
        frame, labels = ds.normalize(frame, labels, j["payload"])
    else:
        frame, labels = ds.augment(frame, labels, j["payload"])
    name = _frame_name(entry.frame_id)
    fp, lp = j["out"] / "frames" / f"{name}.bin", j["out"] / "labels" / f"{name}.txt"
    ds.write_frame(frame, labels, fp, lp)
    return ds.ManifestEntry(fp, lp, entry.source, entry.frame_id, entry.extra)


def _map_manifest(kind, payload, manifest, out: Path, workers: int, convention: str):
    _prepare_out(out)
    (out / "frames").mkdir(exist_ok=True)
    (out / "labels").mkdir(exist_ok=True)
    return _run_frames(_framejob_one, list(manifest.entries), workers, _framejob_init,
                       (kind, payload, str(out), convention))


def cmd_normalize(args) -> int:
    manifest = ds.DatasetManifest.load(args.manifest)
    if manifest.frame_convention == NORMALIZED:
        raise ds.DatasetError(f"{args.manifest}: dataset is already normalized")
    mount = _mount_from_args(args, manifest)
    out = Path(args.out)
    entries = _map_manifest("normalize", mount, manifest, out, args.workers, SENSOR_RAW)
    meta = dict(manifest.metadata, frame_convention=NORMALIZED, mount=mount.to_dict())
    ds.DatasetManifest(entries, manifest.seed, meta).save(out / "manifest.json")
    print(f"normalized frames: {len(entries)} (height {mount.height:g} m, tilt {math.degrees(mount.tilt):g} deg)")
    return EXIT_OK


def cmd_augment(args) -> int:
    manifest = ds.DatasetManifest.load(args.manifest)
    if manifest.frame_convention != NORMALIZED:
        raise ds.DatasetError(f"{args.manifest}: augmentation requires a normalized dataset")
    seed = DEFAULT_SEED if args.seed is None else args.seed
    spec = ds.AugmentationSpec(
        args.op,
        angle=None if args.angle is None else math.radians(args.angle),
        max_angle=math.radians(args.max_angle),
        factor=args.factor, scale_range=(args.min_scale, args.max_scale), axis=args.axis, seed=seed)
    out = Path(args.out)
    entries = _map_manifest("augment", spec, manifest, out, args.workers, NORMALIZED)
    meta = dict(manifest.metadata)
    meta.setdefault("augmentations", [])
    meta["augmentations"] = meta["augmentations"] + [{
        "op": spec.op, "angle": args.angle, "max_angle": args.max_angle, "factor": spec.factor,
        "scale_range": list(spec.scale_range), "axis": spec.axis, "seed": seed}]
    ds.DatasetManifest(entries, seed, meta).save(out / "manifest.json")
    print(f"augmented frames: {len(entries)} ({spec.op})")
    return EXIT_OK


# mix / split / stats / evaluate ----------------------------------------

def cmd_mix(args) -> int:
    real = ds.DatasetManifest.load(args.real) if args.real else ds.DatasetManifest()
    syn = ds.DatasetManifest.load(args.synthetic) if args.synthetic else ds.DatasetManifest()
    seed = DEFAULT_SEED if args.seed is None else args.seed
    spec = ds.MixSpec(args.synthetic_fraction, args.total)
    mixed = ds.mix(real, syn, spec, seed)
    out = Path(args.out)
    _prepare_out(out.parent)
    mixed.save(out)
    print(f"synthetic: {spec.synthetic_count}, real: {spec.real_count}")
    return EXIT_OK


def cmd_split(args) -> int:
    manifest = ds.DatasetManifest.load(args.manifest)
    seed = DEFAULT_SEED if args.seed is None else args.seed
    train, val = ds.split(manifest, args.train_fraction, seed)
    out = Path(args.out)
    _prepare_out(out)
    train.save(out / "train.json")
    val.save(out / "validation.json")
    print(f"train: {len(train)}, validation: {len(val)}")
    return EXIT_OK


def cmd_stats(args) -> int:
    report = ds.stats(ds.DatasetManifest.load(args.manifest))
    text = json.dumps(report, indent=1)
    print(text)
    if args.json:
        Path(args.json).write_text(text + "\n")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    preds = ds.DatasetManifest.load(args.predictions)
    gt = ds.DatasetManifest.load(args.ground_truth)
    try:
        report = evaluate(preds, gt, args.iou, args.ap_mode)
    except KeyError as exc:
        raise ds.DatasetError(str(exc.args[0])) from None
    print(f"AP = {report.ap:.4f} ({report.mode}, IoU {report.iou_threshold:g})")
    print(f"TP: {report.tp}, FP: {report.fp}, FN: {report.fn}, GT: {report.total_gt}")
    if args.report:
        report.save(args.report)
    return EXIT_OK


# parser -----------------------------------------------------------------

def _add_mount_flags(p):
    p.add_argument("--preset", choices=sorted(MOUNT_PRESETS), help="named mount geometry")
    p.add_argument("--height", type=float, help="mount height in meters")
    p.add_argument("--tilt", type=float, help="downward tilt in degrees")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="memslidar", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    workers = dict(type=int, default=_default_workers(), help="worker processes (default: $MEMSLIDAR_WORKERS or 1)")

    p = sub.add_parser("simulate", help="generate an annotated synthetic dataset from a scene script")
    p.add_argument("scene")
    p.add_argument("out")
    p.add_argument("--path", choices=("direct", "depth"), default="direct")
    p.add_argument("--resolution", type=_resolution, default=(1024, 768), help="depth-image size WxH")
    p.add_argument("--noise-sigma", type=float, default=0.0, help="Gaussian range noise in meters")
    p.add_argument("--seed", type=int, help="noise seed (default: the scene's seed)")
    p.add_argument("--min-points", type=int, default=DEFAULT_MIN_POINTS)
    p.add_argument("--workers", **workers)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("render-depth", help="render z-depth images, poses and intrinsics for a scene script")
    p.add_argument("scene")
    p.add_argument("out")
    p.add_argument("--resolution", type=_resolution, default=(1024, 768))
    p.set_defaults(func=cmd_render_depth)

    p = sub.add_parser("ingest", help="turn external depth frames into point clouds")
    p.add_argument("depth_dir")
    p.add_argument("out")
    p.add_argument("--poses", required=True, help="JSON list of per-frame sensor poses")
    p.add_argument("--intrinsics", required=True, help="JSON intrinsics file")
    p.add_argument("--scan", help="JSON scan config (degrees)")
    p.add_argument("--num-scanlines", type=int)
    p.add_argument("--points-per-line", type=int)
    p.add_argument("--fov-h", type=float, help="degrees")
    p.add_argument("--fov-v", type=float, help="degrees")
    p.add_argument("--labels-dir", help="directory of label files named like the depth files")
    p.add_argument("--intensity", type=float, default=1.0)
    p.add_argument("--source", choices=ds.SOURCES, default="synthetic")
    p.add_argument("--keep-partial", action="store_true", help="keep good frames when some files fail")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("normalize", help="remove mount tilt and height")
    p.add_argument("manifest")
    p.add_argument("out")
    _add_mount_flags(p)
    p.add_argument("--workers", **workers)
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("mix", help="compose a real/synthetic training set")
    p.add_argument("--real")
    p.add_argument("--synthetic")
    p.add_argument("--synthetic-fraction", type=float, required=True)
    p.add_argument("--total", type=int, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output manifest path")
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("split", help="seeded train/validation split")
    p.add_argument("manifest")
    p.add_argument("--train-fraction", type=float, default=0.7)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory for train.json / validation.json")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("augment", help="rotate, scale or mirror a normalized dataset")
    p.add_argument("manifest")
    p.add_argument("out")
    p.add_argument("--op", choices=("rotate", "scale", "mirror"), required=True)
    p.add_argument("--angle", type=float, help="fixed rotation in degrees")
    p.add_argument("--max-angle", type=float, default=45.0, help="random rotation bound in degrees")
    p.add_argument("--factor", type=float, help="fixed scale factor")
    p.add_argument("--min-scale", type=float, default=0.95)
    p.add_argument("--max-scale", type=float, default=1.05)
    p.add_argument("--axis", choices=("x", "y"), default="y")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", **workers)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("stats", help="summarize a dataset")
    p.add_argument("manifest")
    p.add_argument("--json", help="also write the report here")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("evaluate", help="AP of predictions against ground truth")
    p.add_argument("predictions")
    p.add_argument("ground_truth")
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--ap-mode", choices=AP_MODES, default="exact-auc")
    p.add_argument("--report", help="write the PR curve and counts as JSON")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help and usage errors
        return exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    log.debug("kernel backend: %s", BACKEND)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ds.DatasetError, FormatError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
