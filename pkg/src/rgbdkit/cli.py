"""Command-line entry point.

Subcommands: validate, eval-vot, eval-vot-csv, eval-vos, attributes, synth,
bev-demo, losses-check. Reports are deterministic JSON (sorted keys, 4
decimal places, full-precision values under "raw") or CSV curve dumps.

Exit codes: 0 success, 1 validation/check failure, 2 usage errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import bev, dataset, eval_vos, eval_vot, losses, tensorio
from .core import BoundingBox, CameraIntrinsics, TargetMask
from .geometry import BEVGridSpec


def _round4(x: float) -> float:
    return round(float(x), 4)


def _point_dict(p: eval_vot.PRPoint, rounded: bool = True) -> dict:
    conv = _round4 if rounded else float
    tau = p.tau if p.tau != float("-inf") else -1e30  # JSON has no -inf
    return {"tau": conv(tau), "pr": conv(p.pr), "re": conv(p.re), "f": conv(p.f)}


def _emit_json(obj: dict, path: Optional[str]):
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _jobs(args) -> int:
    if args.jobs is not None:
        return args.jobs
    return int(os.environ.get("RGBDKIT_JOBS", "1"))


def _load_sequences(root: Path, jobs: int) -> List[dataset.Sequence]:
    seq_dirs = sorted(d for d in root.iterdir() if d.is_dir() and (d / "camera.jsonl").exists())
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(dataset.load_sequence, seq_dirs))
    return [dataset.load_sequence(d) for d in seq_dirs]


def _collect_vot_inputs(root: Path, preds_dir: Path, jobs: int):
    results, gts, flags, names = [], [], [], []
    for seq in _load_sequences(root, jobs):
        for target in seq.targets:
            track = f"{seq.id}_{target:02d}"
            pred_file = preds_dir / f"{track}.csv"
            if not pred_file.exists():
                raise dataset.DatasetError(f"missing prediction file: {pred_file}")
            preds = eval_vot.load_predictions(pred_file)
            gt = dataset.ground_truth_boxes(seq, target)
            if len(preds) != len(gt):
                raise dataset.DatasetError(
                    f"{track}: prediction count {len(preds)} != frame count {len(gt)}"
                )
            results.append(preds)
            gts.append(gt)
            flags.append([f.annotations[target].attributes for f in seq.frames])
            names.append(track)
    return results, gts, flags, names


def cmd_validate(args) -> int:
    report = dataset.validate_dataset(args.root)
    out = {
        "sequences": list(report.sequences),
        "violation_counts": report.counts(),
        "violations": [
            {"sequence": v.sequence, "kind": v.kind, "detail": v.detail}
            for v in report.violations
        ],
    }
    _emit_json(out, args.output)
    return 0 if report.ok else 1


def _curve_report(curve: eval_vot.PRCurve, attributes: Optional[Dict] = None) -> dict:
    report = {
        "best": _point_dict(curve.best),
        "curve": [_point_dict(p) for p in curve.points],
        "raw": {
            "best": _point_dict(curve.best, rounded=False),
            "curve": [_point_dict(p, rounded=False) for p in curve.points],
        },
    }
    if attributes is not None:
        report["attributes"] = {k: _point_dict(v) for k, v in sorted(attributes.items())}
        report["raw"]["attributes"] = {
            k: _point_dict(v, rounded=False) for k, v in sorted(attributes.items())
        }
    return report


def _write_curve_csv(curve: eval_vot.PRCurve, path: str):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["tau", "pr", "re", "f"])
        for p in curve.points:
            writer.writerow([repr(p.tau), repr(p.pr), repr(p.re), repr(p.f)])


def cmd_eval_vot(args) -> int:
    results, gts, flags, _ = _collect_vot_inputs(Path(args.root), Path(args.preds), _jobs(args))
    curve = eval_vot.sweep(results, gts, mode=args.mode)
    attrs = eval_vot.attribute_report(results, gts, flags, mode=args.mode)
    if args.format == "csv" or args.curve_csv:
        _write_curve_csv(curve, args.curve_csv or args.output or "curve.csv")
    if args.format == "json":
        _emit_json(_curve_report(curve, attrs), args.output)
    return 0


def cmd_eval_vot_csv(args) -> int:
    """Evaluate a single track given ground truth and predictions as CSV files.

    The ground-truth file uses the prediction format; its confidence column
    is ignored and `absent` rows mark invisible frames.
    """
    gt_preds = eval_vot.load_predictions(args.gt)
    preds = eval_vot.load_predictions(args.preds)
    if len(gt_preds) != len(preds):
        raise dataset.DatasetError(
            f"gt has {len(gt_preds)} frames but predictions have {len(preds)}"
        )
    gt = [p.box for p in gt_preds]
    curve = eval_vot.sweep([preds], [gt], mode=args.mode)
    _emit_json(_curve_report(curve), args.output)
    return 0


def cmd_attributes(args) -> int:
    results, gts, flags, _ = _collect_vot_inputs(Path(args.root), Path(args.preds), _jobs(args))
    attrs = eval_vot.attribute_report(results, gts, flags, mode=args.mode)
    if args.format == "csv":
        path = args.output or "attributes.csv"
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["attribute", "tau", "pr", "re", "f"])
            for name, p in sorted(attrs.items()):
                writer.writerow([name, repr(p.tau), repr(p.pr), repr(p.re), repr(p.f)])
    else:
        report = {k: _point_dict(v) for k, v in sorted(attrs.items())}
        raw = {k: _point_dict(v, rounded=False) for k, v in sorted(attrs.items())}
        _emit_json({"attributes": report, "raw": {"attributes": raw}}, args.output)
    return 0


def cmd_eval_vos(args) -> int:
    root = Path(args.root)
    preds_root = Path(args.preds)
    per_j: Dict[str, List[float]] = {}
    per_f: Dict[str, List[float]] = {}
    for seq in _load_sequences(root, _jobs(args)):
        for target in seq.targets:
            track = f"{seq.id}_{target:02d}"
            js, fs = [], []
            for frame in seq.frames:
                ann = frame.annotations[target]
                if ann.mask is None:
                    continue
                pred_path = preds_root / seq.id / f"{frame.index:06d}_{target:02d}.png"
                if pred_path.exists():
                    pred = dataset._read_mask(pred_path)
                else:
                    pred = TargetMask(np.zeros(ann.mask.data.shape, dtype=bool))
                radius = args.radius
                if radius is None:
                    radius = eval_vos.default_tolerance_radius(ann.mask.width, ann.mask.height)
                js.append(eval_vos.region_similarity(pred, ann.mask))
                fs.append(eval_vos.contour_accuracy(pred, ann.mask, radius))
            if js:
                per_j[track] = js
                per_f[track] = fs
    agg = eval_vos.aggregate(per_j, per_f)
    report = {
        "J_M": _round4(agg.j_mean),
        "F_M": _round4(agg.f_mean),
        "JandF": _round4(agg.j_and_f),
        "per_track": {k: {"J": _round4(j), "F": _round4(f)} for k, (j, f) in agg.per_track.items()},
        "raw": {
            "J_M": agg.j_mean,
            "F_M": agg.f_mean,
            "JandF": agg.j_and_f,
            "per_track": {k: {"J": j, "F": f} for k, (j, f) in agg.per_track.items()},
        },
    }
    _emit_json(report, args.output)
    return 0


def cmd_synth(args) -> int:
    spec = dataset.SynthSpec.from_json(args.spec)
    record = dataset.synth_sequence(spec, args.out)
    print(f"wrote {spec.frames} frames to {args.out} (seed {spec.noise_seed})")
    print(f"ground truth: {Path(args.out) / 'groundtruth.json'}")
    return 0


def _parse_grid(text: str) -> BEVGridSpec:
    vals = [float(v) for v in text.split(",")]
    if len(vals) != 5:
        raise argparse.ArgumentTypeError("grid must be x_min,x_max,z_min,z_max,cell")
    return BEVGridSpec((vals[0], vals[1]), (vals[2], vals[3]), vals[4])


def _parse_depth_spec(text: str) -> bev.DepthDistributionSpec:
    vals = text.split(",")
    if len(vals) != 4:
        raise argparse.ArgumentTypeError("depth spec must be d_min,d_max,n_bins,sigma")
    sigma = None if vals[3] in ("", "auto") else float(vals[3])
    return bev.DepthDistributionSpec(float(vals[0]), float(vals[1]), int(vals[2]), sigma)


def _conv_from_json(layers: list) -> bev.ConvSpec:
    return bev.ConvSpec(
        tuple(
            bev.ConvLayer(
                np.array(layer["weight"], dtype=float),
                np.array(layer["bias"], dtype=float),
                layer.get("activation", "identity"),
            )
            for layer in layers
        )
    )


def cmd_bev_demo(args) -> int:
    feat = tensorio.read_tensor(args.feat).astype(np.float64)
    if feat.ndim != 3:
        raise dataset.DatasetError(f"feature tensor must be rank 3 (C,H,W), got {feat.ndim}")
    if args.depth.endswith(".bin"):
        depth = tensorio.read_tensor(args.depth).astype(np.float64)
    else:
        depth = dataset._read_depth(Path(args.depth)).astype(np.float64)
    with open(args.intrinsics) as f:
        k = json.load(f)
    K = CameraIntrinsics(k["fx"], k["fy"], k["cx"], k["cy"], k["width"], k["height"])

    grid = args.grid or BEVGridSpec()
    depth_spec = args.depth_spec or bev.DepthDistributionSpec()
    c = feat.shape[0]
    if args.weights:
        with open(args.weights) as f:
            w = json.load(f)
        modulate_conv = _conv_from_json(w["modulate"])
        fuse_conv = _conv_from_json(w["fuse"])
    else:
        print(f"seed: {args.seed}")
        modulate_conv = bev.random_conv_spec(args.seed, c, c)
        fuse_conv = bev.random_conv_spec(args.seed + 1, c + modulate_conv.out_channels, c)
    icv = bev.bev_transform(
        feat, depth, K, grid, depth_spec, modulate_conv, fuse_conv, reduce=args.reduce
    )
    tensorio.write_tensor(args.out, icv.astype(np.float32))
    print(f"wrote {args.out} shape {icv.shape}")
    return 0


def cmd_losses_check(args) -> int:
    print(f"seed: {args.seed}")
    reports = losses.standard_gradient_suite(args.seed, n_points=args.points, tol=args.tol)
    ok = True
    for name, max_err in sorted(reports.items()):
        passed = max_err < args.tol
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name}: max rel err {max_err:.3e}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rgbdkit", description="RGB-D tracking dataset toolkit and evaluators"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--output", "-o", help="report path (default: stdout)")
        p.add_argument("--format", choices=["json", "csv"], default="json")
        p.add_argument("--jobs", type=int, default=None, help="worker count (env RGBDKIT_JOBS)")

    p = sub.add_parser("validate", help="check a dataset root for violations")
    p.add_argument("root")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("eval-vot", help="long-term VOT Pr/Re/F sweep")
    p.add_argument("root")
    p.add_argument("preds", help="directory of <seq>_<target>.csv prediction files")
    p.add_argument("--mode", choices=["pooled", "per-track"], default="pooled")
    p.add_argument("--curve-csv", help="also dump curve points as CSV")
    common(p)
    p.set_defaults(func=cmd_eval_vot)

    p = sub.add_parser("eval-vot-csv", help="VOT sweep for one track from two CSV files")
    p.add_argument("gt", help="ground-truth CSV in the prediction format")
    p.add_argument("preds")
    p.add_argument("--mode", choices=["pooled", "per-track"], default="pooled")
    common(p)
    p.set_defaults(func=cmd_eval_vot_csv)

    p = sub.add_parser("eval-vos", help="VOS J/F/J&F over annotated keyframes")
    p.add_argument("root")
    p.add_argument("preds", help="directory of <seq>/<frame>_<target>.png masks")
    p.add_argument("--radius", type=float, default=None, help="contour tolerance radius")
    common(p)
    p.set_defaults(func=cmd_eval_vos)

    p = sub.add_parser("attributes", help="per-attribute F at the best global threshold")
    p.add_argument("root")
    p.add_argument("preds")
    p.add_argument("--mode", choices=["pooled", "per-track"], default="pooled")
    common(p)
    p.set_defaults(func=cmd_attributes)

    p = sub.add_parser("synth", help="generate a synthetic sequence")
    p.add_argument("spec", help="SynthSpec JSON file")
    p.add_argument("out", help="output sequence directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bev-demo", help="run the image-to-BEV fusion pipeline")
    p.add_argument("feat", help="feature map tensor container (C,H,W) f32")
    p.add_argument("depth", help="depth map: .tiff (32-bit float) or tensor container .bin")
    p.add_argument("intrinsics", help="JSON {fx,fy,cx,cy,width,height}")
    p.add_argument("--grid", type=_parse_grid, default=None, help="x_min,x_max,z_min,z_max,cell")
    p.add_argument("--depth-spec", type=_parse_depth_spec, default=None, help="d_min,d_max,n_bins,sigma")
    p.add_argument("--seed", type=int, default=0, help="seed for random conv weights")
    p.add_argument("--weights", help="explicit conv weights JSON (overrides --seed)")
    p.add_argument("--reduce", choices=["sum", "mean", "max"], default="sum")
    p.add_argument("--out", default="icv.bin", help="output tensor container")
    p.set_defaults(func=cmd_bev_demo)

    p = sub.add_parser("losses-check", help="finite-difference gradient verification")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--points", type=int, default=20)
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_losses_check)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0,) else 0
    try:
        return args.func(args)
    except (dataset.DatasetError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
