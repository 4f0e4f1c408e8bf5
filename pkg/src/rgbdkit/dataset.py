"""Read, validate, and synthesize on-disk RGB-D sequence directories.

Normative per-sequence layout (overridable via an optional manifest.json):

    rgb/%06d.jpg            color frames, JPEG
    depth/%06d.tiff         depth in meters, 32-bit float TIFF (0 = invalid)
    confidence/%06d.png     8-bit, values {0,1,2}
    camera.jsonl            one JSON object per frame:
                            {frame, fx, fy, cx, cy, width, height,
                             R: [9 floats row-major], t: [3 floats]}
    annotations.json        schema_version 1; per-target keyframe boxes,
                            mask file references, attribute flags
    masks/%06d_%02d.png     binary target masks, per keyframe per target

manifest.json may rename the streams (keys rgb_dir, depth_dir,
confidence_dir, masks_dir, camera_file, annotations_file) and declare scaled
confidence encodings via confidence_levels (e.g. [0, 128, 255]).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from PIL import Image

from .annotation import Keyframe, KeyframeTrack, interpolate_boxes
from .core import (
    AttributeFlags,
    BoundingBox,
    CameraIntrinsics,
    CameraPose,
    ConfidenceMap,
    DepthMap,
    RGBDFrame,
    Sequence,
    TargetAnnotation,
    TargetMask,
    mask_to_box,
)

SCHEMA_VERSION = 1

DEFAULT_MANIFEST = {
    "rgb_dir": "rgb",
    "depth_dir": "depth",
    "confidence_dir": "confidence",
    "masks_dir": "masks",
    "camera_file": "camera.jsonl",
    "annotations_file": "annotations.json",
    "confidence_levels": [0, 1, 2],
}


class DatasetError(Exception):
    pass


def _manifest_for(seq_dir: Path) -> dict:
    manifest = dict(DEFAULT_MANIFEST)
    mf = seq_dir / "manifest.json"
    if mf.exists():
        with open(mf) as f:
            overrides = json.load(f)
        unknown = set(overrides) - set(DEFAULT_MANIFEST)
        if unknown:
            raise DatasetError(f"{mf}: unknown manifest keys {sorted(unknown)}")
        manifest.update(overrides)
    return manifest


def _read_depth(path: Path) -> np.ndarray:
    img = Image.open(path)
    if img.mode != "F":
        raise DatasetError(f"{path}: depth TIFF must be 32-bit float, got mode {img.mode!r}")
    return np.asarray(img, dtype=np.float32)


def _write_depth(path: Path, values: np.ndarray):
    Image.fromarray(np.asarray(values, dtype=np.float32), mode="F").save(path, format="TIFF")


def _read_mask(path: Path) -> TargetMask:
    arr = np.asarray(Image.open(path).convert("L"))
    return TargetMask(arr > 127)


def _confidence_from_file(path: Path, levels: List[int]) -> ConfidenceMap:
    arr = np.asarray(Image.open(path))
    if levels != [0, 1, 2]:
        mapped = np.full(arr.shape, 255, dtype=np.int16)
        for level, raw in enumerate(levels):
            mapped[arr == raw] = level
        if (mapped == 255).any():
            bad = np.unique(arr[mapped == 255])
            raise DatasetError(f"{path}: confidence values {bad.tolist()} not in manifest levels")
        arr = mapped
    try:
        return ConfidenceMap(arr)
    except ValueError as e:
        raise DatasetError(f"{path}: {e}") from None


def _load_camera(path: Path) -> List[dict]:
    records = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise DatasetError(f"{path}:{lineno}: bad JSON ({e})") from None
    return records


def _frame_files(stream_dir: Path, suffix: str) -> List[Path]:
    return sorted(stream_dir.glob(f"*{suffix}"))


def load_sequence(path) -> Sequence:
    """Load one sequence directory into an in-memory Sequence."""
    seq_dir = Path(path)
    if not seq_dir.is_dir():
        raise DatasetError(f"{seq_dir}: not a directory")
    manifest = _manifest_for(seq_dir)

    streams = {
        "rgb": seq_dir / manifest["rgb_dir"],
        "depth": seq_dir / manifest["depth_dir"],
        "confidence": seq_dir / manifest["confidence_dir"],
    }
    for name, d in streams.items():
        if not d.is_dir():
            raise DatasetError(f"missing stream: {name}")
    camera_path = seq_dir / manifest["camera_file"]
    if not camera_path.exists():
        raise DatasetError("missing stream: camera")
    ann_path = seq_dir / manifest["annotations_file"]
    if not ann_path.exists():
        raise DatasetError("missing stream: annotations")

    rgb_files = _frame_files(streams["rgb"], ".jpg")
    depth_files = _frame_files(streams["depth"], ".tiff")
    conf_files = _frame_files(streams["confidence"], ".png")
    camera = _load_camera(camera_path)
    counts = {
        "rgb": len(rgb_files),
        "depth": len(depth_files),
        "confidence": len(conf_files),
        "camera": len(camera),
    }
    if len(set(counts.values())) != 1:
        raise DatasetError(f"frame count mismatch across streams: {counts}")
    n = counts["rgb"]
    if n == 0:
        raise DatasetError("sequence has no frames")

    with open(ann_path) as f:
        ann = json.load(f)
    if ann.get("schema_version") != SCHEMA_VERSION:
        raise DatasetError(f"unsupported annotations schema_version: {ann.get('schema_version')}")

    indices = [rec["frame"] for rec in camera]
    if any(b <= a for a, b in zip(indices, indices[1:])):
        raise DatasetError("camera.jsonl frame indices are not strictly increasing")

    targets, per_frame = _materialize_annotations(seq_dir, ann, indices)

    frames = []
    for pos, rec in enumerate(camera):
        depth = DepthMap(_read_depth(depth_files[pos]))
        confidence = _confidence_from_file(conf_files[pos], manifest["confidence_levels"])
        rgb = np.asarray(Image.open(rgb_files[pos]).convert("RGB"))
        intrinsics = CameraIntrinsics(
            rec["fx"], rec["fy"], rec["cx"], rec["cy"], rec["width"], rec["height"]
        )
        try:
            pose = CameraPose(np.array(rec["R"]).reshape(3, 3), np.array(rec["t"]))
        except ValueError as e:
            raise DatasetError(f"frame {rec['frame']}: {e}") from None
        frames.append(
            RGBDFrame(
                index=rec["frame"],
                rgb=rgb,
                depth=depth,
                confidence=confidence,
                intrinsics=intrinsics,
                pose=pose,
                annotations=per_frame[pos],
            )
        )
    return Sequence(id=seq_dir.name, frames=tuple(frames), targets=tuple(targets))


def _materialize_annotations(
    seq_dir: Path, ann: dict, indices: List[int]
) -> Tuple[List[int], List[Dict[int, TargetAnnotation]]]:
    """Expand keyframe annotations to all frames via linear interpolation."""
    targets = []
    per_frame: List[Dict[int, TargetAnnotation]] = [dict() for _ in indices]
    pos_of = {idx: pos for pos, idx in enumerate(indices)}
    for t in ann.get("targets", []):
        tid = t["id"]
        targets.append(tid)
        kfs = []
        masks: Dict[int, TargetMask] = {}
        for kf in t["keyframes"]:
            box = None if kf.get("box") is None else BoundingBox(*kf["box"])
            kfs.append(Keyframe(kf["frame"], box))
            if kf.get("mask"):
                mask_path = seq_dir / kf["mask"]
                if not mask_path.exists():
                    raise DatasetError(f"missing mask file: {kf['mask']}")
                masks[kf["frame"]] = _read_mask(mask_path)
        track = KeyframeTrack(tuple(kfs))
        boxes = interpolate_boxes(track, indices)
        attr_by_frame = {
            a["frame"]: AttributeFlags.from_dict(a["flags"]) for a in t.get("attributes", [])
        }
        keyframe_set = set(track.frames)
        for idx in indices:
            per_frame[pos_of[idx]][tid] = TargetAnnotation(
                box=boxes[idx],
                mask=masks.get(idx),
                attributes=attr_by_frame.get(idx),
                is_keyframe=idx in keyframe_set,
            )
    return targets, per_frame


@dataclass(frozen=True)
class Violation:
    sequence: str
    kind: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    sequences: Tuple[str, ...]
    violations: Tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def counts(self) -> Dict[str, int]:
        out: Dict[str, int] = {}
        for v in self.violations:
            out[v.kind] = out.get(v.kind, 0) + 1
        return out


def validate_dataset(root) -> ValidationReport:
    """Check every sequence under root; collects violations, never aborts early."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"{root}: not a readable directory")
    seq_dirs = sorted(
        d for d in root.iterdir() if d.is_dir() and (d / "camera.jsonl").exists()
        or d.is_dir() and (d / "annotations.json").exists()
    )
    violations: List[Violation] = []
    for seq_dir in seq_dirs:
        violations.extend(_validate_sequence(seq_dir))
    return ValidationReport(tuple(d.name for d in seq_dirs), tuple(violations))


def _validate_sequence(seq_dir: Path) -> List[Violation]:
    name = seq_dir.name
    out: List[Violation] = []

    def bad(kind, detail):
        out.append(Violation(name, kind, detail))

    try:
        manifest = _manifest_for(seq_dir)
    except DatasetError as e:
        bad("manifest", str(e))
        return out

    counts = {}
    for stream, key, suffix in (
        ("rgb", "rgb_dir", ".jpg"),
        ("depth", "depth_dir", ".tiff"),
        ("confidence", "confidence_dir", ".png"),
    ):
        d = seq_dir / manifest[key]
        if not d.is_dir():
            bad("missing_stream", f"missing stream: {stream}")
        else:
            counts[stream] = len(_frame_files(d, suffix))

    camera_path = seq_dir / manifest["camera_file"]
    camera = []
    if not camera_path.exists():
        bad("missing_stream", "missing stream: camera")
    else:
        try:
            camera = _load_camera(camera_path)
            counts["camera"] = len(camera)
        except DatasetError as e:
            bad("camera", str(e))

    if counts and len(set(counts.values())) > 1:
        bad("count_mismatch", f"frame count mismatch across streams: {counts}")

    indices = [rec.get("frame") for rec in camera]
    if any(b <= a for a, b in zip(indices, indices[1:])):
        bad("frame_order", "camera.jsonl frame indices are not strictly increasing")
    for rec in camera:
        try:
            CameraPose(np.array(rec["R"]).reshape(3, 3), np.array(rec["t"]))
        except (ValueError, KeyError) as e:
            bad("pose", f"frame {rec.get('frame')}: {e}")

    depth_dir = seq_dir / manifest["depth_dir"]
    if depth_dir.is_dir():
        for p in _frame_files(depth_dir, ".tiff"):
            try:
                _read_depth(p)
            except (DatasetError, OSError) as e:
                bad("depth", str(e))

    conf_dir = seq_dir / manifest["confidence_dir"]
    if conf_dir.is_dir():
        for p in _frame_files(conf_dir, ".png"):
            try:
                _confidence_from_file(p, manifest["confidence_levels"])
            except (DatasetError, OSError) as e:
                bad("confidence", str(e))

    ann_path = seq_dir / manifest["annotations_file"]
    if not ann_path.exists():
        bad("missing_stream", "missing stream: annotations")
        return out
    try:
        with open(ann_path) as f:
            ann = json.load(f)
    except (json.JSONDecodeError, OSError) as e:
        bad("annotations", f"{ann_path}: {e}")
        return out
    if ann.get("schema_version") != SCHEMA_VERSION:
        bad("annotations", f"unsupported schema_version: {ann.get('schema_version')}")
    for t in ann.get("targets", []):
        kf_frames = [kf["frame"] for kf in t.get("keyframes", [])]
        if any(b <= a for a, b in zip(kf_frames, kf_frames[1:])):
            bad("annotations", f"target {t.get('id')}: keyframe indices not increasing")
        for kf in t.get("keyframes", []):
            ref = kf.get("mask")
            if not ref:
                continue
            mask_path = seq_dir / ref
            if not mask_path.exists():
                bad("missing_mask", f"missing mask file: {ref}")
                continue
            try:
                _read_mask(mask_path)
            except OSError:
                bad("bad_mask", f"unreadable mask file: {ref}")
    return out


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of a synthetic sequence with analytically known ground truth."""

    frames: int = 10
    rgb_size: Tuple[int, int] = (64, 48)  # (width, height)
    depth_size: Tuple[int, int] = (32, 24)
    start_box: Tuple[int, int, int, int] = (4, 4, 12, 10)  # rgb pixel coords
    velocity: Tuple[float, float] = (2.0, 1.0)  # rgb pixels per frame
    absent_frames: Tuple[int, ...] = ()
    keyframe_stride: int = 3
    depth_model: str = "planar"  # or "ramp"
    background_depth: float = 4.0
    target_depth: float = 2.0
    noise_seed: int = 0

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError("need at least one frame")
        if self.depth_model not in ("planar", "ramp"):
            raise ValueError(f"unknown depth model {self.depth_model!r}")
        if self.keyframe_stride < 1:
            raise ValueError("keyframe stride must be >= 1")

    @classmethod
    def from_json(cls, path) -> "SynthSpec":
        with open(path) as f:
            d = json.load(f)
        for key in ("rgb_size", "depth_size", "start_box", "velocity", "absent_frames"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    def box_at(self, t: int) -> Optional[BoundingBox]:
        """Analytic target box at frame t, snapped to the pixel raster."""
        if t in self.absent_frames:
            return None
        x0, y0, w, h = self.start_box
        x = int(round(x0 + self.velocity[0] * t))
        y = int(round(y0 + self.velocity[1] * t))
        rw, rh = self.rgb_size
        x = max(0, min(x, rw - w))
        y = max(0, min(y, rh - h))
        return BoundingBox(x, y, w, h)

    def keyframe_indices(self) -> List[int]:
        idx = list(range(0, self.frames, self.keyframe_stride))
        if idx[-1] != self.frames - 1:
            idx.append(self.frames - 1)
        return idx


def _json_box(box: Optional[BoundingBox]):
    return None if box is None else list(box.as_tuple())


def synth_sequence(spec: SynthSpec, out_dir) -> dict:
    """Write a synthetic sequence directory; returns the ground-truth record.

    Deterministic for a fixed spec (noise_seed included). The record, also
    written to groundtruth.json, holds exact per-frame boxes so evaluators can
    be tested against known answers.
    """
    seq_dir = Path(out_dir)
    rng = np.random.default_rng(spec.noise_seed)
    for sub in ("rgb", "depth", "confidence", "masks"):
        (seq_dir / sub).mkdir(parents=True, exist_ok=True)

    rw, rh = spec.rgb_size
    dw, dh = spec.depth_size
    fx = fy = float(dw)
    cx, cy = dw / 2.0, dh / 2.0

    keyframes = spec.keyframe_indices()
    kf_track = KeyframeTrack(tuple(Keyframe(t, spec.box_at(t)) for t in keyframes))
    boxes = interpolate_boxes(kf_track, range(spec.frames))

    camera_lines = []
    for t in range(spec.frames):
        box = spec.box_at(t)

        rgb = np.full((rh, rw, 3), 40, dtype=np.uint8)
        if box is not None:
            rgb[int(box.y) : int(box.y2), int(box.x) : int(box.x2)] = (200, 80, 80)
        Image.fromarray(rgb).save(seq_dir / "rgb" / f"{t:06d}.jpg", quality=95)

        if spec.depth_model == "planar":
            depth = np.full((dh, dw), spec.background_depth, dtype=np.float32)
        else:
            ramp = np.linspace(1.0, spec.background_depth, dh, dtype=np.float32)
            depth = np.repeat(ramp[:, None], dw, axis=1)
        if box is not None:
            sx, sy = dw / rw, dh / rh
            x0, y0 = int(box.x * sx), int(box.y * sy)
            x1, y1 = max(x0 + 1, int(math.ceil(box.x2 * sx))), max(y0 + 1, int(math.ceil(box.y2 * sy)))
            depth[y0:y1, x0:x1] = spec.target_depth
        _write_depth(seq_dir / "depth" / f"{t:06d}.tiff", depth)

        conf = np.full((dh, dw), 2, dtype=np.uint8)
        noisy = rng.random((dh, dw))
        conf[noisy < 0.05] = 1
        conf[noisy < 0.01] = 0
        Image.fromarray(conf, mode="L").save(seq_dir / "confidence" / f"{t:06d}.png")

        camera_lines.append(
            {
                "frame": t,
                "fx": fx,
                "fy": fy,
                "cx": cx,
                "cy": cy,
                "width": dw,
                "height": dh,
                "R": [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
                "t": [0.01 * t, 0.0, 0.0],
            }
        )

    with open(seq_dir / "camera.jsonl", "w") as f:
        for rec in camera_lines:
            f.write(json.dumps(rec, sort_keys=True) + "\n")

    kf_records = []
    for t in keyframes:
        box = spec.box_at(t)
        mask_ref = None
        if box is not None:
            mask = np.zeros((rh, rw), dtype=np.uint8)
            mask[int(box.y) : int(box.y2), int(box.x) : int(box.x2)] = 255
            mask_ref = f"masks/{t:06d}_00.png"
            Image.fromarray(mask, mode="L").save(seq_dir / mask_ref)
        kf_records.append({"frame": t, "box": _json_box(box), "mask": mask_ref})

    annotations = {
        "schema_version": SCHEMA_VERSION,
        "targets": [{"id": 0, "keyframes": kf_records, "attributes": []}],
    }
    with open(seq_dir / "annotations.json", "w") as f:
        json.dump(annotations, f, sort_keys=True, indent=2)
        f.write("\n")

    record = {
        "spec": asdict(spec),
        "targets": [
            {
                "id": 0,
                "boxes": [_json_box(boxes[t]) for t in range(spec.frames)],
                "keyframes": keyframes,
            }
        ],
    }
    with open(seq_dir / "groundtruth.json", "w") as f:
        json.dump(record, f, sort_keys=True, indent=2)
        f.write("\n")
    return record


def ground_truth_boxes(seq: Sequence, target: int) -> List[Optional[BoundingBox]]:
    """Per-frame optional boxes of one target, aligned to seq.frames."""
    return [f.annotations[target].box for f in seq.frames]


def track_ids(seq: Sequence) -> List[str]:
    return [f"{seq.id}_{t:02d}" for t in seq.targets]
