/**
 * Bindings for the rgbdkit evaluation and BEV fusion pipelines.
 *
 * Everything goes through the documented external interfaces: prediction
 * CSV files, the binary tensor container, and the CLI's JSON reports. No
 * state persists between calls; each call runs in its own temp directory.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { decodeTensor, encodeTensor, type Tensor } from "./container.js";

export { decodeTensor, encodeTensor, type DType, type Tensor } from "./container.js";

export const VERSION = "0.1.0";

export interface Box {
  x: number;
  y: number;
  w: number;
  h: number;
}

/** One tracker output frame: a box or target-absent, plus confidence. */
export interface TrackPrediction {
  box: Box | null;
  confidence: number;
}

export interface PRPoint {
  tau: number;
  pr: number;
  re: number;
  f: number;
}

export interface VotReport {
  best: PRPoint;
  curve: PRPoint[];
}

export interface CameraIntrinsics {
  fx: number;
  fy: number;
  cx: number;
  cy: number;
  width: number;
  height: number;
}

export interface ConvLayer {
  weight: number[][][][]; // (out, in, kh, kw)
  bias: number[];
  activation?: "identity" | "relu";
}

export interface BevOptions {
  /** "x_min,x_max,z_min,z_max,cell" quintuple; CLI default when omitted. */
  grid?: [number, number, number, number, number];
  /** "d_min,d_max,n_bins,sigma" with sigma null for one bin width. */
  depthSpec?: [number, number, number, number | null];
  seed?: number;
  weights?: { modulate: ConvLayer[]; fuse: ConvLayer[] };
  reduce?: "sum" | "mean" | "max";
}

/** Long-term protocol F-score; 0 when both precision and recall vanish. */
export function fScore(pr: number, re: number): number {
  if (pr + re === 0) return 0;
  return (2 * pr * re) / (pr + re);
}

function predictionRow(pred: TrackPrediction): string {
  if (pred.box === null) return `absent,${pred.confidence}`;
  const { x, y, w, h } = pred.box;
  return `${x},${y},${w},${h},${pred.confidence}`;
}

/** Serialize predictions to the CSV interchange format, one row per frame. */
export function predictionsToCsv(preds: TrackPrediction[]): string {
  return preds.map(predictionRow).join("\n") + "\n";
}

function runCli(args: string[]): string {
  const proc = spawnSync("python3", ["-m", "rgbdkit.cli", ...args], {
    encoding: "utf-8",
    maxBuffer: 256 * 1024 * 1024,
  });
  if (proc.error) throw proc.error;
  if (proc.status !== 0) {
    throw new Error(`rgbdkit ${args[0]} failed (exit ${proc.status}): ${proc.stderr}`);
  }
  return proc.stdout;
}

function withTempDir<T>(fn: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "rgbdkit-"));
  try {
    return fn(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

/**
 * Evaluate one track under the long-term VOT protocol.
 *
 * Ground truth is a per-frame box or null (target absent). Returns the
 * full-precision threshold sweep as computed by the core evaluator.
 */
export function evalVotBind(
  predictions: TrackPrediction[],
  groundTruth: (Box | null)[],
  mode: "pooled" | "per-track" = "pooled",
): VotReport {
  if (predictions.length !== groundTruth.length) {
    throw new Error(
      `predictions (${predictions.length}) and ground truth (${groundTruth.length}) differ in length`,
    );
  }
  return withTempDir((dir) => {
    const gtRows: TrackPrediction[] = groundTruth.map((box) => ({
      box,
      confidence: box === null ? 0 : 1,
    }));
    const gtPath = join(dir, "gt.csv");
    const predPath = join(dir, "pred.csv");
    const outPath = join(dir, "report.json");
    writeFileSync(gtPath, predictionsToCsv(gtRows));
    writeFileSync(predPath, predictionsToCsv(predictions));
    runCli(["eval-vot-csv", gtPath, predPath, "--mode", mode, "-o", outPath]);
    const report = JSON.parse(readFileSync(outPath, "utf-8"));
    return { best: report.raw.best, curve: report.raw.curve };
  });
}

/**
 * Run the image-to-BEV fusion pipeline on a (C, H, W) feature tensor and an
 * (H', W') depth map. Returns the fused (C, H, W) feature tensor.
 */
export function bevTransformBind(
  feat: Tensor,
  depth: Tensor,
  intrinsics: CameraIntrinsics,
  options: BevOptions = {},
): Tensor {
  if (feat.shape.length !== 3) {
    throw new Error(`feature tensor must be rank 3 (C,H,W), got rank ${feat.shape.length}`);
  }
  if (depth.shape.length !== 2) {
    throw new Error(`depth tensor must be rank 2 (H,W), got rank ${depth.shape.length}`);
  }
  return withTempDir((dir) => {
    const featPath = join(dir, "feat.bin");
    const depthPath = join(dir, "depth.bin");
    const kPath = join(dir, "K.json");
    const outPath = join(dir, "icv.bin");
    writeFileSync(featPath, encodeTensor(feat));
    writeFileSync(depthPath, encodeTensor(depth));
    writeFileSync(kPath, JSON.stringify(intrinsics));
    const args = ["bev-demo", featPath, depthPath, kPath, "--out", outPath];
    if (options.grid) args.push("--grid", options.grid.join(","));
    if (options.depthSpec) {
      const [dMin, dMax, nBins, sigma] = options.depthSpec;
      args.push("--depth-spec", `${dMin},${dMax},${nBins},${sigma ?? "auto"}`);
    }
    if (options.weights) {
      const wPath = join(dir, "weights.json");
      writeFileSync(wPath, JSON.stringify(options.weights));
      args.push("--weights", wPath);
    } else {
      args.push("--seed", String(options.seed ?? 0));
    }
    if (options.reduce) args.push("--reduce", options.reduce);
    runCli(args);
    return decodeTensor(readFileSync(outPath));
  });
}
