import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterAll, describe, expect, it } from "vitest";

import {
  bevTransformBind,
  decodeTensor,
  encodeTensor,
  evalVotBind,
  fScore,
  predictionsToCsv,
  type Box,
  type Tensor,
  type TrackPrediction,
} from "../src/index.js";

const tempDirs: string[] = [];

function tempDir(): string {
  const dir = mkdtempSync(join(tmpdir(), "rgbdkit-test-"));
  tempDirs.push(dir);
  return dir;
}

afterAll(() => {
  for (const dir of tempDirs) rmSync(dir, { recursive: true, force: true });
});

function python(code: string): string {
  const proc = spawnSync("python3", ["-c", code], { encoding: "utf-8" });
  if (proc.status !== 0) throw new Error(proc.stderr);
  return proc.stdout;
}

/** Deterministic pseudo-random floats so fixtures are stable across runs. */
function seededFloats(n: number, seed: number): Float32Array {
  const out = new Float32Array(n);
  let state = seed >>> 0;
  for (let i = 0; i < n; i++) {
    state = (state * 1664525 + 1013904223) >>> 0;
    out[i] = state / 0xffffffff;
  }
  return out;
}

const GT10: Box = { x: 0, y: 0, w: 10, h: 10 };

describe("fScore", () => {
  it("is 1 for a perfect tracker and 0 at the degenerate point", () => {
    expect(fScore(1, 1)).toBe(1);
    expect(fScore(0, 0)).toBe(0);
  });

  it("reproduces published precision/recall rows within 1e-3", () => {
    const rows: [number, number, number][] = [
      [0.488, 0.469, 0.478],
      [0.495, 0.413, 0.45],
      [0.44, 0.44, 0.44],
      [0.743, 0.769, 0.755],
      [0.389, 0.292, 0.334],
    ];
    for (const [pr, re, f] of rows) {
      expect(Math.abs(fScore(pr, re) - f)).toBeLessThanOrEqual(1e-3);
    }
  });

  it("matches the core evaluator on the two-frame fixture", () => {
    // confidences [0.9, 0.4], IoUs [0.8, 0.6]: at tau=0.9, Pr=0.8, Re=0.4
    const preds: TrackPrediction[] = [
      { box: { x: 0, y: 0, w: 10, h: 8 }, confidence: 0.9 },
      { box: { x: 0, y: 0, w: 10, h: 6 }, confidence: 0.4 },
    ];
    const report = evalVotBind(preds, [GT10, GT10]);
    const at09 = report.curve.find((p) => p.tau === 0.9)!;
    expect(at09.pr).toBeCloseTo(0.8, 12);
    expect(at09.re).toBeCloseTo(0.4, 12);
    expect(at09.f).toBeCloseTo(fScore(0.8, 0.4), 12);
  });
});

describe("tensor container", () => {
  it("round trips float32 tensors", () => {
    const t: Tensor = { dtype: "float32", shape: [2, 3], data: seededFloats(6, 1) };
    const back = decodeTensor(encodeTensor(t));
    expect(back.dtype).toBe("float32");
    expect(back.shape).toEqual([2, 3]);
    expect(Array.from(back.data)).toEqual(Array.from(t.data));
  });

  it("round trips uint8 tensors", () => {
    const t: Tensor = { dtype: "uint8", shape: [4], data: new Uint8Array([0, 7, 255, 42]) };
    const back = decodeTensor(encodeTensor(t));
    expect(back.dtype).toBe("uint8");
    expect(Array.from(back.data)).toEqual([0, 7, 255, 42]);
  });

  it("is byte-compatible with the core writer", () => {
    const dir = tempDir();
    const path = join(dir, "t.bin");
    python(
      `import numpy as np; from rgbdkit import tensorio; ` +
        `tensorio.write_tensor(${JSON.stringify(path)}, ` +
        `np.arange(6, dtype=np.float32).reshape(2, 3))`,
    );
    const t = decodeTensor(readFileSync(path));
    expect(t.shape).toEqual([2, 3]);
    expect(Array.from(t.data)).toEqual([0, 1, 2, 3, 4, 5]);

    const ours = join(dir, "u.bin");
    writeFileSync(ours, encodeTensor(t));
    const echoed = python(
      `from rgbdkit import tensorio; ` +
        `print(tensorio.read_tensor(${JSON.stringify(ours)}).tolist())`,
    );
    expect(echoed.trim()).toBe("[[0.0, 1.0, 2.0], [3.0, 4.0, 5.0]]");
  });

  it("rejects malformed buffers", () => {
    expect(() => decodeTensor(Buffer.from("XXXX\x01\x00\x00"))).toThrow(/magic/);
  });
});

describe("evalVotBind", () => {
  it("scores a perfect tracker at 1/1/1", () => {
    const gt: (Box | null)[] = [GT10, null, GT10];
    const preds: TrackPrediction[] = [
      { box: GT10, confidence: 1 },
      { box: null, confidence: 0 },
      { box: GT10, confidence: 1 },
    ];
    const report = evalVotBind(preds, gt);
    expect(report.best.pr).toBe(1);
    expect(report.best.re).toBe(1);
    expect(report.best.f).toBe(1);
  });

  it("selects the best threshold over the sweep", () => {
    const preds: TrackPrediction[] = [
      { box: { x: 0, y: 0, w: 10, h: 9 }, confidence: 0.8 },
      { box: { x: 50, y: 50, w: 10, h: 10 }, confidence: 0.2 },
      { box: { x: 0, y: 0, w: 10, h: 8 }, confidence: 0.7 },
    ];
    const report = evalVotBind(preds, [GT10, GT10, GT10]);
    for (const p of report.curve) {
      expect(report.best.f).toBeGreaterThanOrEqual(p.f);
    }
    expect(report.best.tau).toBe(0.7); // dropping the stray box wins
  });

  it("matches the CLI byte-for-byte on a shared fixture", () => {
    const preds: TrackPrediction[] = [
      { box: { x: 1, y: 1, w: 9, h: 9 }, confidence: 0.6 },
      { box: null, confidence: 0.1 },
      { box: { x: 0, y: 0, w: 10, h: 5 }, confidence: 0.9 },
    ];
    const gt: (Box | null)[] = [GT10, null, GT10];
    const fromBinding = evalVotBind(preds, gt);

    const dir = tempDir();
    const gtPath = join(dir, "gt.csv");
    const predPath = join(dir, "pred.csv");
    writeFileSync(
      gtPath,
      predictionsToCsv(gt.map((box) => ({ box, confidence: box === null ? 0 : 1 }))),
    );
    writeFileSync(predPath, predictionsToCsv(preds));
    const proc = spawnSync(
      "python3",
      ["-m", "rgbdkit.cli", "eval-vot-csv", gtPath, predPath],
      { encoding: "utf-8" },
    );
    expect(proc.status).toBe(0);
    const fromCli = JSON.parse(proc.stdout).raw;
    expect(fromBinding.best).toEqual(fromCli.best);
    expect(fromBinding.curve).toEqual(fromCli.curve);
  });

  it("rejects mismatched lengths", () => {
    expect(() => evalVotBind([{ box: GT10, confidence: 1 }], [GT10, GT10])).toThrow(/length/);
  });
});

describe("bevTransformBind", () => {
  const K = { fx: 8, fy: 8, cx: 4, cy: 4, width: 8, height: 8 };

  function identityWeights(channels: number) {
    // modulate: 1x1 identity; fuse: select the image half of [image; bev]
    const eye = (n: number, m: number) =>
      Array.from({ length: n }, (_, o) =>
        Array.from({ length: m }, (_, i) => [[o === i ? 1 : 0]]),
      );
    return {
      modulate: [{ weight: eye(channels, channels), bias: new Array(channels).fill(0) }],
      fuse: [{ weight: eye(channels, 2 * channels), bias: new Array(channels).fill(0) }],
    };
  }

  it("returns the input feature when the BEV branch contributes zero", () => {
    const feat: Tensor = { dtype: "float32", shape: [2, 8, 8], data: seededFloats(128, 3) };
    // depth beyond the grid's far edge: every pixel back-projects to zeros
    const depth: Tensor = {
      dtype: "float32",
      shape: [8, 8],
      data: new Float32Array(64).fill(20),
    };
    const out = bevTransformBind(feat, depth, K, { weights: identityWeights(2) });
    expect(out.shape).toEqual([2, 8, 8]);
    for (let i = 0; i < out.data.length; i++) {
      expect(Math.abs((out.data[i] as number) - (feat.data[i] as number))).toBeLessThanOrEqual(
        1e-6,
      );
    }
  });

  it("matches the core CLI output on a seeded random case", () => {
    const feat: Tensor = { dtype: "float32", shape: [3, 8, 8], data: seededFloats(192, 5) };
    const depthData = seededFloats(64, 7).map((v) => 0.5 + 7 * v);
    const depth: Tensor = { dtype: "float32", shape: [8, 8], data: new Float32Array(depthData) };
    const fromBinding = bevTransformBind(feat, depth, K, { seed: 11 });

    const dir = tempDir();
    writeFileSync(join(dir, "f.bin"), encodeTensor(feat));
    writeFileSync(join(dir, "d.bin"), encodeTensor(depth));
    writeFileSync(join(dir, "K.json"), JSON.stringify(K));
    const proc = spawnSync(
      "python3",
      [
        "-m", "rgbdkit.cli", "bev-demo",
        join(dir, "f.bin"), join(dir, "d.bin"), join(dir, "K.json"),
        "--seed", "11", "--out", join(dir, "o.bin"),
      ],
      { encoding: "utf-8" },
    );
    expect(proc.status).toBe(0);
    const fromCli = decodeTensor(readFileSync(join(dir, "o.bin")));
    expect(fromBinding.shape).toEqual(fromCli.shape);
    for (let i = 0; i < fromCli.data.length; i++) {
      expect(
        Math.abs((fromBinding.data[i] as number) - (fromCli.data[i] as number)),
      ).toBeLessThanOrEqual(1e-6);
    }
  });

  it("rejects tensors of the wrong rank", () => {
    const flat: Tensor = { dtype: "float32", shape: [4], data: seededFloats(4, 1) };
    const depth: Tensor = { dtype: "float32", shape: [2, 2], data: seededFloats(4, 2) };
    expect(() => bevTransformBind(flat, depth, K)).toThrow(/rank 3/);
    const feat: Tensor = { dtype: "float32", shape: [1, 2, 2], data: seededFloats(4, 3) };
    expect(() => bevTransformBind(feat, flat, K)).toThrow(/rank 2/);
  });
});
