import { spawnSync, SpawnSyncReturns } from "child_process";
import { mkdtempSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import { join, resolve } from "path";
import { PNG } from "pngjs";

export const ROOT = resolve(__dirname, "..");
export const ADAPTER_BIN = join(ROOT, "bin", "adapter.js");
export const DETECTOR_BASED = join(ROOT, "checkpoints", "detector_based.onnx");
export const DETECTOR_FREE = join(ROOT, "checkpoints", "detector_free.onnx");

export function tempDir(prefix: string): string {
  return mkdtempSync(join(tmpdir(), prefix));
}

/**
 * Deterministic grayscale texture: white noise from a linear congruential
 * generator, box-blurred twice so the blob structure gives a
 * difference-of-Gaussians detector plenty of local maxima.
 */
export function texture(width: number, height: number, seed: number): Uint8Array {
  let state = (seed >>> 0) || 1;
  const next = () => {
    state = (Math.imul(state, 1664525) + 1013904223) >>> 0;
    return state >>> 24;
  };
  let plane = new Float64Array(width * height);
  for (let i = 0; i < plane.length; i++) {
    plane[i] = next();
  }
  for (let pass = 0; pass < 2; pass++) {
    const blurred = new Float64Array(width * height);
    for (let y = 0; y < height; y++) {
      for (let x = 0; x < width; x++) {
        let sum = 0;
        let count = 0;
        for (let dy = -1; dy <= 1; dy++) {
          for (let dx = -1; dx <= 1; dx++) {
            const yy = y + dy;
            const xx = x + dx;
            if (yy >= 0 && yy < height && xx >= 0 && xx < width) {
              sum += plane[yy * width + xx];
              count++;
            }
          }
        }
        blurred[y * width + x] = sum / count;
      }
    }
    plane = blurred;
  }
  const out = new Uint8Array(width * height);
  for (let i = 0; i < out.length; i++) {
    out[i] = Math.round(plane[i]);
  }
  return out;
}

/** Write a grayscale texture as an RGB PNG and return its path. */
export function writeTexturePng(
  dir: string,
  name: string,
  width: number,
  height: number,
  seed: number,
): string {
  const gray = texture(width, height, seed);
  const png = new PNG({ width, height });
  for (let i = 0; i < gray.length; i++) {
    const o = i * 4;
    png.data[o] = gray[i];
    png.data[o + 1] = gray[i];
    png.data[o + 2] = gray[i];
    png.data[o + 3] = 255;
  }
  const path = join(dir, name);
  writeFileSync(path, PNG.sync.write(png, { colorType: 2 }));
  return path;
}

/** Run the adapter CLI in a child process with a scrubbed environment. */
export function runAdapter(
  args: string[],
  env: Record<string, string> = {},
): SpawnSyncReturns<string> {
  const childEnv = { ...process.env, ...env };
  delete childEnv.ADAPTER_CHECKPOINT;
  for (const [key, value] of Object.entries(env)) {
    childEnv[key] = value;
  }
  return spawnSync("node", [ADAPTER_BIN, ...args], {
    encoding: "utf-8",
    env: childEnv,
  });
}

/** Run a python3 snippet (used to check the primary package's contract). */
export function runPython(code: string): SpawnSyncReturns<string> {
  return spawnSync("python3", ["-c", code], { encoding: "utf-8" });
}

export interface CsvRow {
  xSrc: number;
  ySrc: number;
  xDst: number;
  yDst: number;
  provenance: string;
}

export function parseCsv(text: string): CsvRow[] {
  const lines = text.trim().split("\n");
  if (lines[0] !== "x_src,y_src,x_dst,y_dst,provenance") {
    throw new Error(`unexpected header: ${lines[0]}`);
  }
  return lines.slice(1).map((line) => {
    const [xs, ys, xd, yd, provenance] = line.split(",");
    return {
      xSrc: Number(xs),
      ySrc: Number(ys),
      xDst: Number(xd),
      yDst: Number(yd),
      provenance,
    };
  });
}

export function median(values: number[]): number {
  const sorted = [...values].sort((a, b) => a - b);
  const mid = Math.floor(sorted.length / 2);
  return sorted.length % 2
    ? sorted[mid]
    : (sorted[mid - 1] + sorted[mid]) / 2;
}

export function displacements(rows: CsvRow[]): number[] {
  return rows.map((r) => Math.hypot(r.xDst - r.xSrc, r.yDst - r.ySrc));
}
