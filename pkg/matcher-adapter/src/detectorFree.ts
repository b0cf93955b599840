import * as ort from "onnxruntime-node";

import { GrayImage, resizeBilinear } from "./image";
import { InferenceFailureError } from "./errors";
import { l2Normalize, MatchRow, mutualNearest } from "./matching";
import { runSession } from "./session";

/** The model consumes fixed-size inputs; crops are resized to fit. */
export const INPUT_SIZE = 256;
const MIN_SIMILARITY = 0.8;

interface CellGrid {
  cells: Float32Array[];
  gridWidth: number;
  gridHeight: number;
}

/** Split a [1, C, gh, gw] feature map into normalized per-cell vectors. */
function toCells(features: ort.Tensor): CellGrid {
  const [, channels, gridHeight, gridWidth] = features.dims;
  const data = features.data as Float32Array;
  const plane = gridWidth * gridHeight;
  const cells: Float32Array[] = [];
  for (let r = 0; r < gridHeight; r++) {
    for (let c = 0; c < gridWidth; c++) {
      const vec = new Float32Array(channels);
      for (let ch = 0; ch < channels; ch++) {
        vec[ch] = data[ch * plane + r * gridWidth + c];
      }
      cells.push(l2Normalize(vec));
    }
  }
  return { cells, gridWidth, gridHeight };
}

/** Map a model-frame coordinate back to the original image frame. */
function toOriginal(v: number, originalExtent: number): number {
  const mapped = (v + 0.5) * (originalExtent / INPUT_SIZE) - 0.5;
  return Math.min(Math.max(mapped, 0), originalExtent - 1);
}

/**
 * Match a crop pair with the dense (detector-free) model: both crops are
 * resized to the model's fixed input size, cell features are matched by
 * mutual nearest neighbor, and cell centers are mapped back to each
 * crop's own pixel frame.
 */
export async function adaptDetectorFree(
  session: ort.InferenceSession,
  imgA: GrayImage,
  imgB: GrayImage,
): Promise<MatchRow[]> {
  const a = resizeBilinear(imgA, INPUT_SIZE, INPUT_SIZE);
  const b = resizeBilinear(imgB, INPUT_SIZE, INPUT_SIZE);
  const outputs = await runSession(session, {
    image0: new ort.Tensor("float32", a.data, [1, 1, INPUT_SIZE, INPUT_SIZE]),
    image1: new ort.Tensor("float32", b.data, [1, 1, INPUT_SIZE, INPUT_SIZE]),
  });
  const features0 = outputs.features0;
  const features1 = outputs.features1;
  if (features0 === undefined || features1 === undefined) {
    throw new InferenceFailureError(
      "checkpoint does not produce features0 and features1 outputs",
    );
  }
  const gridA = toCells(features0);
  const gridB = toCells(features1);
  const cellSize = INPUT_SIZE / gridA.gridWidth;
  const pairs = mutualNearest(gridA.cells, gridB.cells, {
    minSimilarity: MIN_SIMILARITY,
  });
  return pairs.map(([i, j]) => {
    const x0 = ((i % gridA.gridWidth) + 0.5) * cellSize;
    const y0 = (Math.floor(i / gridA.gridWidth) + 0.5) * cellSize;
    const x1 = ((j % gridB.gridWidth) + 0.5) * cellSize;
    const y1 = (Math.floor(j / gridB.gridWidth) + 0.5) * cellSize;
    return {
      xSrc: toOriginal(x0, imgA.width),
      ySrc: toOriginal(y0, imgA.height),
      xDst: toOriginal(x1, imgB.width),
      yDst: toOriginal(y1, imgB.height),
    };
  });
}
