import * as ort from "onnxruntime-node";

import { GrayImage, sampleBilinear } from "./image";
import { InferenceFailureError } from "./errors";
import { l2Normalize, MatchRow, mutualNearest } from "./matching";
import { runSession } from "./session";

const NMS_RADIUS = 4;
const BORDER_MARGIN = 8;
const MAX_KEYPOINTS = 512;
const DESCRIPTOR_STRIDE = 8;
const MIN_SIMILARITY = 0.5;
const MAX_RATIO = 0.95;

interface Keypoint {
  x: number;
  y: number;
  score: number;
}

interface DenseFeatures {
  scores: Float32Array; // height x width
  descriptors: Float32Array; // channels x gridHeight x gridWidth
  channels: number;
  gridWidth: number;
  gridHeight: number;
}

async function extractFeatures(
  session: ort.InferenceSession,
  img: GrayImage,
): Promise<DenseFeatures> {
  const input = new ort.Tensor("float32", img.data, [
    1,
    1,
    img.height,
    img.width,
  ]);
  const outputs = await runSession(session, { image: input });
  const scores = outputs.scores;
  const descriptors = outputs.descriptors;
  if (scores === undefined || descriptors === undefined) {
    throw new InferenceFailureError(
      "checkpoint does not produce scores and descriptors outputs",
    );
  }
  const [, channels, gridHeight, gridWidth] = descriptors.dims;
  return {
    scores: scores.data as Float32Array,
    descriptors: descriptors.data as Float32Array,
    channels,
    gridWidth,
    gridHeight,
  };
}

/** Strict local maxima of the score map, best MAX_KEYPOINTS of them. */
export function detectKeypoints(
  scores: Float32Array,
  width: number,
  height: number,
): Keypoint[] {
  const found: Keypoint[] = [];
  const lo = BORDER_MARGIN;
  for (let y = lo; y < height - lo; y++) {
    for (let x = lo; x < width - lo; x++) {
      const s = scores[y * width + x];
      let isMax = true;
      for (let dy = -NMS_RADIUS; dy <= NMS_RADIUS && isMax; dy++) {
        for (let dx = -NMS_RADIUS; dx <= NMS_RADIUS; dx++) {
          if (dx === 0 && dy === 0) {
            continue;
          }
          if (scores[(y + dy) * width + (x + dx)] >= s) {
            isMax = false;
            break;
          }
        }
      }
      if (isMax) {
        found.push({ x, y, score: s });
      }
    }
  }
  found.sort((a, b) => b.score - a.score);
  return found.slice(0, MAX_KEYPOINTS);
}

/** Bilinearly interpolate the stride-8 descriptor grid at a keypoint. */
function sampleDescriptor(
  features: DenseFeatures,
  x: number,
  y: number,
): Float32Array {
  const { descriptors, channels, gridWidth, gridHeight } = features;
  const gx = x / DESCRIPTOR_STRIDE - 0.5;
  const gy = y / DESCRIPTOR_STRIDE - 0.5;
  const plane = gridWidth * gridHeight;
  const vec = new Float32Array(channels);
  for (let c = 0; c < channels; c++) {
    vec[c] = sampleBilinear(
      descriptors.subarray(c * plane, (c + 1) * plane),
      gridWidth,
      gridHeight,
      gx,
      gy,
    );
  }
  return l2Normalize(vec);
}

/**
 * Detect keypoints in both images, describe them, and return mutual
 * nearest-neighbor matches in the images' own pixel frames.
 */
export async function adaptDetectorBased(
  session: ort.InferenceSession,
  imgA: GrayImage,
  imgB: GrayImage,
): Promise<MatchRow[]> {
  const featA = await extractFeatures(session, imgA);
  const featB = await extractFeatures(session, imgB);
  const keysA = detectKeypoints(featA.scores, imgA.width, imgA.height);
  const keysB = detectKeypoints(featB.scores, imgB.width, imgB.height);
  const descA = keysA.map((k) => sampleDescriptor(featA, k.x, k.y));
  const descB = keysB.map((k) => sampleDescriptor(featB, k.x, k.y));
  const pairs = mutualNearest(descA, descB, {
    minSimilarity: MIN_SIMILARITY,
    maxRatio: MAX_RATIO,
  });
  return pairs.map(([i, j]) => ({
    xSrc: keysA[i].x,
    ySrc: keysA[i].y,
    xDst: keysB[j].x,
    yDst: keysB[j].y,
  }));
}
