/** A correspondence between image a (src side) and image b (dst side). */
export interface MatchRow {
  xSrc: number;
  ySrc: number;
  xDst: number;
  yDst: number;
}

/** Normalize a descriptor in place; all-zero vectors stay zero. */
export function l2Normalize(vec: Float32Array): Float32Array {
  let sum = 0;
  for (let i = 0; i < vec.length; i++) {
    sum += vec[i] * vec[i];
  }
  const norm = Math.sqrt(sum);
  if (norm > 0) {
    for (let i = 0; i < vec.length; i++) {
      vec[i] /= norm;
    }
  }
  return vec;
}

function dot(a: Float32Array, b: Float32Array): number {
  let sum = 0;
  for (let i = 0; i < a.length; i++) {
    sum += a[i] * b[i];
  }
  return sum;
}

export interface MutualNearestOptions {
  /** Discard pairs whose cosine similarity falls below this. */
  minSimilarity: number;
  /**
   * Lowe-style ratio test: keep a pair only when the runner-up similarity
   * on the a side is at most maxRatio times the best. Omit to disable.
   */
  maxRatio?: number;
}

/**
 * Mutual nearest-neighbor matching on L2-normalized descriptors.
 * Returns index pairs [i, j] with a[i] matched to b[j].
 */
export function mutualNearest(
  a: Float32Array[],
  b: Float32Array[],
  options: MutualNearestOptions,
): Array<[number, number]> {
  if (a.length === 0 || b.length === 0) {
    return [];
  }
  const bestForA = new Int32Array(a.length).fill(-1);
  const bestSim = new Float64Array(a.length).fill(-Infinity);
  const secondSim = new Float64Array(a.length).fill(-Infinity);
  const bestForB = new Int32Array(b.length).fill(-1);
  const bestSimB = new Float64Array(b.length).fill(-Infinity);

  for (let i = 0; i < a.length; i++) {
    for (let j = 0; j < b.length; j++) {
      const sim = dot(a[i], b[j]);
      if (sim > bestSim[i]) {
        secondSim[i] = bestSim[i];
        bestSim[i] = sim;
        bestForA[i] = j;
      } else if (sim > secondSim[i]) {
        secondSim[i] = sim;
      }
      if (sim > bestSimB[j]) {
        bestSimB[j] = sim;
        bestForB[j] = i;
      }
    }
  }

  const pairs: Array<[number, number]> = [];
  for (let i = 0; i < a.length; i++) {
    const j = bestForA[i];
    if (j < 0 || bestForB[j] !== i || bestSim[i] < options.minSimilarity) {
      continue;
    }
    if (
      options.maxRatio !== undefined &&
      secondSim[i] > options.maxRatio * bestSim[i]
    ) {
      continue;
    }
    pairs.push([i, j]);
  }
  return pairs;
}
