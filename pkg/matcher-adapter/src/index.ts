export { formatMatchCsv, HEADER } from "./csv";
export { adaptDetectorBased, detectKeypoints } from "./detectorBased";
export { adaptDetectorFree, INPUT_SIZE } from "./detectorFree";
export { InferenceFailureError, MissingCheckpointError } from "./errors";
export { GrayImage, readGrayPng, resizeBilinear, sampleBilinear } from "./image";
export { l2Normalize, MatchRow, mutualNearest } from "./matching";
export { createSession, runSession } from "./session";
