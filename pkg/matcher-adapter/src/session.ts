import { existsSync } from "fs";
import * as ort from "onnxruntime-node";

import { InferenceFailureError, MissingCheckpointError } from "./errors";

/** Load an ONNX checkpoint, mapping failures onto the adapter's errors. */
export async function createSession(
  checkpoint: string,
): Promise<ort.InferenceSession> {
  if (!existsSync(checkpoint)) {
    throw new MissingCheckpointError(checkpoint);
  }
  try {
    return await ort.InferenceSession.create(checkpoint, {
      executionProviders: ["cpu"],
    });
  } catch (err) {
    throw new InferenceFailureError(
      `cannot load ${checkpoint}: ${(err as Error).message}`,
    );
  }
}

/** Run a session, wrapping runtime errors as inference failures. */
export async function runSession(
  session: ort.InferenceSession,
  feeds: Record<string, ort.Tensor>,
): Promise<ort.InferenceSession.OnnxValueMapType> {
  try {
    return await session.run(feeds);
  } catch (err) {
    throw new InferenceFailureError((err as Error).message);
  }
}
