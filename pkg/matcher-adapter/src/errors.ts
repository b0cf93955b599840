export class MissingCheckpointError extends Error {
  constructor(detail: string) {
    super(`missing checkpoint: ${detail}`);
    this.name = "MissingCheckpointError";
  }
}

export class InferenceFailureError extends Error {
  constructor(detail: string) {
    super(`inference failure: ${detail}`);
    this.name = "InferenceFailureError";
  }
}
