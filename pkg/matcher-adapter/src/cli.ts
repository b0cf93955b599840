import { mkdirSync, writeFileSync } from "fs";
import { dirname } from "path";
import { parseArgs } from "util";

import { formatMatchCsv } from "./csv";
import { adaptDetectorBased } from "./detectorBased";
import { adaptDetectorFree } from "./detectorFree";
import { InferenceFailureError, MissingCheckpointError } from "./errors";
import { readGrayPng } from "./image";
import { createSession } from "./session";

export const EXIT_USAGE = 1;
export const EXIT_MISSING_CHECKPOINT = 2;
export const EXIT_INFERENCE_FAILURE = 3;

const MODELS = ["detector-based", "detector-free"] as const;

const USAGE = `usage: adapter <a> <b> <out> [--checkpoint PATH] [--model ${MODELS.join("|")}]

Matches two PNG crops with an ONNX model and writes a CSV with the header
x_src,y_src,x_dst,y_dst,provenance (src from <a>, dst from <b>). When
--checkpoint is omitted the ADAPTER_CHECKPOINT environment variable is
consulted; without either the adapter exits ${EXIT_MISSING_CHECKPOINT} so
orchestrators can skip it.`;

export async function main(argv: string[]): Promise<number> {
  let positionals: string[];
  let values: { checkpoint?: string; model?: string };
  try {
    ({ positionals, values } = parseArgs({
      args: argv,
      allowPositionals: true,
      options: {
        checkpoint: { type: "string" },
        model: { type: "string", default: "detector-based" },
      },
    }));
  } catch (err) {
    process.stderr.write(`${(err as Error).message}\n${USAGE}\n`);
    return EXIT_USAGE;
  }
  if (positionals.length !== 3) {
    process.stderr.write(`expected 3 positional arguments, got ${positionals.length}\n${USAGE}\n`);
    return EXIT_USAGE;
  }
  const model = values.model as (typeof MODELS)[number];
  if (!MODELS.includes(model)) {
    process.stderr.write(`unknown model "${values.model}"\n${USAGE}\n`);
    return EXIT_USAGE;
  }
  const [aPath, bPath, outPath] = positionals;
  const checkpoint = values.checkpoint ?? process.env.ADAPTER_CHECKPOINT;

  try {
    if (!checkpoint) {
      throw new MissingCheckpointError(
        "no --checkpoint given and ADAPTER_CHECKPOINT is unset",
      );
    }
    const imgA = readGrayPng(aPath);
    const imgB = readGrayPng(bPath);
    const session = await createSession(checkpoint);
    const rows =
      model === "detector-based"
        ? await adaptDetectorBased(session, imgA, imgB)
        : await adaptDetectorFree(session, imgA, imgB);
    mkdirSync(dirname(outPath) || ".", { recursive: true });
    writeFileSync(outPath, formatMatchCsv(rows, model));
    return 0;
  } catch (err) {
    process.stderr.write(`${(err as Error).message}\n`);
    if (err instanceof MissingCheckpointError) {
      return EXIT_MISSING_CHECKPOINT;
    }
    if (err instanceof InferenceFailureError) {
      return EXIT_INFERENCE_FAILURE;
    }
    return EXIT_USAGE;
  }
}
