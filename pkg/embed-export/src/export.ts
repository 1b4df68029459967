/**
 * Batch export: one input line -> one vector line, order preserved.
 *
 * Output format (consumed by the pipeline's vector loader):
 *   #dim=<d>
 *   <text>\t<v0> <v1> ... <v_{d-1}>
 * with floats at 7 significant digits. On any failure the partial output is
 * deleted.
 */

import { once } from "node:events";
import { createWriteStream, promises as fs } from "node:fs";

import { Encoder, resolveEncoder } from "./encoders.js";

export interface ExportJob {
  modelId: string;
  inputPath: string;
  outputPath: string;
  batchSize: number;
}

export function formatFloat(x: number): string {
  // Shortest of the default repr and 7-significant-digit form that
  // round-trips to the same 7-digit precision.
  const g = x.toPrecision(7);
  const parsed = Number(g);
  const plain = String(parsed);
  return plain.length <= g.length ? plain : g;
}

export function vectorLine(text: string, vector: number[]): string {
  return `${text}\t${vector.map(formatFloat).join(" ")}`;
}

export async function readInputLines(path: string): Promise<string[]> {
  const raw = await fs.readFile(path, "utf-8");
  const lines = raw.split("\n");
  if (lines.length > 0 && lines[lines.length - 1] === "") lines.pop();
  lines.forEach((line, i) => {
    if (line.includes("\t")) {
      throw new Error(`input line ${i + 1} contains a tab; keys must be tab-free`);
    }
  });
  return lines;
}

export async function runExport(
  job: ExportJob,
  encoder?: Encoder
): Promise<{ lines: number; dim: number }> {
  if (!Number.isInteger(job.batchSize) || job.batchSize < 1) {
    throw new Error(`batch size must be a positive integer, got ${job.batchSize}`);
  }
  const texts = await readInputLines(job.inputPath);
  const enc = encoder ?? (await resolveEncoder(job.modelId));

  const stream = createWriteStream(job.outputPath, { encoding: "utf-8" });
  try {
    stream.write(`#dim=${enc.dim}\n`);
    for (let start = 0; start < texts.length; start += job.batchSize) {
      const batch = texts.slice(start, start + job.batchSize);
      const vectors = await enc.encode(batch);
      for (let i = 0; i < batch.length; i++) {
        const vec = vectors[i];
        if (vec.length !== enc.dim) {
          throw new Error(
            `encoder returned dim ${vec.length} for line ${start + i + 1}, expected ${enc.dim}`
          );
        }
        if (!stream.write(vectorLine(batch[i], vec) + "\n")) {
          await once(stream, "drain");
        }
      }
    }
    stream.end();
    await once(stream, "finish");
  } catch (err) {
    stream.destroy();
    await fs.rm(job.outputPath, { force: true });
    throw err;
  }
  return { lines: texts.length, dim: enc.dim };
}
