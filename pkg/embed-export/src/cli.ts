#!/usr/bin/env node
/**
 * embed-export export --model <id> --in <txt> --out <vecs> [--batch <n>]
 *
 * Reads one normalized text per line and writes the pipeline's vector-file
 * format. Use --model hash:<dim> for the builtin offline encoder or a
 * transformers.js model id for real sentence embeddings.
 */

import { runExport } from "./export.js";

function usage(message?: string): never {
  if (message) console.error(`embed-export: ${message}`);
  console.error(
    "usage: embed-export export --model <id> --in <input.txt> --out <vectors.tsv> [--batch <n>]"
  );
  process.exit(2);
}

function parseArgs(argv: string[]) {
  if (argv.length === 0 || argv[0] !== "export") usage();
  const opts: Record<string, string> = {};
  for (let i = 1; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (value === undefined) usage(`missing value for ${flag}`);
    switch (flag) {
      case "--model":
        opts.model = value;
        break;
      case "--in":
        opts.input = value;
        break;
      case "--out":
        opts.output = value;
        break;
      case "--batch":
        opts.batch = value;
        break;
      default:
        usage(`unknown flag ${flag}`);
    }
  }
  if (!opts.model || !opts.input || !opts.output) {
    usage("--model, --in and --out are required");
  }
  const batch = opts.batch === undefined ? 32 : Number(opts.batch);
  return { modelId: opts.model, inputPath: opts.input, outputPath: opts.output, batchSize: batch };
}

async function main() {
  const job = parseArgs(process.argv.slice(2));
  try {
    const { lines, dim } = await runExport(job);
    console.error(`wrote ${lines} vectors (dim ${dim}) to ${job.outputPath}`);
  } catch (err) {
    console.error(`embed-export: ${err instanceof Error ? err.message : err}`);
    process.exit(1);
  }
}

main();
