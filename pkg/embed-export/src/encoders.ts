/**
 * Sentence encoders behind one interface.
 *
 * Model ids:
 *   "hash:<dim>"   – builtin deterministic signed-hash encoder, no downloads;
 *                    meant for tests and offline smoke runs.
 *   anything else  – treated as a transformers.js feature-extraction model id
 *                    (e.g. "Xenova/all-MiniLM-L6-v2"); requires the optional
 *                    @xenova/transformers package to be installed.
 */

export interface Encoder {
  readonly dim: number;
  encode(texts: string[]): Promise<number[][]>;
}

/** FNV-1a 64-bit over UTF-8 bytes; stable across platforms. */
function fnv1a64(text: string): bigint {
  let hash = 0xcbf29ce484222325n;
  const prime = 0x100000001b3n;
  const bytes = Buffer.from(text, "utf-8");
  for (const b of bytes) {
    hash ^= BigInt(b);
    hash = (hash * prime) & 0xffffffffffffffffn;
  }
  return hash;
}

export class HashEncoder implements Encoder {
  readonly dim: number;

  constructor(dim: number) {
    if (!Number.isInteger(dim) || dim < 1) {
      throw new Error(`hash encoder dim must be a positive integer, got ${dim}`);
    }
    this.dim = dim;
  }

  private embedOne(text: string): number[] {
    const acc = new Array<number>(this.dim).fill(0);
    const tokens = text.split(/\s+/).filter((t) => t.length > 0);
    const grams = [...tokens];
    for (let i = 0; i + 1 < tokens.length; i++) grams.push(`${tokens[i]} ${tokens[i + 1]}`);
    for (const gram of grams) {
      const h = fnv1a64(gram);
      const bucket = Number(h % BigInt(this.dim));
      const sign = (h >> 63n) & 1n ? -1 : 1;
      acc[bucket] += sign;
    }
    const norm = Math.sqrt(acc.reduce((s, v) => s + v * v, 0));
    return norm > 0 ? acc.map((v) => v / norm) : acc;
  }

  async encode(texts: string[]): Promise<number[][]> {
    return texts.map((t) => this.embedOne(t));
  }
}

/** transformers.js pipeline with mean pooling and L2 normalization. */
class TransformerEncoder implements Encoder {
  readonly dim: number;
  private readonly pipe: any;

  constructor(pipe: any, dim: number) {
    this.pipe = pipe;
    this.dim = dim;
  }

  static async load(modelId: string): Promise<TransformerEncoder> {
    let transformers: any;
    try {
      transformers = await import("@xenova/transformers" as string);
    } catch {
      throw new Error(
        `model "${modelId}" needs the optional dependency ` +
          "@xenova/transformers (npm install @xenova/transformers), " +
          "or use the builtin hash:<dim> encoder"
      );
    }
    const pipe = await transformers.pipeline("feature-extraction", modelId);
    const probe = await pipe("dimension probe", { pooling: "mean", normalize: true });
    return new TransformerEncoder(pipe, probe.data.length);
  }

  async encode(texts: string[]): Promise<number[][]> {
    const out: number[][] = [];
    for (const text of texts) {
      const tensor = await this.pipe(text, { pooling: "mean", normalize: true });
      out.push(Array.from(tensor.data as Float32Array));
    }
    return out;
  }
}

export async function resolveEncoder(modelId: string): Promise<Encoder> {
  if (modelId.startsWith("hash:")) {
    return new HashEncoder(Number(modelId.slice(5)));
  }
  return TransformerEncoder.load(modelId);
}
