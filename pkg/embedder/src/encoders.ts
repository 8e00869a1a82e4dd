/**
 * Text encoders.  Every encoder maps a batch of explanation strings to
 * one aggregate vector each and must be deterministic for a fixed
 * version tag (inference only).
 *
 * Two families are provided: pretrained transformer encoders through
 * @huggingface/transformers (loaded lazily; needs the model available
 * locally or a network path to the hub), and a self-contained hashed
 * character-n-gram encoder that runs anywhere and is the pinned encoder
 * for the offline test fixtures.
 */

export interface Encoder {
  /** Version-bearing tag written into the embedding file header. */
  readonly tag: string;
  readonly dim: number;
  encode(texts: string[]): Promise<Float32Array[]>;
}

/** FNV-1a 32-bit hash; plain integer math keeps it portable. */
export function fnv1a(text: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return h >>> 0;
}

/**
 * Hashed bag of character trigrams and word unigrams, signed and
 * L2-normalized.  Lexical overlap between texts translates directly
 * into cosine similarity, which is the property the ranking model
 * consumes; the vectors carry no learned semantics.
 */
export class HashNgramEncoder implements Encoder {
  static readonly VERSION = "hash-ngram-v1";
  readonly tag: string;
  readonly dim: number;

  constructor(dim = 256) {
    this.dim = dim;
    this.tag = `${HashNgramEncoder.VERSION}/d${dim}`;
  }

  private features(text: string): string[] {
    const normalized = text.toLowerCase().replace(/\s+/g, " ").trim();
    const padded = ` ${normalized} `;
    const feats: string[] = [];
    for (let i = 0; i + 3 <= padded.length; i++) {
      feats.push(`3:${padded.slice(i, i + 3)}`);
    }
    for (const word of normalized.split(" ")) {
      if (word) {
        feats.push(`w:${word}`);
      }
    }
    return feats;
  }

  encodeOne(text: string): Float32Array {
    const acc = new Float64Array(this.dim);
    for (const feat of this.features(text)) {
      const h = fnv1a(feat);
      const bucket = h % this.dim;
      const sign = (h >>> 16) & 1 ? 1.0 : -1.0;
      acc[bucket] += sign;
    }
    let norm = 0.0;
    for (const v of acc) {
      norm += v * v;
    }
    norm = Math.sqrt(norm);
    const out = new Float32Array(this.dim);
    if (norm > 0) {
      for (let k = 0; k < this.dim; k++) {
        out[k] = Math.fround(acc[k] / norm);
      }
    }
    return out;
  }

  async encode(texts: string[]): Promise<Float32Array[]> {
    return texts.map((t) => this.encodeOne(t));
  }
}

/**
 * Aggregate-token extraction from a pretrained transformer.  The text
 * gets the model's start token prepended by its tokenizer; the start
 * token's final hidden state is the aggregate representation.
 */
export class TransformerEncoder implements Encoder {
  readonly tag: string;
  readonly dim: number;
  private extractor: any;
  private batchSize: number;

  private constructor(tag: string, dim: number, extractor: any, batchSize: number) {
    this.tag = tag;
    this.dim = dim;
    this.extractor = extractor;
    this.batchSize = batchSize;
  }

  static async load(modelName: string, batchSize = 32): Promise<TransformerEncoder> {
    // Resolved lazily so the package works without the optional
    // transformer runtime installed.
    const moduleName: string = "@huggingface/transformers";
    let mod: any;
    try {
      mod = await import(moduleName);
    } catch (err) {
      throw new Error(
        `encoder unavailable: install @huggingface/transformers to use ` +
        `'${modelName}' (${err})`,
      );
    }
    const extractor = await mod.pipeline("feature-extraction", modelName);
    const probe = await extractor(["probe"], { pooling: "cls" });
    const dim = probe.dims[probe.dims.length - 1];
    return new TransformerEncoder(modelName, dim, extractor, batchSize);
  }

  async encode(texts: string[]): Promise<Float32Array[]> {
    const rows: Float32Array[] = [];
    for (let start = 0; start < texts.length; start += this.batchSize) {
      const batch = texts.slice(start, start + this.batchSize);
      const output = await this.extractor(batch, { pooling: "cls" });
      for (const row of output.tolist()) {
        rows.push(Float32Array.from(row as number[]));
      }
    }
    return rows;
  }
}

export const DEFAULT_TRANSFORMER = "Xenova/bert-base-uncased";

export async function makeEncoder(
  name: string,
  opts: { dim?: number; batchSize?: number } = {},
): Promise<Encoder> {
  if (name === "hash-ngram" || name.startsWith(HashNgramEncoder.VERSION)) {
    return new HashNgramEncoder(opts.dim ?? 256);
  }
  return TransformerEncoder.load(name, opts.batchSize ?? 32);
}
