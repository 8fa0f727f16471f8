/**
 * Deterministic offline sentence encoder.
 *
 * Embeds a sentence by feature hashing: every lowercased word token maps to
 * a signed bucket of the output vector, the buckets accumulate, and the
 * result is L2-normalized. The same text always yields the same vector, on
 * any machine, with no model download — which is what the store writer and
 * its round-trip guarantees need. Vectors are materialized as float32, the
 * store's on-disk precision.
 */

import { fnv1a64 } from "./fnv.js";

export const DEFAULT_DIM = 384;

const TOKEN_RE = /[\p{L}\p{N}]+/gu;

export class ModelError extends Error {}

export interface Encoder {
  readonly modelId: string;
  readonly dim: number;
  encode(texts: string[]): Float32Array[];
  encodeTokens(text: string): Float32Array[];
}

export function tokenize(text: string): string[] {
  return Array.from(text.toLowerCase().matchAll(TOKEN_RE), (m) => m[0]);
}

export class HashProjectionEncoder implements Encoder {
  readonly modelId: string;
  readonly dim: number;

  constructor(dim: number = DEFAULT_DIM) {
    if (!Number.isInteger(dim) || dim < 2) {
      throw new ModelError(`encoder dim must be an integer >= 2, got ${dim}`);
    }
    this.dim = dim;
    this.modelId = `feature-hash-v1-${dim}`;
  }

  encode(texts: string[]): Float32Array[] {
    return texts.map((text) => this.encodeOne(text));
  }

  /** Per-token vectors (for the store's optional token section). */
  encodeTokens(text: string): Float32Array[] {
    const tokens = tokenize(text);
    if (tokens.length === 0) {
      return [this.encodeOne(text)];
    }
    return tokens.map((token) => this.encodeOne(token));
  }

  private encodeOne(text: string): Float32Array {
    const accumulator = new Float64Array(this.dim);
    for (const token of tokenize(text)) {
      const hash = fnv1a64(`tok:${token}`);
      const bucket = Number(hash % BigInt(this.dim));
      const sign = (hash >> 62n) & 1n ? -1.0 : 1.0;
      accumulator[bucket] += sign;
    }
    if (accumulator.every((v) => v === 0.0)) {
      // Tokenless text, or tokens that cancelled out exactly: fall back to
      // a single bucket keyed on the raw text so no vector is ever zero.
      accumulator[Number(fnv1a64(text) % BigInt(this.dim))] = 1.0;
    }
    const norm = Math.sqrt(accumulator.reduce((s, v) => s + v * v, 0));
    const out = new Float32Array(this.dim);
    for (let i = 0; i < this.dim; i++) {
      out[i] = accumulator[i] / norm;
    }
    return out;
  }
}

/** Resolve a model name to an encoder; unknown names are load failures. */
export function loadEncoder(model: string, dim: number = DEFAULT_DIM): Encoder {
  if (model === "feature-hash-v1" || model === "default") {
    return new HashProjectionEncoder(dim);
  }
  throw new ModelError(
    `cannot load model '${model}': only the offline 'feature-hash-v1' ` +
      "encoder is bundled"
  );
}
