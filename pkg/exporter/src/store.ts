/**
 * Binary .embs vector-store writer, reader, and validator.
 *
 * Layout (integers little-endian, vectors float32):
 *
 *     magic   4 bytes  "EMBS"
 *     version u16      1
 *     flags   u16      bit0 = token section present, bit1 = vocab section
 *     dim     u32
 *     count   u64      number of sentence entries
 *     hashtag 16 bytes ASCII hash-algorithm tag, NUL-padded ("fnv1a64")
 *     model   u16 length + UTF-8 model identifier
 *     count x (u64 content hash, dim x f32), strictly ascending by hash
 *     [tokens] u64 count; per entry u64 hash, u32 seq_len,
 *              seq_len x dim x f32, strictly ascending by hash
 *     [vocab]  u64 count; per entry u16 word byte length, UTF-8 word,
 *              dim x f32, strictly ascending by encoded word
 *
 * Sentence entries are keyed by the FNV-1a 64-bit hash of the sentence
 * text (UTF-8). Validation errors always carry the byte offset at which
 * the file stopped making sense.
 */

import * as fs from "node:fs";

export const MAGIC = Buffer.from("EMBS", "ascii");
export const STORE_VERSION = 1;
export const HASH_TAG = "fnv1a64";
export const FLAG_TOKENS = 0x1;
export const FLAG_VOCAB = 0x2;

export class StoreFormatError extends Error {
  readonly offset: number;

  constructor(message: string, offset: number) {
    super(`${message} (offset ${offset})`);
    this.offset = offset;
  }
}

export interface StoreData {
  dim: number;
  modelId: string;
  entries: Map<bigint, Float32Array>;
  tokenEntries?: Map<bigint, Float32Array[]>;
  vocab?: Map<string, Float32Array>;
}

export interface StoreReport {
  dim: number;
  model_id: string;
  hash_tag: string;
  sentence_count: number;
  token_count: number;
  vocab_count: number;
  file_size: number;
  sampled_self_cosine: number;
}

function checkVector(vec: Float32Array, dim: number, what: string): void {
  if (vec.length !== dim) {
    throw new RangeError(`${what} has length ${vec.length}, expected ${dim}`);
  }
  for (const value of vec) {
    if (!Number.isFinite(value)) {
      throw new RangeError(`${what} contains non-finite values`);
    }
  }
}

function f32Bytes(vec: Float32Array): Buffer {
  const out = Buffer.allocUnsafe(4 * vec.length);
  for (let i = 0; i < vec.length; i++) {
    out.writeFloatLE(vec[i], 4 * i);
  }
  return out;
}

export function serializeStore(data: StoreData): Buffer {
  if (!Number.isInteger(data.dim) || data.dim <= 0) {
    throw new RangeError(`store dim must be positive, got ${data.dim}`);
  }
  const model = Buffer.from(data.modelId, "utf8");
  if (model.length > 0xffff) {
    throw new RangeError("model id longer than 65535 bytes");
  }
  const tokenEntries = data.tokenEntries ?? new Map();
  const vocab = data.vocab ?? new Map();
  const flags =
    (tokenEntries.size > 0 ? FLAG_TOKENS : 0) | (vocab.size > 0 ? FLAG_VOCAB : 0);

  const parts: Buffer[] = [];
  const header = Buffer.allocUnsafe(4 + 2 + 2 + 4 + 8);
  MAGIC.copy(header, 0);
  header.writeUInt16LE(STORE_VERSION, 4);
  header.writeUInt16LE(flags, 6);
  header.writeUInt32LE(data.dim, 8);
  header.writeBigUInt64LE(BigInt(data.entries.size), 12);
  parts.push(header);

  const tag = Buffer.alloc(16);
  tag.write(HASH_TAG, "ascii");
  parts.push(tag);

  const modelLen = Buffer.allocUnsafe(2);
  modelLen.writeUInt16LE(model.length, 0);
  parts.push(modelLen, model);

  const hashes = Array.from(data.entries.keys()).sort((a, b) =>
    a < b ? -1 : a > b ? 1 : 0
  );
  for (const hash of hashes) {
    const vec = data.entries.get(hash)!;
    checkVector(vec, data.dim, `vector for ${hash}`);
    const key = Buffer.allocUnsafe(8);
    key.writeBigUInt64LE(hash, 0);
    parts.push(key, f32Bytes(vec));
  }

  if (tokenEntries.size > 0) {
    const count = Buffer.allocUnsafe(8);
    count.writeBigUInt64LE(BigInt(tokenEntries.size), 0);
    parts.push(count);
    const tokenHashes = Array.from(tokenEntries.keys()).sort((a, b) =>
      a < b ? -1 : a > b ? 1 : 0
    );
    for (const hash of tokenHashes) {
      const sequence = tokenEntries.get(hash)!;
      if (sequence.length === 0) {
        throw new RangeError(`token sequence for ${hash} is empty`);
      }
      const head = Buffer.allocUnsafe(12);
      head.writeBigUInt64LE(hash, 0);
      head.writeUInt32LE(sequence.length, 8);
      parts.push(head);
      for (const vec of sequence) {
        checkVector(vec, data.dim, `token vector for ${hash}`);
        parts.push(f32Bytes(vec));
      }
    }
  }

  if (vocab.size > 0) {
    const count = Buffer.allocUnsafe(8);
    count.writeBigUInt64LE(BigInt(vocab.size), 0);
    parts.push(count);
    const words = Array.from(vocab.keys()).sort((a, b) =>
      Buffer.compare(Buffer.from(a, "utf8"), Buffer.from(b, "utf8"))
    );
    for (const word of words) {
      const raw = Buffer.from(word, "utf8");
      if (raw.length > 0xffff) {
        throw new RangeError(`vocab word longer than 65535 bytes: ${word}`);
      }
      const len = Buffer.allocUnsafe(2);
      len.writeUInt16LE(raw.length, 0);
      const vec = vocab.get(word)!;
      checkVector(vec, data.dim, `vocab vector for '${word}'`);
      parts.push(len, raw, f32Bytes(vec));
    }
  }

  return Buffer.concat(parts);
}

export function writeStore(data: StoreData, path: string): void {
  fs.writeFileSync(path, serializeStore(data));
}

/** Bounds-checked cursor; every failure names its byte offset. */
class Reader {
  offset = 0;

  constructor(private readonly data: Buffer) {}

  take(n: number, what: string): Buffer {
    if (this.offset + n > this.data.length) {
      throw new StoreFormatError(
        `truncated file: ${what} needs ${n} bytes`,
        this.offset
      );
    }
    const out = this.data.subarray(this.offset, this.offset + n);
    this.offset += n;
    return out;
  }

  u16(what: string): number {
    return this.take(2, what).readUInt16LE(0);
  }

  u32(what: string): number {
    return this.take(4, what).readUInt32LE(0);
  }

  u64(what: string): bigint {
    return this.take(8, what).readBigUInt64LE(0);
  }

  vector(nFloats: number, what: string): Float32Array {
    const start = this.offset;
    const raw = this.take(4 * nFloats, what);
    const out = new Float32Array(nFloats);
    for (let i = 0; i < nFloats; i++) {
      const value = raw.readFloatLE(4 * i);
      if (!Number.isFinite(value)) {
        throw new StoreFormatError(`${what} contains non-finite values`, start);
      }
      out[i] = value;
    }
    return out;
  }

  get remaining(): number {
    return this.data.length - this.offset;
  }
}

export function parseStore(data: Buffer): StoreData {
  const reader = new Reader(data);

  const magic = reader.take(4, "magic");
  if (!magic.equals(MAGIC)) {
    throw new StoreFormatError(
      `bad magic ${JSON.stringify(magic.toString("latin1"))}, expected "EMBS"`,
      0
    );
  }
  const version = reader.u16("version");
  if (version !== STORE_VERSION) {
    throw new StoreFormatError(`unsupported store version ${version}`, 4);
  }
  const flags = reader.u16("flags");
  const dim = reader.u32("dim");
  if (dim === 0) {
    throw new StoreFormatError("store dim must be positive", 8);
  }
  const count = reader.u64("entry count");
  const tagOffset = reader.offset;
  const tag = reader
    .take(16, "hash tag")
    .toString("ascii")
    .replace(/\0+$/, "");
  if (tag !== HASH_TAG) {
    throw new StoreFormatError(
      `unsupported hash algorithm '${tag}'`,
      tagOffset
    );
  }
  const modelLen = reader.u16("model id length");
  const modelId = reader.take(modelLen, "model id").toString("utf8");

  const entries = new Map<bigint, Float32Array>();
  let previous = -1n;
  for (let i = 0n; i < count; i++) {
    const keyOffset = reader.offset;
    const hash = reader.u64(`entry ${i} hash`);
    if (hash <= previous) {
      throw new StoreFormatError(
        `entry hashes not strictly ascending at index ${i}`,
        keyOffset
      );
    }
    previous = hash;
    entries.set(hash, reader.vector(dim, `entry ${i} vector`));
  }

  const tokenEntries = new Map<bigint, Float32Array[]>();
  if (flags & FLAG_TOKENS) {
    const tokenCount = reader.u64("token section count");
    previous = -1n;
    for (let i = 0n; i < tokenCount; i++) {
      const keyOffset = reader.offset;
      const hash = reader.u64(`token entry ${i} hash`);
      if (hash <= previous) {
        throw new StoreFormatError(
          `token hashes not strictly ascending at index ${i}`,
          keyOffset
        );
      }
      previous = hash;
      const seqLen = reader.u32(`token entry ${i} length`);
      if (seqLen === 0) {
        throw new StoreFormatError(
          `token entry ${i} has empty sequence`,
          keyOffset
        );
      }
      const sequence: Float32Array[] = [];
      for (let t = 0; t < seqLen; t++) {
        sequence.push(reader.vector(dim, `token entry ${i} vector ${t}`));
      }
      tokenEntries.set(hash, sequence);
    }
  }

  const vocab = new Map<string, Float32Array>();
  if (flags & FLAG_VOCAB) {
    const vocabCount = reader.u64("vocab section count");
    let previousWord = Buffer.alloc(0);
    for (let i = 0n; i < vocabCount; i++) {
      const keyOffset = reader.offset;
      const wordLen = reader.u16(`vocab entry ${i} length`);
      const raw = Buffer.from(reader.take(wordLen, `vocab entry ${i} word`));
      if (i > 0n && Buffer.compare(raw, previousWord) <= 0) {
        throw new StoreFormatError(
          `vocab words not strictly ascending at index ${i}`,
          keyOffset
        );
      }
      previousWord = raw;
      vocab.set(
        raw.toString("utf8"),
        reader.vector(dim, `vocab entry ${i} vector`)
      );
    }
  }

  if (reader.remaining !== 0) {
    throw new StoreFormatError(
      `${reader.remaining} trailing bytes`,
      reader.offset
    );
  }
  return { dim, modelId, entries, tokenEntries, vocab };
}

export function cosine(a: Float32Array, b: Float32Array): number {
  if (a.length !== b.length) {
    throw new RangeError(`cosine of length ${a.length} vs ${b.length}`);
  }
  let dot = 0;
  let normA = 0;
  let normB = 0;
  for (let i = 0; i < a.length; i++) {
    dot += a[i] * b[i];
    normA += a[i] * a[i];
    normB += b[i] * b[i];
  }
  if (normA === 0 || normB === 0) {
    throw new RangeError("cosine of zero vector");
  }
  return dot / (Math.sqrt(normA) * Math.sqrt(normB));
}

/**
 * Fully parse a store file and spot-check vector sanity.
 *
 * Ten entries sampled evenly across the file must be non-zero and have
 * self-cosine 1.0 within 1e-6; fewer than ten entries means all of them
 * are checked.
 */
export function validateStore(path: string): StoreReport {
  const data = fs.readFileSync(path);
  const store = parseStore(data);

  const hashes = Array.from(store.entries.keys());
  const sampleCount = Math.min(10, hashes.length);
  let worst = 1.0;
  for (let i = 0; i < sampleCount; i++) {
    const index =
      sampleCount === 1
        ? 0
        : Math.round((i * (hashes.length - 1)) / (sampleCount - 1));
    const vec = store.entries.get(hashes[index])!;
    if (vec.every((v) => v === 0.0)) {
      throw new StoreFormatError(
        `sampled entry ${hashes[index]} is a zero vector`,
        0
      );
    }
    const cos = cosine(vec, vec);
    if (!(Math.abs(cos - 1.0) <= 1e-6)) {
      throw new StoreFormatError(
        `sampled entry ${hashes[index]} self-cosine ${cos} is not 1.0±1e-6`,
        0
      );
    }
    worst = Math.min(worst, cos);
  }

  return {
    dim: store.dim,
    model_id: store.modelId,
    hash_tag: HASH_TAG,
    sentence_count: store.entries.size,
    token_count: store.tokenEntries?.size ?? 0,
    vocab_count: store.vocab?.size ?? 0,
    file_size: data.length,
    sampled_self_cosine: worst,
  };
}
