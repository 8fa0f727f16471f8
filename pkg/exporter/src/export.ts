/**
 * Batch export of sentence embeddings to a binary .embs store.
 *
 * The input is a plain-text file with one sentence per line (blank
 * lines ignored, other lines kept verbatim). Each unique sentence is
 * encoded once; duplicates collapse onto the same content hash, so the
 * store holds exactly one record per unique sentence.
 */

import * as fs from "node:fs";

import { loadEncoder, type Encoder } from "./encoder.js";
import { fnv1a64 } from "./fnv.js";
import { writeStore, type StoreData } from "./store.js";

export interface ExportJob {
  /** Path to the sentence file, one sentence per line. */
  input: string;
  /** Model identifier understood by {@link loadEncoder}. */
  model: string;
  /** Path the binary store is written to. */
  output: string;
  /** Sentences encoded per encoder call; must be >= 1. */
  batchSize: number;
  /** Also store per-token vector sequences. */
  includeTokens: boolean;
  /** Embedding width; 0 picks the encoder default. */
  dim?: number;
}

export interface ExportSummary {
  lineCount: number;
  sentenceCount: number;
  duplicateCount: number;
  dim: number;
  modelId: string;
  tokenCount: number;
  fileSize: number;
}

export function readSentences(path: string): string[] {
  const raw = fs.readFileSync(path, "utf8");
  const sentences: string[] = [];
  for (let line of raw.split("\n")) {
    if (line.endsWith("\r")) {
      line = line.slice(0, -1);
    }
    if (line.trim().length === 0) {
      continue;
    }
    sentences.push(line);
  }
  return sentences;
}

export function runExport(job: ExportJob): ExportSummary {
  if (!Number.isInteger(job.batchSize) || job.batchSize < 1) {
    throw new RangeError(`batch size must be a positive integer, got ${job.batchSize}`);
  }
  const encoder: Encoder = loadEncoder(job.model, job.dim);

  const sentences = readSentences(job.input);
  const unique: string[] = [];
  const seen = new Set<string>();
  for (const sentence of sentences) {
    if (!seen.has(sentence)) {
      seen.add(sentence);
      unique.push(sentence);
    }
  }

  const entries = new Map<bigint, Float32Array>();
  for (let start = 0; start < unique.length; start += job.batchSize) {
    const batch = unique.slice(start, start + job.batchSize);
    const vectors = encoder.encode(batch);
    for (let i = 0; i < batch.length; i++) {
      entries.set(fnv1a64(batch[i]), vectors[i]);
    }
  }

  const store: StoreData = {
    dim: encoder.dim,
    modelId: encoder.modelId,
    entries,
  };
  let tokenCount = 0;
  if (job.includeTokens) {
    const tokenEntries = new Map<bigint, Float32Array[]>();
    for (const sentence of unique) {
      tokenEntries.set(fnv1a64(sentence), encoder.encodeTokens(sentence));
    }
    store.tokenEntries = tokenEntries;
    tokenCount = tokenEntries.size;
  }

  writeStore(store, job.output);
  return {
    lineCount: sentences.length,
    sentenceCount: entries.size,
    duplicateCount: sentences.length - unique.length,
    dim: encoder.dim,
    modelId: encoder.modelId,
    tokenCount,
    fileSize: fs.statSync(job.output).size,
  };
}
