#!/usr/bin/env node
/**
 * embs-exporter — encode sentence files into binary .embs vector stores.
 *
 * Commands:
 *   export   encode a sentence file into a store
 *   validate fully check a store file's structure and vectors
 *   serve    run an HTTP embedding provider
 *
 * Exit codes: 0 success, 1 usage error, 2 data/write/validation error,
 * 3 model load failure.
 */

import { pathToFileURL } from "node:url";

import { DEFAULT_DIM, loadEncoder, ModelError } from "./encoder.js";
import { runExport } from "./export.js";
import { createServer, listen } from "./server.js";
import { StoreFormatError, validateStore } from "./store.js";

const USAGE = `usage: embs-exporter <command> [options]

commands:
  export    --input <file> --out <file> [--model <id>] [--dim <n>]
            [--batch-size <n>] [--include-tokens]
  validate  --store <file>
  serve     [--port <n>] [--model <id>] [--dim <n>]

exit codes: 0 ok, 1 usage, 2 data/write error, 3 model load failure`;

class UsageError extends Error {}

interface Flags {
  values: Map<string, string>;
  switches: Set<string>;
}

function parseFlags(
  argv: string[],
  valueFlags: string[],
  switchFlags: string[]
): Flags {
  const values = new Map<string, string>();
  const switches = new Set<string>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (switchFlags.includes(arg)) {
      switches.add(arg);
    } else if (valueFlags.includes(arg)) {
      if (i + 1 >= argv.length) {
        throw new UsageError(`${arg} requires a value`);
      }
      values.set(arg, argv[++i]);
    } else {
      throw new UsageError(`unknown argument '${arg}'`);
    }
  }
  return { values, switches };
}

function requireFlag(flags: Flags, name: string): string {
  const value = flags.values.get(name);
  if (value === undefined) {
    throw new UsageError(`${name} is required`);
  }
  return value;
}

function intFlag(flags: Flags, name: string, fallback: number): number {
  const raw = flags.values.get(name);
  if (raw === undefined) {
    return fallback;
  }
  const value = Number(raw);
  if (!Number.isInteger(value) || value < 0) {
    throw new UsageError(`${name} must be a non-negative integer, got '${raw}'`);
  }
  return value;
}

function cmdExport(argv: string[]): number {
  const flags = parseFlags(
    argv,
    ["--input", "--out", "--model", "--dim", "--batch-size"],
    ["--include-tokens"]
  );
  const batchSize = intFlag(flags, "--batch-size", 32);
  if (batchSize < 1) {
    throw new UsageError("--batch-size must be at least 1");
  }
  const summary = runExport({
    input: requireFlag(flags, "--input"),
    output: requireFlag(flags, "--out"),
    model: flags.values.get("--model") ?? "feature-hash-v1",
    dim: intFlag(flags, "--dim", DEFAULT_DIM),
    batchSize,
    includeTokens: flags.switches.has("--include-tokens"),
  });
  process.stdout.write(
    [
      `model: ${summary.modelId}`,
      `dim: ${summary.dim}`,
      `sentences: ${summary.sentenceCount}` +
        (summary.duplicateCount > 0
          ? ` (${summary.duplicateCount} duplicate lines collapsed)`
          : ""),
      `token entries: ${summary.tokenCount}`,
      `bytes written: ${summary.fileSize}`,
      "",
    ].join("\n")
  );
  return 0;
}

function cmdValidate(argv: string[]): number {
  const flags = parseFlags(argv, ["--store"], []);
  const report = validateStore(requireFlag(flags, "--store"));
  process.stdout.write(
    [
      `dim: ${report.dim}`,
      `model_id: ${report.model_id}`,
      `hash_tag: ${report.hash_tag}`,
      `sentence_count: ${report.sentence_count}`,
      `token_count: ${report.token_count}`,
      `vocab_count: ${report.vocab_count}`,
      `file_size: ${report.file_size}`,
      `sampled_self_cosine: ${report.sampled_self_cosine}`,
      "store OK",
      "",
    ].join("\n")
  );
  return 0;
}

async function cmdServe(argv: string[]): Promise<number> {
  const flags = parseFlags(argv, ["--port", "--model", "--dim"], []);
  const encoder = loadEncoder(
    flags.values.get("--model") ?? "feature-hash-v1",
    intFlag(flags, "--dim", DEFAULT_DIM)
  );
  const server = createServer(encoder);
  const port = await listen(server, intFlag(flags, "--port", 0));
  process.stdout.write(
    `serving ${encoder.modelId} (dim ${encoder.dim}) on http://127.0.0.1:${port}\n`
  );
  await new Promise<void>((resolve) => server.once("close", resolve));
  return 0;
}

export async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  try {
    switch (command) {
      case "export":
        return cmdExport(rest);
      case "validate":
        return cmdValidate(rest);
      case "serve":
        return await cmdServe(rest);
      case "--help":
      case "-h":
      case "help":
        process.stdout.write(USAGE + "\n");
        return 0;
      case undefined:
        process.stderr.write(USAGE + "\n");
        return 1;
      default:
        throw new UsageError(`unknown command '${command}'`);
    }
  } catch (err) {
    if (err instanceof UsageError) {
      process.stderr.write(`error: ${err.message}\n${USAGE}\n`);
      return 1;
    }
    if (err instanceof ModelError) {
      process.stderr.write(`error: ${err.message}\n`);
      return 3;
    }
    if (err instanceof StoreFormatError) {
      process.stderr.write(`error: ${err.message}\n`);
      return 2;
    }
    if (err instanceof Error && "code" in err) {
      // Filesystem errors: missing input, unwritable output, etc.
      process.stderr.write(`error: ${err.message}\n`);
      return 2;
    }
    if (err instanceof RangeError) {
      process.stderr.write(`error: ${err.message}\n`);
      return 2;
    }
    throw err;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === pathToFileURL(process.argv[1]).href;

if (invokedDirectly) {
  main(process.argv.slice(2)).then(
    (code) => {
      process.exitCode = code;
    },
    (err) => {
      process.stderr.write(`internal error: ${err?.stack ?? err}\n`);
      process.exitCode = 70;
    }
  );
}
