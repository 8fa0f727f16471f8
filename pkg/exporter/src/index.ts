export { fnv1a64 } from "./fnv.js";
export {
  DEFAULT_DIM,
  HashProjectionEncoder,
  loadEncoder,
  ModelError,
  tokenize,
  type Encoder,
} from "./encoder.js";
export {
  cosine,
  FLAG_TOKENS,
  FLAG_VOCAB,
  HASH_TAG,
  MAGIC,
  parseStore,
  serializeStore,
  STORE_VERSION,
  StoreFormatError,
  validateStore,
  writeStore,
  type StoreData,
  type StoreReport,
} from "./store.js";
export { readSentences, runExport, type ExportJob, type ExportSummary } from "./export.js";
export { createServer, listen, MAX_TEXTS_PER_REQUEST } from "./server.js";
export { main } from "./cli.js";
