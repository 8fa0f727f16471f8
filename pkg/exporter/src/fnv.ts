/**
 * FNV-1a 64-bit hash over the UTF-8 encoding of a string.
 *
 * This is the content-hash keying sentence entries in .embs store files;
 * any writer must produce bit-identical hashes for interoperability.
 */

const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;
const U64_MASK = 0xffffffffffffffffn;

export function fnv1a64(text: string): bigint {
  let hash = FNV_OFFSET;
  for (const byte of Buffer.from(text, "utf8")) {
    hash = ((hash ^ BigInt(byte)) * FNV_PRIME) & U64_MASK;
  }
  return hash;
}
