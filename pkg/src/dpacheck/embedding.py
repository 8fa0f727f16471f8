"""Sentence features: text encoding, embedding stores, and vector math.

Binary store layout (all integers little-endian, vectors float32):

    magic   4 bytes  b"EMBS"
    version u16      1
    flags   u16      bit0 = token section present, bit1 = vocab section
    dim     u32
    count   u64      number of sentence entries
    hashtag 16 bytes ASCII hash-algorithm tag, NUL-padded ("fnv1a64")
    model   u16 length + UTF-8 model identifier
    count x (u64 content hash, dim x f32), strictly ascending by hash
    [tokens] u64 count; per entry u64 hash, u32 seq_len, seq_len x dim x f32,
             strictly ascending by hash
    [vocab]  u64 count; per entry u16 word byte length, UTF-8 word,
             dim x f32, strictly ascending by encoded word

Sentence entries are keyed by the FNV-1a 64-bit hash of the normalized
sentence text (UTF-8). Any writer producing this layout interoperates with
this reader; offsets in error messages refer to the file start.
"""

from __future__ import annotations

import json
import os
import struct
import time
from dataclasses import dataclass, field

import numpy as np
import requests

from .errors import (
    CapabilityError,
    EmbeddingNotFoundError,
    ExternalServiceError,
    ParseError,
    ValidationError,
)

MAGIC = b"EMBS"
STORE_VERSION = 1
HASH_TAG = "fnv1a64"
FLAG_TOKENS = 0x1
FLAG_VOCAB = 0x2

ENDPOINT_ENV_VAR = "DPACHECK_EMBED_ENDPOINT"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64_MASK = 0xFFFFFFFFFFFFFFFF


def fnv1a64(text: str) -> int:
    """FNV-1a 64-bit hash of the UTF-8 encoding of ``text``."""
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _U64_MASK
    return h


def encode_for_llm(tokens) -> str:
    """Wrap a token sequence in classifier markers for transformer input.

    Accepts token texts or :class:`~dpacheck.preprocess.Token` objects;
    an empty sequence yields ``"[CLS] [SEP]"``.
    """
    texts = [getattr(t, "text", t) for t in tokens]
    inner = " ".join(texts)
    return f"[CLS] {inner} [SEP]" if inner else "[CLS] [SEP]"


def _as_f32_row(values, dim: int, what: str) -> np.ndarray:
    row = np.asarray(values, dtype=np.float32)
    if row.shape != (dim,):
        raise ValidationError(f"{what} has shape {row.shape}, expected ({dim},)")
    if not np.all(np.isfinite(row)):
        raise ValidationError(f"{what} contains non-finite values")
    return row


@dataclass
class EmbeddingStore:
    """Immutable map from sentence-content hashes to embedding vectors.

    ``token_entries`` (per-token sequences for recurrent models) and
    ``vocab`` (word vectors for augmentation) are optional sections.
    """

    dim: int
    model_id: str = ""
    entries: dict[int, np.ndarray] = field(default_factory=dict)
    token_entries: dict[int, np.ndarray] = field(default_factory=dict)
    vocab: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.dim <= 0:
            raise ValidationError(f"store dim must be positive, got {self.dim}")
        self.entries = {
            h: _as_f32_row(v, self.dim, f"vector for {h:#018x}")
            for h, v in self.entries.items()
        }
        fixed_tokens = {}
        for h, seq in self.token_entries.items():
            arr = np.asarray(seq, dtype=np.float32)
            if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] != self.dim:
                raise ValidationError(
                    f"token sequence for {h:#018x} has shape {arr.shape}, "
                    f"expected (seq_len>=1, {self.dim})"
                )
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"token sequence for {h:#018x} is non-finite")
            fixed_tokens[h] = arr
        self.token_entries = fixed_tokens
        self.vocab = {
            w: _as_f32_row(v, self.dim, f"vocab vector for {w!r}")
            for w, v in self.vocab.items()
        }

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def has_tokens(self) -> bool:
        return bool(self.token_entries)

    @property
    def has_vocab(self) -> bool:
        return bool(self.vocab)

    def vector_for_hash(self, content_hash: int) -> np.ndarray:
        try:
            return self.entries[content_hash]
        except KeyError:
            raise EmbeddingNotFoundError(content_hash) from None

    def vector_for_text(self, text: str) -> np.ndarray:
        return self.vector_for_hash(fnv1a64(text))

    def tokens_for_text(self, text: str) -> np.ndarray:
        """Token-level sequence for a sentence, shape (seq_len, dim)."""
        if not self.token_entries:
            raise CapabilityError(
                "store has no token section; fall back to a length-1 "
                "sequence of the sentence vector"
            )
        h = fnv1a64(text)
        try:
            return self.token_entries[h]
        except KeyError:
            raise EmbeddingNotFoundError(h) from None

    def save(self, path: str) -> None:
        flags = (FLAG_TOKENS if self.token_entries else 0) | (
            FLAG_VOCAB if self.vocab else 0
        )
        model = self.model_id.encode("utf-8")
        if len(model) > 0xFFFF:
            raise ValidationError("model_id longer than 65535 bytes")
        tag = HASH_TAG.encode("ascii").ljust(16, b"\x00")

        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<HHIQ", STORE_VERSION, flags, self.dim, len(self.entries)))
            fh.write(tag)
            fh.write(struct.pack("<H", len(model)))
            fh.write(model)
            for h in sorted(self.entries):
                fh.write(struct.pack("<Q", h))
                fh.write(self.entries[h].tobytes())
            if self.token_entries:
                fh.write(struct.pack("<Q", len(self.token_entries)))
                for h in sorted(self.token_entries):
                    seq = self.token_entries[h]
                    fh.write(struct.pack("<QI", h, seq.shape[0]))
                    fh.write(seq.tobytes())
            if self.vocab:
                fh.write(struct.pack("<Q", len(self.vocab)))
                for word in sorted(self.vocab, key=lambda w: w.encode("utf-8")):
                    raw = word.encode("utf-8")
                    fh.write(struct.pack("<H", len(raw)))
                    fh.write(raw)
                    fh.write(self.vocab[word].tobytes())

    @classmethod
    def load(cls, path: str) -> "EmbeddingStore":
        with open(path, "rb") as fh:
            data = fh.read()
        reader = _Reader(data, path)

        magic = reader.take(4, "magic")
        if magic != MAGIC:
            raise ParseError(f"bad magic {magic!r}, expected {MAGIC!r}", path=path)
        version, flags, dim, count = reader.unpack("<HHIQ", "header")
        if version != STORE_VERSION:
            raise ParseError(f"unsupported store version {version}", path=path)
        if dim == 0:
            raise ParseError("store dim must be positive", path=path)
        tag = reader.take(16, "hash tag").rstrip(b"\x00").decode("ascii", "replace")
        if tag != HASH_TAG:
            raise ParseError(f"unsupported hash algorithm {tag!r}", path=path)
        (model_len,) = reader.unpack("<H", "model id length")
        model_id = reader.take(model_len, "model id").decode("utf-8")

        entries: dict[int, np.ndarray] = {}
        previous = -1
        for i in range(count):
            (h,) = reader.unpack("<Q", f"entry {i} hash")
            if h <= previous:
                raise ParseError(
                    f"entry hashes not strictly ascending at index {i} "
                    f"(offset {reader.offset - 8})",
                    path=path,
                )
            previous = h
            entries[h] = reader.vector(dim, f"entry {i} vector")

        token_entries: dict[int, np.ndarray] = {}
        if flags & FLAG_TOKENS:
            (tcount,) = reader.unpack("<Q", "token section count")
            previous = -1
            for i in range(tcount):
                h, seq_len = reader.unpack("<QI", f"token entry {i} header")
                if h <= previous:
                    raise ParseError(
                        f"token hashes not strictly ascending at index {i}", path=path
                    )
                if seq_len == 0:
                    raise ParseError(f"token entry {i} has empty sequence", path=path)
                previous = h
                flat = reader.vector(seq_len * dim, f"token entry {i} sequence")
                token_entries[h] = flat.reshape(seq_len, dim)

        vocab: dict[str, np.ndarray] = {}
        if flags & FLAG_VOCAB:
            (vcount,) = reader.unpack("<Q", "vocab section count")
            previous_word = b""
            for i in range(vcount):
                (word_len,) = reader.unpack("<H", f"vocab entry {i} length")
                raw = reader.take(word_len, f"vocab entry {i} word")
                if i > 0 and raw <= previous_word:
                    raise ParseError(
                        f"vocab words not strictly ascending at index {i}", path=path
                    )
                previous_word = raw
                vocab[raw.decode("utf-8")] = reader.vector(dim, f"vocab entry {i} vector")

        if reader.offset != len(data):
            raise ParseError(
                f"{len(data) - reader.offset} trailing bytes after offset "
                f"{reader.offset}",
                path=path,
            )
        return cls(
            dim=dim,
            model_id=model_id,
            entries=entries,
            token_entries=token_entries,
            vocab=vocab,
        )

    def describe(self) -> dict:
        return {
            "dim": self.dim,
            "model_id": self.model_id,
            "hash_tag": HASH_TAG,
            "sentence_count": len(self.entries),
            "token_count": len(self.token_entries),
            "vocab_count": len(self.vocab),
        }


class _Reader:
    """Bounds-checked cursor over store bytes; errors carry the offset."""

    def __init__(self, data: bytes, path: str):
        self.data = data
        self.path = path
        self.offset = 0

    def take(self, n: int, what: str) -> bytes:
        if self.offset + n > len(self.data):
            raise ParseError(
                f"truncated file: {what} needs {n} bytes at offset {self.offset}",
                path=self.path,
            )
        out = self.data[self.offset : self.offset + n]
        self.offset += n
        return out

    def unpack(self, fmt: str, what: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def vector(self, n_floats: int, what: str) -> np.ndarray:
        start = self.offset
        raw = self.take(4 * n_floats, what)
        arr = np.frombuffer(raw, dtype="<f4").astype(np.float32)
        if not np.all(np.isfinite(arr)):
            raise ParseError(
                f"{what} contains non-finite values at offset {start}", path=self.path
            )
        return arr


def validate_store(path: str) -> dict:
    """Fully parse a store file; returns its description or raises."""
    store = EmbeddingStore.load(path)
    report = store.describe()
    report["file_size"] = os.path.getsize(path)
    return report


class FileProvider:
    """Deterministic provider backed by a loaded store."""

    def __init__(self, store: EmbeddingStore):
        self.store = store

    @property
    def dim(self) -> int:
        return self.store.dim

    def embed(self, texts: list[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.store.dim), dtype=np.float32)
        return np.stack([self.store.vector_for_text(t) for t in texts])


class HttpProvider:
    """Remote embedding service client.

    Contract: ``POST endpoint`` with body ``{"texts": [string]}`` returns
    ``{"dim": int, "vectors": [[real]]}``. Requests are batched at
    ``max_batch`` texts; transient failures are retried with exponential
    backoff before raising. The endpoint may come from the
    ``DPACHECK_EMBED_ENDPOINT`` environment variable.
    """

    def __init__(
        self,
        endpoint: str | None = None,
        timeout: float = 30.0,
        max_batch: int = 64,
        retries: int = 3,
        backoff_base: float = 0.5,
        session=None,
    ):
        self.endpoint = endpoint or os.environ.get(ENDPOINT_ENV_VAR)
        if not self.endpoint:
            raise ValidationError(
                f"no embedding endpoint: pass one or set {ENDPOINT_ENV_VAR}"
            )
        if max_batch < 1 or max_batch > 64:
            raise ValidationError("max_batch must be in 1..64")
        self.timeout = timeout
        self.max_batch = max_batch
        self.retries = retries
        self.backoff_base = backoff_base
        self.session = session or requests.Session()
        self._dim: int | None = None

    @property
    def dim(self) -> int:
        if self._dim is None:
            self.embed(["dimension probe"])
        return self._dim

    def embed(self, texts: list[str]) -> np.ndarray:
        rows: list[np.ndarray] = []
        for start in range(0, len(texts), self.max_batch):
            batch = texts[start : start + self.max_batch]
            payload = self._post_with_retry(batch)
            dim = int(payload.get("dim", 0))
            vectors = payload.get("vectors")
            if dim <= 0 or not isinstance(vectors, list) or len(vectors) != len(batch):
                raise ExternalServiceError(
                    f"malformed embedding response from {self.endpoint}"
                )
            if self._dim is None:
                self._dim = dim
            elif dim != self._dim:
                raise ExternalServiceError(
                    f"service dim changed mid-session: {self._dim} then {dim}"
                )
            for i, vec in enumerate(vectors):
                rows.append(_as_f32_row(vec, dim, f"service vector {start + i}"))
        if not rows:
            return np.zeros((0, self._dim or 0), dtype=np.float32)
        return np.stack(rows)

    def _post_with_retry(self, batch: list[str]) -> dict:
        last_error = None
        for attempt in range(self.retries):
            if attempt:
                time.sleep(self.backoff_base * 2 ** (attempt - 1))
            try:
                response = self.session.post(
                    self.endpoint, json={"texts": batch}, timeout=self.timeout
                )
                if response.status_code != 200:
                    last_error = f"HTTP {response.status_code}"
                    continue
                return response.json()
            except (requests.RequestException, json.JSONDecodeError, ValueError) as exc:
                last_error = str(exc)
        raise ExternalServiceError(
            f"embedding service failed after {self.retries} attempts: {last_error}"
        )


def embed(provider, sentence_text: str) -> np.ndarray:
    """Single-sentence convenience wrapper over a provider."""
    return provider.embed([sentence_text])[0]


def cosine(a, b) -> float:
    """Cosine similarity, clamped to [-1, 1] against rounding."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"dim mismatch: {a.shape} vs {b.shape}")
    # Pre-scaling keeps norms of tiny/huge vectors from under/overflowing.
    ma, mb = np.max(np.abs(a)), np.max(np.abs(b))
    if ma == 0.0 or mb == 0.0:
        raise ValidationError("cosine similarity undefined for a zero vector")
    a, b = a / ma, b / mb
    denominator = np.linalg.norm(a) * np.linalg.norm(b)
    return float(np.clip(np.dot(a, b) / denominator, -1.0, 1.0))


def nearest_neighbors(
    store: EmbeddingStore, query, k: int, exclude: frozenset[int] = frozenset()
) -> list[tuple[int, float]]:
    """Top-k store entries by cosine similarity, descending.

    Exhaustive scan; ties break toward the smaller hash. Excluded hashes and
    zero vectors are skipped.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    query = np.asarray(query, dtype=np.float64)
    scored = []
    for h in sorted(store.entries):
        if h in exclude:
            continue
        v = store.entries[h]
        if not np.any(v):
            continue
        scored.append((h, cosine(query, v)))
    scored.sort(key=lambda t: (-t[1], t[0]))
    return scored[:k]
