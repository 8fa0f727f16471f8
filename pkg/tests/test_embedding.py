"""Embedding store format, providers, hashing, and vector math tests."""

import numpy as np
import pytest
import requests
from hypothesis import given
from hypothesis import strategies as st

from dpacheck.embedding import (
    ENDPOINT_ENV_VAR,
    EmbeddingStore,
    FileProvider,
    HttpProvider,
    cosine,
    embed,
    encode_for_llm,
    fnv1a64,
    nearest_neighbors,
    validate_store,
)
from dpacheck.errors import (
    CapabilityError,
    EmbeddingNotFoundError,
    ExternalServiceError,
    ParseError,
    ValidationError,
)
from dpacheck.preprocess import tokenize


class TestFnv1a64:
    def test_published_vectors(self):
        # Reference values from the FNV authors' test suite.
        assert fnv1a64("") == 0xCBF29CE484222325
        assert fnv1a64("a") == 0xAF63DC4C8601EC8C
        assert fnv1a64("foobar") == 0x85944171F73967E8

    def test_utf8_input(self):
        assert fnv1a64("é") != fnv1a64("e")

    @given(st.text(max_size=100))
    def test_fits_in_64_bits(self, text):
        assert 0 <= fnv1a64(text) < 2**64


class TestEncodeForLlm:
    def test_wraps_token_texts(self):
        assert encode_for_llm(["hello", "world"]) == "[CLS] hello world [SEP]"

    def test_empty_sequence(self):
        assert encode_for_llm([]) == "[CLS] [SEP]"

    def test_punctuation_is_its_own_token(self):
        assert encode_for_llm(["PROCESSOR", "shall", "."]) == "[CLS] PROCESSOR shall . [SEP]"

    def test_accepts_tokenizer_output(self):
        assert encode_for_llm(tokenize("Data only.")) == "[CLS] Data only . [SEP]"


class TestCosine:
    def test_identity(self):
        v = [0.3, -1.2, 4.0]
        assert cosine(v, v) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0)

    def test_hand_computed_value(self):
        assert cosine([1.0, 2.0], [2.0, 1.0]) == pytest.approx(0.8)

    def test_zero_vector_is_an_error(self):
        with pytest.raises(ValidationError):
            cosine([0.0, 0.0], [1.0, 0.0])

    def test_dim_mismatch_is_an_error(self):
        with pytest.raises(ValidationError):
            cosine([1.0], [1.0, 2.0])

    @given(
        st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=8),
        st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=8),
    )
    def test_symmetry_and_range(self, a, b):
        n = min(len(a), len(b))
        a, b = np.array(a[:n]), np.array(b[:n])
        if not np.any(a) or not np.any(b):
            return
        assert cosine(a, b) == pytest.approx(cosine(b, a))
        assert -1.0 <= cosine(a, b) <= 1.0

    @given(
        st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3),
        st.floats(0.01, 100.0),
    )
    def test_scale_invariance(self, a, scale):
        a = np.array(a)
        if not np.any(a):
            return
        # Subnormal components underflow (or lose precision) when scaled,
        # which genuinely changes the direction of the vector.
        if np.any((a != 0.0) & (np.abs(a) < 1e-300)):
            return
        b = np.array([1.0, -2.0, 0.5])
        assert cosine(scale * a, b) == pytest.approx(cosine(a, b), abs=1e-9)


def toy_store(dim=4, n=6, seed=0, tokens=False, vocab=False):
    rng = np.random.Generator(np.random.PCG64(seed))
    entries = {
        fnv1a64(f"sentence {i}"): rng.normal(size=dim).astype(np.float32)
        for i in range(n)
    }
    token_entries = {}
    if tokens:
        token_entries = {
            h: rng.normal(size=(3 + i % 2, dim)).astype(np.float32)
            for i, h in enumerate(sorted(entries))
        }
    words = {}
    if vocab:
        words = {
            w: rng.normal(size=dim).astype(np.float32)
            for w in ["alpha", "beta", "gamma", "zulu"]
        }
    return EmbeddingStore(
        dim=dim,
        model_id="toy-model",
        entries=entries,
        token_entries=token_entries,
        vocab=words,
    )


class TestStoreRoundTrip:
    def test_sentence_vectors_bit_exact(self, tmp_path):
        store = toy_store()
        path = str(tmp_path / "toy.embs")
        store.save(path)
        loaded = EmbeddingStore.load(path)
        assert loaded.dim == store.dim
        assert loaded.model_id == "toy-model"
        assert set(loaded.entries) == set(store.entries)
        for h, v in store.entries.items():
            assert loaded.entries[h].tobytes() == v.tobytes()

    def test_optional_sections_round_trip(self, tmp_path):
        store = toy_store(tokens=True, vocab=True)
        path = str(tmp_path / "toy.embs")
        store.save(path)
        loaded = EmbeddingStore.load(path)
        assert loaded.has_tokens and loaded.has_vocab
        for h, seq in store.token_entries.items():
            assert loaded.token_entries[h].tobytes() == seq.tobytes()
        for w, v in store.vocab.items():
            assert loaded.vocab[w].tobytes() == v.tobytes()

    def test_save_is_byte_deterministic(self, tmp_path):
        a, b = str(tmp_path / "a.embs"), str(tmp_path / "b.embs")
        toy_store(tokens=True, vocab=True).save(a)
        toy_store(tokens=True, vocab=True).save(b)
        assert open(a, "rb").read() == open(b, "rb").read()

    def test_validate_store_describes_content(self, tmp_path):
        path = str(tmp_path / "toy.embs")
        toy_store(n=5, tokens=True, vocab=True).save(path)
        report = validate_store(path)
        assert report["sentence_count"] == 5
        assert report["token_count"] == 5
        assert report["vocab_count"] == 4
        assert report["hash_tag"] == "fnv1a64"
        assert report["dim"] == 4


class TestStoreValidation:
    def test_vector_length_must_match_dim(self):
        with pytest.raises(ValidationError):
            EmbeddingStore(dim=4, entries={1: np.zeros(8, dtype=np.float32)})

    def test_non_finite_vector_rejected(self):
        with pytest.raises(ValidationError):
            EmbeddingStore(dim=2, entries={1: np.array([np.nan, 0.0])})

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.embs"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(ParseError, match="magic"):
            EmbeddingStore.load(str(path))

    def test_truncated_file_reports_offset(self, tmp_path):
        path = str(tmp_path / "toy.embs")
        toy_store().save(path)
        blob = open(path, "rb").read()
        cut = tmp_path / "cut.embs"
        cut.write_bytes(blob[: len(blob) - 7])
        with pytest.raises(ParseError, match="offset"):
            EmbeddingStore.load(str(cut))

    def test_trailing_bytes_rejected(self, tmp_path):
        path = str(tmp_path / "toy.embs")
        toy_store().save(path)
        blob = open(path, "rb").read()
        padded = tmp_path / "padded.embs"
        padded.write_bytes(blob + b"\x00\x00")
        with pytest.raises(ParseError, match="trailing"):
            EmbeddingStore.load(str(padded))

    def test_unsorted_hashes_rejected(self, tmp_path):
        path = str(tmp_path / "toy.embs")
        toy_store(dim=2, n=2).save(path)
        blob = bytearray(open(path, "rb").read())
        # Swap the two fixed-size records that follow the 43-byte header.
        header = 4 + 16 + 16 + 2 + len("toy-model")
        rec = 8 + 2 * 4
        blob[header : header + rec], blob[header + rec : header + 2 * rec] = (
            blob[header + rec : header + 2 * rec],
            blob[header : header + rec],
        )
        bad = tmp_path / "unsorted.embs"
        bad.write_bytes(bytes(blob))
        with pytest.raises(ParseError, match="ascending"):
            EmbeddingStore.load(str(bad))

    def test_missing_hash_error_carries_hash(self):
        store = toy_store()
        with pytest.raises(EmbeddingNotFoundError, match="0x") as err:
            store.vector_for_text("never embedded")
        assert err.value.content_hash == fnv1a64("never embedded")

    def test_token_lookup_without_section_names_fallback(self):
        store = toy_store(tokens=False)
        with pytest.raises(CapabilityError, match="length-1"):
            store.tokens_for_text("sentence 0")


class TestNearestNeighbors:
    def test_exact_match_first(self):
        x, y = fnv1a64("x"), fnv1a64("y")
        store = EmbeddingStore(dim=2, entries={x: [1.0, 0.0], y: [0.0, 1.0]})
        assert nearest_neighbors(store, [1.0, 0.0], k=1) == [(x, pytest.approx(1.0))]

    def test_exclusion_is_respected(self):
        x, y = fnv1a64("x"), fnv1a64("y")
        store = EmbeddingStore(dim=2, entries={x: [1.0, 0.0], y: [0.0, 1.0]})
        result = nearest_neighbors(store, [1.0, 0.0], k=1, exclude=frozenset({x}))
        assert result == [(y, pytest.approx(0.0))]

    def test_matches_brute_force_scan(self):
        rng = np.random.Generator(np.random.PCG64(5))
        entries = {int(h): rng.normal(size=6) for h in rng.integers(0, 2**63, size=10)}
        store = EmbeddingStore(dim=6, entries=entries)
        query = rng.normal(size=6)

        def brute(q, k):
            sims = []
            for h, v in entries.items():
                v = np.asarray(v, dtype=np.float64)
                sims.append(
                    (h, float(q @ v / (np.linalg.norm(q) * np.linalg.norm(v))))
                )
            sims.sort(key=lambda t: (-t[1], t[0]))
            return sims[:k]

        got = nearest_neighbors(store, query, k=3)
        expected = brute(query, 3)
        assert [h for h, _ in got] == [h for h, _ in expected]
        for (_, s1), (_, s2) in zip(got, expected):
            assert s1 == pytest.approx(s2, abs=1e-6)

    def test_empty_store_returns_empty(self):
        store = toy_store(n=1)
        store.entries.clear()
        assert nearest_neighbors(store, [1.0, 0.0, 0.0, 0.0], k=3) == []


class TestFileProvider:
    def test_lookup_identity(self):
        store = toy_store()
        provider = FileProvider(store)
        v = embed(provider, "sentence 0")
        assert v.tobytes() == store.entries[fnv1a64("sentence 0")].tobytes()

    def test_repeated_calls_identical(self):
        provider = FileProvider(toy_store())
        a = provider.embed(["sentence 1", "sentence 2"])
        b = provider.embed(["sentence 1", "sentence 2"])
        assert a.tobytes() == b.tobytes()

    def test_missing_sentence_raises(self):
        with pytest.raises(EmbeddingNotFoundError):
            FileProvider(toy_store()).embed(["unknown"])


class FakeResponse:
    def __init__(self, status_code=200, payload=None):
        self.status_code = status_code
        self._payload = payload

    def json(self):
        if self._payload is None:
            raise ValueError("no JSON")
        return self._payload


class FakeSession:
    def __init__(self, handler):
        self.handler = handler
        self.batches = []

    def post(self, url, json=None, timeout=None):
        self.batches.append(json["texts"])
        return self.handler(json["texts"])


def ok_handler(dim=3):
    def handler(texts):
        return FakeResponse(payload={"dim": dim, "vectors": [[0.1] * dim for _ in texts]})

    return handler


class TestHttpProvider:
    def test_batches_capped_at_64(self):
        session = FakeSession(ok_handler())
        provider = HttpProvider(endpoint="http://svc/embed", session=session)
        out = provider.embed([f"s{i}" for i in range(130)])
        assert out.shape == (130, 3)
        assert [len(b) for b in session.batches] == [64, 64, 2]

    def test_persistent_failure_raises_after_retries(self):
        session = FakeSession(lambda texts: FakeResponse(status_code=503))
        provider = HttpProvider(
            endpoint="http://svc/embed", session=session, retries=3, backoff_base=0.0
        )
        with pytest.raises(ExternalServiceError, match="3 attempts"):
            provider.embed(["x"])
        assert len(session.batches) == 3

    def test_recovers_after_transient_failure(self):
        state = {"calls": 0}

        def flaky(texts):
            state["calls"] += 1
            if state["calls"] == 1:
                raise requests.ConnectionError("down")
            return ok_handler()(texts)

        provider = HttpProvider(
            endpoint="http://svc/embed",
            session=FakeSession(flaky),
            backoff_base=0.0,
        )
        assert provider.embed(["x"]).shape == (1, 3)

    def test_dim_change_mid_session_rejected(self):
        state = {"calls": 0}

        def shifty(texts):
            state["calls"] += 1
            dim = 3 if state["calls"] == 1 else 5
            return FakeResponse(payload={"dim": dim, "vectors": [[0.0] * dim] * len(texts)})

        provider = HttpProvider(endpoint="http://svc/embed", session=FakeSession(shifty))
        provider.embed(["a"])
        with pytest.raises(ExternalServiceError, match="dim"):
            provider.embed(["b"])

    def test_endpoint_from_environment(self, monkeypatch):
        monkeypatch.setenv(ENDPOINT_ENV_VAR, "http://env/embed")
        provider = HttpProvider(session=FakeSession(ok_handler()))
        assert provider.endpoint == "http://env/embed"

    def test_no_endpoint_anywhere_is_an_error(self, monkeypatch):
        monkeypatch.delenv(ENDPOINT_ENV_VAR, raising=False)
        with pytest.raises(ValidationError, match=ENDPOINT_ENV_VAR):
            HttpProvider()
