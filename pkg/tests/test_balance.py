"""Tests for resampling, augmentation, and the variant recipe system."""

from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpacheck.balance import (
    BUILTIN_RECIPES,
    NOISE_OPS,
    AugmentStep,
    AugmentedSentence,
    Dataset,
    Example,
    IdentityMtClient,
    OversampleStep,
    Resources,
    SynonymLexicon,
    UndersampleStep,
    VariantRecipe,
    augment_backtranslate,
    augment_embedding,
    augment_noise,
    augment_synonym,
    build_variant,
    corpus_vocabulary,
    dataset_from_sentences,
    is_content_word,
    label_for,
    random_oversample,
    random_undersample,
    sentence_rng,
    stopwords,
    under_oversample,
)
from dpacheck.classifiers import OTHER_LABEL, TaskSpec
from dpacheck.corpus import Sentence
from dpacheck.embedding import EmbeddingStore, cosine
from dpacheck.errors import (
    CapabilityError,
    ExternalServiceError,
    ParseError,
    ValidationError,
)

BINARY = TaskSpec.binary("PO1")


def sent(i, text, labels=()):
    return Sentence("D1", i, text, frozenset(labels))


def make_dataset(counts, task):
    """Dataset with ``counts[label]`` examples per label, unique texts."""
    examples = []
    i = 0
    for label, n in counts.items():
        for _ in range(n):
            labels = () if label == OTHER_LABEL else (label,)
            s = sent(i, f"sentence number {chr(97 + i % 26)}{i} here", labels)
            examples.append(Example(s.text, label, s))
            i += 1
    return Dataset(task, tuple(examples))


def texts_by_label(dataset, label):
    return Counter(e.text for e in dataset.examples if e.label == label)


class TestVocabularyHelpers:
    def test_stopwords_loaded(self):
        words = stopwords()
        assert "the" in words and "shall" in words
        assert "processor" not in words

    def test_content_word(self):
        assert is_content_word("processor")
        assert not is_content_word("the")
        assert not is_content_word("Art32")
        assert not is_content_word("3.2")

    def test_sentence_rng_is_order_free(self):
        a = sentence_rng(7, "some text", "NI-swap").integers(0, 1000, 5)
        b = sentence_rng(7, "some text", "NI-swap").integers(0, 1000, 5)
        assert np.array_equal(a, b)
        c = sentence_rng(7, "some text", "NI-delete").integers(0, 1000, 5)
        assert not np.array_equal(a, c)

    def test_sentence_rng_rejects_negative_seed(self):
        with pytest.raises(ValidationError):
            sentence_rng(-1, "x", "op")

    def test_corpus_vocabulary(self):
        sentences = [sent(0, "alpha beta gamma."), sent(1, "beta delta 42")]
        assert corpus_vocabulary(sentences) == ("alpha", "beta", "delta")


class TestLabeling:
    def test_binary_label(self):
        assert label_for(sent(0, "x", ["PO1"]), BINARY) == "PO1"
        assert label_for(sent(0, "x", ["PO2"]), BINARY) == OTHER_LABEL
        assert label_for(sent(0, "x"), BINARY) == OTHER_LABEL

    def test_multiclass_first_catalog_class_wins(self):
        task = TaskSpec.multiclass(["PO1", "PO2", "PO3"])
        assert label_for(sent(0, "x", ["PO3", "PO2"]), task) == "PO2"
        assert label_for(sent(0, "x", ["PO9"]), task) == OTHER_LABEL

    def test_dataset_from_sentences(self):
        task = TaskSpec.multiclass(["PO1", "PO2"])
        sentences = [
            sent(0, "a b", ["PO1"]),
            sent(1, "c d", ["PO2"]),
            sent(2, "e f"),
        ]
        ds = dataset_from_sentences(sentences, task)
        assert ds.class_counts() == {"PO1": 1, "PO2": 1, OTHER_LABEL: 1}
        assert len(ds.positives()) == 2

    def test_dataset_rejects_foreign_labels(self):
        s = sent(0, "a")
        with pytest.raises(ValidationError, match="not a class"):
            Dataset(BINARY, (Example(s.text, "PO9", s),))


class TestUndersample:
    def test_binary_majority_shrinks_to_positive_count(self):
        ds = make_dataset({"PO1": 187, OTHER_LABEL: 20_000}, BINARY)
        out = random_undersample(ds, seed=3)
        assert out.class_counts() == {"PO1": 187, OTHER_LABEL: 187}
        assert texts_by_label(out, "PO1") == texts_by_label(ds, "PO1")

    def test_multiclass_other_shrinks_to_largest_minority(self):
        task = TaskSpec.multiclass(["PO1", "PO6"])
        ds = make_dataset({OTHER_LABEL: 1000, "PO6": 200, "PO1": 50}, task)
        out = random_undersample(ds, seed=0)
        assert out.class_counts() == {"PO1": 50, "PO6": 200, OTHER_LABEL: 200}

    def test_balanced_input_unchanged(self):
        ds = make_dataset({"PO1": 5, OTHER_LABEL: 5}, BINARY)
        assert random_undersample(ds, seed=0) is ds

    def test_small_majority_untouched(self):
        ds = make_dataset({"PO1": 9, OTHER_LABEL: 4}, BINARY)
        assert random_undersample(ds, seed=0) is ds

    def test_kept_examples_preserve_order(self):
        ds = make_dataset({OTHER_LABEL: 40, "PO1": 6}, BINARY)
        out = random_undersample(ds, seed=1)
        positions = {id(e): i for i, e in enumerate(ds.examples)}
        kept = [positions[id(e)] for e in out.examples]
        assert kept == sorted(kept)

    def test_deterministic_and_seed_sensitive(self):
        ds = make_dataset({OTHER_LABEL: 60, "PO1": 5}, BINARY)
        first = random_undersample(ds, seed=11)
        again = random_undersample(ds, seed=11)
        assert [e.text for e in first.examples] == [e.text for e in again.examples]
        other = random_undersample(ds, seed=12)
        assert [e.text for e in first.examples] != [e.text for e in other.examples]

    def test_empty_provision_class_rejected(self):
        task = TaskSpec.multiclass(["PO1", "PO2"])
        ds = make_dataset({OTHER_LABEL: 10, "PO1": 3, "PO2": 0}, task)
        with pytest.raises(ValidationError, match="PO2"):
            random_undersample(ds, seed=0)

    @given(
        n_other=st.integers(0, 60),
        minorities=st.lists(st.integers(1, 20), min_size=1, max_size=4),
        seed=st.integers(0, 2**31),
    )
    @settings(max_examples=50)
    def test_count_law_and_minority_preservation(self, n_other, minorities, seed):
        task = TaskSpec.multiclass([f"PO{i + 1}" for i in range(len(minorities))])
        counts = {f"PO{i + 1}": m for i, m in enumerate(minorities)}
        counts[OTHER_LABEL] = n_other
        ds = make_dataset(counts, task)
        out = random_undersample(ds, seed=seed)
        target = max(minorities)
        expected = dict(counts, **{OTHER_LABEL: min(n_other, target)})
        assert out.class_counts() == expected
        for label in counts:
            if label != OTHER_LABEL:
                assert texts_by_label(out, label) == texts_by_label(ds, label)
        kept = Counter(e.text for e in out.examples)
        full = Counter(e.text for e in ds.examples)
        assert all(full[t] >= c for t, c in kept.items())


class TestOversample:
    def test_minorities_rise_to_majority(self):
        task = TaskSpec.multiclass(["PO1", "PO2"])
        ds = make_dataset({OTHER_LABEL: 1000, "PO1": 50, "PO2": 30}, task)
        out = random_oversample(ds, seed=0)
        assert out.class_counts() == {
            "PO1": 1000, "PO2": 1000, OTHER_LABEL: 1000,
        }
        assert out.examples[: len(ds.examples)] == ds.examples

    def test_balanced_input_unchanged(self):
        ds = make_dataset({"PO1": 4, OTHER_LABEL: 4}, BINARY)
        assert random_oversample(ds, seed=0) is ds

    def test_duplicates_counted_exhaustively(self):
        ds = make_dataset({OTHER_LABEL: 3, "PO1": 1}, BINARY)
        out = random_oversample(ds, seed=5)
        assert out.class_counts() == {"PO1": 3, OTHER_LABEL: 3}
        positive_texts = texts_by_label(out, "PO1")
        assert len(positive_texts) == 1
        assert set(positive_texts.values()) == {3}
        assert texts_by_label(out, OTHER_LABEL) == texts_by_label(ds, OTHER_LABEL)

    def test_duplicates_come_from_originals(self):
        task = TaskSpec.multiclass(["PO1", "PO2"])
        ds = make_dataset({OTHER_LABEL: 9, "PO1": 4, "PO2": 2}, task)
        out = random_oversample(ds, seed=7)
        for label in ("PO1", "PO2"):
            original = set(texts_by_label(ds, label))
            assert set(texts_by_label(out, label)) == original

    def test_empty_class_rejected(self):
        ds = make_dataset({"PO1": 3, OTHER_LABEL: 0}, BINARY)
        with pytest.raises(ValidationError, match="other"):
            random_oversample(ds, seed=0)

    @given(
        counts=st.lists(st.integers(1, 25), min_size=2, max_size=5),
        seed=st.integers(0, 2**31),
    )
    @settings(max_examples=50)
    def test_count_law(self, counts, seed):
        task = TaskSpec.multiclass([f"PO{i + 1}" for i in range(len(counts) - 1)])
        labeled = {f"PO{i + 1}": c for i, c in enumerate(counts[:-1])}
        labeled[OTHER_LABEL] = counts[-1]
        ds = make_dataset(labeled, task)
        out = random_oversample(ds, seed=seed)
        majority = max(counts)
        assert set(out.class_counts().values()) == {majority}
        assert Counter(e.text for e in ds.examples) <= Counter(
            e.text for e in out.examples
        )


class TestUnderOversample:
    def test_all_classes_settle_at_largest_minority(self):
        task = TaskSpec.multiclass(["PO1", "PO2", "PO6"])
        ds = make_dataset(
            {OTHER_LABEL: 1000, "PO6": 200, "PO1": 50, "PO2": 30}, task
        )
        out = under_oversample(ds, seed=0)
        assert out.class_counts() == {
            "PO1": 200, "PO2": 200, "PO6": 200, OTHER_LABEL: 200,
        }

    def test_already_balanced_unchanged(self):
        task = TaskSpec.multiclass(["PO6"])
        ds = make_dataset({OTHER_LABEL: 10, "PO6": 10}, task)
        out = under_oversample(ds, seed=0)
        assert out.class_counts() == ds.class_counts()
        assert [e.text for e in out.examples] == [e.text for e in ds.examples]

    def test_binary_task_rejected(self):
        ds = make_dataset({"PO1": 2, OTHER_LABEL: 5}, BINARY)
        with pytest.raises(ValidationError, match="multiclass"):
            under_oversample(ds, seed=0)

    @given(
        minorities=st.lists(st.integers(1, 15), min_size=1, max_size=4),
        n_other=st.integers(1, 50),
        seed=st.integers(0, 2**31),
    )
    @settings(max_examples=50)
    def test_count_law(self, minorities, n_other, seed):
        task = TaskSpec.multiclass([f"PO{i + 1}" for i in range(len(minorities))])
        counts = {f"PO{i + 1}": m for i, m in enumerate(minorities)}
        counts[OTHER_LABEL] = n_other
        out = under_oversample(make_dataset(counts, task), seed=seed)
        assert set(out.class_counts().values()) == {max(minorities)}


class TestSynonymLexicon:
    def test_from_file(self, tmp_path):
        path = tmp_path / "wordlist.tsv"
        path.write_text("delete\terase, remove\nData\tinformation\n")
        lex = SynonymLexicon.from_file(path)
        assert lex.source_name == "wordlist"
        assert lex.entries == {
            "delete": ("erase", "remove"), "data": ("information",),
        }

    def test_missing_tab_reports_line(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("delete\terase\nnot a lexicon line\n")
        with pytest.raises(ParseError, match=":2:"):
            SynonymLexicon.from_file(path)

    def test_duplicate_word_rejected(self, tmp_path):
        path = tmp_path / "dup.tsv"
        path.write_text("delete\terase\ndelete\tremove\n")
        with pytest.raises(ParseError, match="duplicate"):
            SynonymLexicon.from_file(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.tsv"
        path.write_text("\n# only a comment\n")
        with pytest.raises(ParseError, match="no entries"):
            SynonymLexicon.from_file(path)

    def test_self_only_entry_rejected(self):
        with pytest.raises(ValidationError, match="itself"):
            SynonymLexicon("s", {"big": ("big",)})

    def test_self_synonyms_stripped(self):
        lex = SynonymLexicon("s", {"big": ("big", "large")})
        assert lex.entries["big"] == ("large",)


class TestAugmentSynonym:
    LEX = SynonymLexicon("toy", {"delete": ("erase",)})

    def test_replaces_known_content_word(self):
        s = sent(0, "processor shall delete data", ["PO1"])
        result = augment_synonym([s], [self.LEX], seed=0)
        assert [v.text for v in result.variants] == ["processor shall erase data"]
        assert result.variants[0].method == "SR"
        assert result.variants[0].gold_labels == frozenset({"PO1"})
        assert result.dropped == 0

    def test_one_variant_per_sentence_per_lexicon(self):
        other = SynonymLexicon("alt", {"data": ("records",)})
        sentences = [
            sent(i, f"processor shall delete data batch {chr(97 + i)}", ["PO1"])
            for i in range(3)
        ]
        result = augment_synonym(sentences, [self.LEX, other], seed=1)
        assert len(result.variants) == 6
        assert result.dropped == 0
        sources = Counter(v.params[0] for v in result.variants)
        assert sources == {"toy": 3, "alt": 3}

    def test_no_hit_drops_and_counts(self):
        sentences = [
            sent(0, "processor shall delete data", ["PO1"]),
            sent(1, "nothing matches here", ["PO1"]),
        ]
        result = augment_synonym(sentences, [self.LEX], seed=0)
        assert len(result.variants) == 1
        assert result.dropped == 1

    def test_stopwords_never_replaced(self):
        lex = SynonymLexicon("s", {"the": ("a",)})
        result = augment_synonym([sent(0, "the processor acts", ["PO1"])], [lex], 0)
        assert result.variants == []
        assert result.dropped == 1

    def test_replaces_at_most_two_words(self):
        lex = SynonymLexicon(
            "s",
            {
                "processor": ("handler",),
                "delete": ("erase",),
                "data": ("records",),
            },
        )
        s = sent(0, "processor must delete data", ["PO1"])
        result = augment_synonym([s], [lex], seed=0)
        (variant,) = result.variants
        changed = sum(
            a != b for a, b in zip(s.text.split(), variant.text.split())
        )
        assert changed == 2
        assert len(variant.params[1]) == 2

    def test_case_preserved(self):
        s = sent(0, "Delete the data now", ["PO1"])
        result = augment_synonym([s], [self.LEX], seed=0)
        assert result.variants[0].text == "Erase the data now"

    def test_deterministic(self):
        lex = SynonymLexicon("s", {"delete": ("erase", "remove", "purge")})
        s = sent(0, "please delete everything", ["PO1"])
        first = augment_synonym([s], [lex], seed=9).variants[0].text
        assert augment_synonym([s], [lex], seed=9).variants[0].text == first

    def test_requires_a_lexicon(self):
        with pytest.raises(ValidationError, match="lexicon"):
            augment_synonym([sent(0, "a b", ["PO1"])], [], seed=0)


def vocab_store(words_to_vectors, dim=3):
    return EmbeddingStore(
        dim=dim,
        model_id="toy",
        vocab={w: np.asarray(v, dtype=np.float32) for w, v in words_to_vectors.items()},
    )


class TestAugmentEmbedding:
    def test_requires_vocabulary_section(self):
        store = EmbeddingStore(dim=3, model_id="toy")
        with pytest.raises(CapabilityError, match="word-vector"):
            augment_embedding([sent(0, "a b", ["PO1"])], store)

    def test_matches_brute_force_neighbor(self):
        rng = np.random.default_rng(4)
        words = ["alpha", "bravo", "charlie", "delta", "processor"]
        store = vocab_store({w: rng.normal(size=3) for w in words})
        s = sent(0, "the processor responds", ["PO1"])
        result = augment_embedding([s], store, variants_per_sentence=3, seed=2)
        assert len(result.variants) == 3
        best = min(
            (w for w in words if w != "processor"),
            key=lambda w: (-cosine(store.vocab["processor"], store.vocab[w]), w),
        )
        for variant in result.variants:
            assert variant.text == f"the {best} responds"
            assert variant.params[1:] == ("processor", best)

    def test_variant_count_and_determinism(self):
        rng = np.random.default_rng(1)
        store = vocab_store(
            {w: rng.normal(size=3) for w in ["records", "data", "files", "logs"]}
        )
        sentences = [
            sent(0, "erase data and records now", ["PO1"]),
            sent(1, "archive files with logs", ["PO1"]),
        ]
        first = augment_embedding(sentences, store, seed=3)
        second = augment_embedding(sentences, store, seed=3)
        assert len(first.variants) == 6
        assert [v.text for v in first.variants] == [v.text for v in second.variants]

    def test_single_word_vocabulary_drops(self):
        store = vocab_store({"processor": [1.0, 0.0, 0.0]})
        s = sent(0, "the processor responds", ["PO1"])
        result = augment_embedding([s], store, seed=0)
        assert result.variants == []
        assert result.dropped == 3

    def test_sentence_without_vocab_words_drops(self):
        store = vocab_store({"alpha": [1, 0, 0], "beta": [0, 1, 0]})
        result = augment_embedding(
            [sent(0, "nothing known appears", ["PO1"])], store, seed=0
        )
        assert result.variants == []
        assert result.dropped == 3


class TestAugmentNoise:
    def test_forced_swap_of_two_tokens(self):
        s = sent(0, "a b", ["PO1"])
        result = augment_noise([s], ops=("swap",), seed=0, min_tokens=2)
        assert [v.text for v in result.variants] == ["b a"]
        assert result.variants[0].method == "NI-swap"

    def test_swap_preserves_token_multiset(self):
        s = sent(0, "alpha beta gamma delta epsilon", ["PO1"])
        (variant,) = augment_noise([s], ops=("swap",), seed=5).variants
        assert Counter(variant.text.split()) == Counter(s.text.split())
        assert variant.text != s.text or variant.identity

    def test_delete_removes_ceil_ten_percent(self):
        words = [f"w{chr(97 + i)}" for i in range(10)]
        s = sent(0, " ".join(words), ["PO1"])
        (variant,) = augment_noise([s], ops=("delete",), seed=1).variants
        out = variant.text.split()
        assert len(out) == 9
        assert Counter(out) <= Counter(words)
        assert variant.method == "NI-delete"

    def test_substitute_draws_from_vocabulary(self):
        words = [f"w{chr(97 + i)}" for i in range(10)]
        s = sent(0, " ".join(words), ["PO1"])
        (variant,) = augment_noise(
            [s], ops=("substitute",), seed=2, vocabulary=("controller",)
        ).variants
        out = variant.text.split()
        assert len(out) == 10
        changed = [(i, w) for i, (w, o) in enumerate(zip(out, words)) if w != o]
        assert changed == [(changed[0][0], "controller")]

    def test_crop_keeps_contiguous_window(self):
        words = [f"w{chr(97 + i)}" for i in range(12)]
        s = sent(0, " ".join(words), ["PO1"])
        (variant,) = augment_noise([s], ops=("crop",), seed=3).variants
        out = variant.text.split()
        assert len(out) >= 9  # ceil(0.7 * 12)
        start, length = variant.params
        assert out == words[start : start + length]

    def test_full_window_crop_is_identity(self):
        s = sent(0, "alpha beta gamma delta", ["PO1"])
        result = augment_noise([s], ops=("crop",), seed=0, crop_fraction=1.0)
        (variant,) = result.variants
        assert variant.identity and variant.text == s.text
        assert result.identities == 1

    def test_short_sentence_skips_each_op(self):
        s = sent(0, "too short here", ["PO1"])
        result = augment_noise([s], seed=0)
        assert result.variants == []
        assert result.skipped == 4

    def test_count_law_four_ops(self):
        sentences = [
            sent(i, f"processor {chr(97 + i)} notifies the controller promptly", ["PO1"])
            for i in range(7)
        ]
        result = augment_noise(sentences, seed=0)
        assert len(result.variants) == 28
        assert result.skipped == 0
        assert Counter(v.method for v in result.variants) == {
            "NI-swap": 7, "NI-delete": 7, "NI-substitute": 7, "NI-crop": 7,
        }

    def test_order_of_sentences_is_irrelevant(self):
        a = sent(0, "alpha beta gamma delta epsilon", ["PO1"])
        b = sent(1, "one two three four five six", ["PO1"])
        forward = augment_noise([a, b], seed=8)
        backward = augment_noise([b, a], seed=8)
        assert sorted(v.text for v in forward.variants) == sorted(
            v.text for v in backward.variants
        )

    def test_rejects_unknown_op_and_bad_fractions(self):
        s = sent(0, "a b c d", ["PO1"])
        with pytest.raises(ValidationError, match="subset"):
            augment_noise([s], ops=("swap", "explode"), seed=0)
        with pytest.raises(ValidationError, match="subset"):
            augment_noise([s], ops=(), seed=0)
        with pytest.raises(ValidationError, match="fraction"):
            augment_noise([s], seed=0, delete_fraction=1.0)
        with pytest.raises(ValidationError, match="crop"):
            augment_noise([s], seed=0, crop_fraction=1.5)


class MappingMtClient:
    """Applies a word mapping on the outbound leg, identity on the return."""

    def __init__(self, mapping):
        self.mapping = mapping

    def translate(self, text, src, dst):
        if src == "en":
            return " ".join(self.mapping.get(w, w) for w in text.split())
        return text


class FailingMtClient:
    def __init__(self, fail_when):
        self.fail_when = fail_when

    def translate(self, text, src, dst):
        if self.fail_when(text):
            raise ConnectionError("boom")
        return text


class TestBacktranslate:
    def test_identity_stub_round_trip(self):
        sentences = [sent(i, f"clause {chr(97 + i)} applies", ["PO1"]) for i in range(4)]
        result = augment_backtranslate(sentences, IdentityMtClient())
        assert len(result.variants) == 8
        assert result.identities == 8
        assert all(v.identity and v.text == v.base.text for v in result.variants)
        assert Counter(v.params[0] for v in result.variants) == {"fr": 4, "de": 4}

    def test_mapping_stub_paraphrases_predictably(self):
        client = MappingMtClient({"delete": "remove"})
        s = sent(0, "please delete the data", ["PO1"])
        result = augment_backtranslate([s], client, pivots=("fr",))
        assert [v.text for v in result.variants] == ["please remove the data"]
        assert not result.variants[0].identity

    def test_failures_recorded_batch_continues(self):
        sentences = [sent(i, f"clause number {chr(97 + i)}", ["PO1"]) for i in range(10)]
        bad = {sentences[0].text, sentences[1].text}
        client = FailingMtClient(lambda t: t in bad)
        result = augment_backtranslate(sentences, client)
        assert len(result.variants) == 16
        assert len(result.errors) == 4
        assert "D1#0" in result.errors[0]

    def test_too_many_failures_abort(self):
        sentences = [sent(i, f"clause number {chr(97 + i)}", ["PO1"]) for i in range(10)]
        bad = {s.text for s in sentences[:3]}
        client = FailingMtClient(lambda t: t in bad)
        with pytest.raises(ExternalServiceError, match="6 of 20"):
            augment_backtranslate(sentences, client)

    def test_requires_pivots(self):
        with pytest.raises(ValidationError, match="pivot"):
            augment_backtranslate([], IdentityMtClient(), pivots=())


class TestAugmentedSentence:
    def test_identity_must_be_flagged(self):
        s = sent(0, "a b", ["PO1"])
        with pytest.raises(ValidationError, match="identity"):
            AugmentedSentence(s, "a b", "BT", ("fr",))

    def test_unknown_method_rejected(self):
        s = sent(0, "a b", ["PO1"])
        with pytest.raises(ValidationError, match="method"):
            AugmentedSentence(s, "b a", "shuffle", ())


def full_resources():
    rng = np.random.default_rng(0)
    vocab_words = [
        "processor", "controller", "notify", "erase", "records",
        "incident", "breach", "audit",
    ]
    return Resources(
        lexicons=(
            SynonymLexicon("one", {"delete": ("erase",), "inform": ("notify",)}),
            SynonymLexicon("two", {"data": ("records",), "delete": ("purge",)}),
        ),
        store=vocab_store({w: rng.normal(size=4) for w in vocab_words}, dim=4),
        mt_client=IdentityMtClient(),
    )


def recipe_dataset(n_pos=5, n_other=9):
    task = TaskSpec.multiclass(["PO1", "PO2"])
    examples = []
    for i in range(n_pos):
        label = "PO1" if i % 2 == 0 else "PO2"
        s = sent(
            i,
            f"the processor shall delete data batch {chr(97 + i)} swiftly",
            [label],
        )
        examples.append(Example(s.text, label, s))
    for i in range(n_pos, n_pos + n_other):
        s = sent(i, f"unrelated filler clause {chr(97 + i)} appears here")
        examples.append(Example(s.text, OTHER_LABEL, s))
    return Dataset(task, tuple(examples))


class TestRecipes:
    def test_thirteen_builtins(self):
        assert len(BUILTIN_RECIPES) == 13
        assert set(BUILTIN_RECIPES) == {
            "RU", "RO", "RUOS", "BT", "SR", "ER", "NI",
            "BT-RUOS", "SR-RUOS", "ER-RUOS", "NI-RUOS", "ALL", "ALL-RUOS",
        }
        for name, recipe in BUILTIN_RECIPES.items():
            assert recipe.name == name

    def test_recipe_validation(self):
        with pytest.raises(ValidationError, match="undersample"):
            VariantRecipe("x", (UndersampleStep(), UndersampleStep()))
        with pytest.raises(ValidationError, match="no steps"):
            VariantRecipe("x", ())
        with pytest.raises(ValidationError, match="family"):
            AugmentStep("XX", 2)
        with pytest.raises(ValidationError, match="multiplicity"):
            AugmentStep("BT", 0)

    def test_single_oversample_step(self):
        task = TaskSpec.multiclass(["PO1"])
        ds = make_dataset({OTHER_LABEL: 100, "PO1": 10}, task)
        out, manifest = build_variant(ds, BUILTIN_RECIPES["RO"], seed=0)
        assert out.class_counts() == {"PO1": 100, OTHER_LABEL: 100}
        assert manifest["recipe"] == "RO"
        assert manifest["class_counts"] == {"PO1": 100, OTHER_LABEL: 100}

    def test_composition_matches_manual_application(self):
        ds = recipe_dataset()
        recipe = VariantRecipe("custom", (AugmentStep("NI", 4), OversampleStep()))
        out, _ = build_variant(ds, recipe, seed=6)

        noise = augment_noise([e.sentence for e in ds.positives()], seed=6)
        augmented = Dataset(
            ds.task,
            ds.examples
            + tuple(
                Example(v.text, label_for(v.base, ds.task), v.base, v.method)
                for v in noise.variants
            ),
        )
        manual = random_oversample(augmented, seed=6)
        assert out.class_counts() == manual.class_counts()

    def test_thirteen_distinct_manifests(self):
        ds = recipe_dataset()
        res = full_resources()
        manifests = [
            build_variant(ds, recipe, seed=4, resources=res)[1]
            for recipe in BUILTIN_RECIPES.values()
        ]
        assert len(manifests) == 13
        distinct = {repr(m) for m in manifests}
        assert len(distinct) == 13

    def test_missing_resources_name_the_step(self):
        ds = recipe_dataset()
        with pytest.raises(ValidationError, match=r"augment\(SR x2\)"):
            build_variant(ds, BUILTIN_RECIPES["SR"], seed=0)
        with pytest.raises(ValidationError, match=r"augment\(ER x3\)"):
            build_variant(ds, BUILTIN_RECIPES["ER"], seed=0)
        with pytest.raises(ValidationError, match=r"augment\(BT x2\)"):
            build_variant(ds, BUILTIN_RECIPES["BT"], seed=0)

    def test_labels_inherited_verbatim(self):
        ds = recipe_dataset()
        out, _ = build_variant(
            ds, BUILTIN_RECIPES["ALL"], seed=2, resources=full_resources()
        )
        by_key = {
            (e.sentence.dpa_id, e.sentence.sentence_index): e.label
            for e in ds.examples
        }
        augmented = [e for e in out.examples if e.method != "original"]
        assert augmented
        for example in augmented:
            key = (example.sentence.dpa_id, example.sentence.sentence_index)
            assert example.label == by_key[key]
            assert example.label != OTHER_LABEL

    def test_augments_only_original_positives(self):
        ds = recipe_dataset(n_pos=2, n_other=6)
        recipe = VariantRecipe("custom", (OversampleStep(), AugmentStep("NI", 4)))
        out, manifest = build_variant(ds, recipe, seed=1)
        # Oversampling first duplicates positives, but augmentation still
        # reads each distinct original sentence once: 2 positives x 4 ops.
        assert manifest["steps"][1]["added"] == 8
        assert sum(e.method != "original" for e in out.examples) == 8

    def test_deterministic_end_to_end(self):
        ds = recipe_dataset()
        res = full_resources()
        out1, man1 = build_variant(ds, BUILTIN_RECIPES["ALL-RUOS"], 11, res)
        out2, man2 = build_variant(ds, BUILTIN_RECIPES["ALL-RUOS"], 11, res)
        assert man1 == man2
        assert [(e.text, e.label, e.method) for e in out1.examples] == [
            (e.text, e.label, e.method) for e in out2.examples
        ]

    def test_manifest_shape(self):
        ds = recipe_dataset()
        _, manifest = build_variant(
            ds, BUILTIN_RECIPES["NI-RUOS"], seed=3, resources=full_resources()
        )
        assert set(manifest) == {"recipe", "seed", "steps", "class_counts"}
        assert manifest["seed"] == 3
        assert [s["step"] for s in manifest["steps"]] == [
            "augment(NI x4)", "undersample", "oversample",
        ]
        assert manifest["steps"][0]["dropped"] == 0
