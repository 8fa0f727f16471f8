"""Tokenizer, sentence splitter, and party-name normalization tests."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpacheck.errors import ParseError, ValidationError
from dpacheck.preprocess import (
    AliasRule,
    AliasTable,
    alias_candidates,
    normalize,
    split_sentences,
    tokenize,
)


class TestTokenize:
    def test_words_and_trailing_period(self):
        tokens = [t.text for t in tokenize("The processor shall.")]
        assert tokens == ["The", "processor", "shall", "."]

    def test_empty_input(self):
        assert tokenize("") == []

    def test_hyphen_and_apostrophe_stay_inside_words(self):
        tokens = [t.text for t in tokenize("the sub-processor's data-set (v2).")]
        assert tokens == ["the", "sub-processor's", "data-set", "(", "v2", ")", "."]

    def test_offsets_point_back_into_source(self):
        text = "Data shall be erased; backups too."
        for token in tokenize(text):
            assert text[token.start : token.end] == token.text

    @given(st.text(max_size=200))
    def test_spans_are_ordered_and_disjoint(self, text):
        tokens = tokenize(text)
        for a, b in zip(tokens, tokens[1:]):
            assert a.end <= b.start
        for token in tokens:
            assert text[token.start : token.end] == token.text

    @given(st.text(max_size=200))
    def test_no_whitespace_inside_tokens_and_nothing_lost(self, text):
        tokens = tokenize(text)
        assert all(not any(c.isspace() for c in t.text) for t in tokens)
        assert "".join(t.text for t in tokens) == "".join(text.split())


class TestSplitSentences:
    def test_colon_is_a_boundary(self):
        assert split_sentences("The processor shall: encrypt data.") == [
            "The processor shall:",
            "encrypt data.",
        ]

    def test_single_segment(self):
        assert split_sentences("One.") == ["One."]

    def test_empty_input(self):
        assert split_sentences("") == []

    def test_three_boundary_marks(self):
        assert split_sentences("Go. Stop? Run!") == ["Go.", "Stop?", "Run!"]

    def test_single_initial_does_not_split(self):
        # "A." reads as an initial, so the period is guarded; the question
        # mark still ends the first segment.
        assert split_sentences("A. B? C!") == ["A. B?", "C!"]

    def test_known_abbreviations_do_not_split(self):
        text = "Pursuant to Art. 28 the processor, e.g. a host, shall comply."
        assert split_sentences(text) == [text]

    def test_boundary_needs_following_whitespace(self):
        assert split_sentences("See section 3.2 for details.") == [
            "See section 3.2 for details."
        ]

    def test_punctuation_attaches_left(self):
        segments = split_sentences("First rule; second rule.")
        assert segments == ["First rule;", "second rule."]

    def test_bullet_lines_start_new_segments(self):
        text = "The processor shall\n- encrypt data\n- notify the controller"
        assert split_sentences(text) == [
            "The processor shall",
            "- encrypt data",
            "- notify the controller",
        ]

    def test_numbered_list_markers(self):
        text = "Obligations:\n(a) assist audits\n(b) delete data."
        assert split_sentences(text) == [
            "Obligations:",
            "(a) assist audits",
            "(b) delete data.",
        ]

    def test_trailing_text_without_boundary_is_kept(self):
        assert split_sentences("no closing mark") == ["no closing mark"]

    @given(st.text(max_size=300))
    @settings(max_examples=200)
    def test_non_whitespace_characters_are_conserved(self, text):
        segments = split_sentences(text)
        assert "".join("".join(segments).split()) == "".join(text.split())

    @given(st.text(max_size=300))
    def test_segments_are_trimmed_and_non_empty(self, text):
        for seg in split_sentences(text):
            assert seg == seg.strip()
            assert seg


@pytest.fixture
def aliases():
    return AliasTable(
        [
            AliasRule("Acme Corp", "PROCESSOR"),
            AliasRule("Acme Corp GmbH", "PROCESSOR"),
            AliasRule("the importer", "PROCESSOR"),
            AliasRule("Blue Sky Ltd", "CONTROLLER"),
            AliasRule("the * exporter", "CONTROLLER"),
        ]
    )


class TestNormalize:
    def test_simple_replacement(self, aliases):
        result = normalize("Acme Corp shall encrypt data.", aliases)
        assert result.text == "PROCESSOR shall encrypt data."

    def test_no_match_returns_text_unchanged(self, aliases):
        result = normalize("The parties agree.", aliases)
        assert result.text == "The parties agree."
        assert result.applied == ()

    def test_longest_pattern_wins(self, aliases):
        result = normalize("Acme Corp GmbH processes data.", aliases)
        assert result.text == "PROCESSOR processes data."
        assert [a.pattern for a in result.applied] == ["Acme Corp GmbH"]

    def test_case_insensitive_matching(self, aliases):
        result = normalize("THE IMPORTER shall comply.", aliases)
        assert result.text == "PROCESSOR shall comply."
        assert result.applied[0].matched == "THE IMPORTER"

    def test_wildcard_matches_one_word(self, aliases):
        result = normalize("the data exporter is liable.", aliases)
        assert result.text == "CONTROLLER is liable."

    def test_word_boundaries_respected(self, aliases):
        result = normalize("Acme Corporation is unrelated.", aliases)
        assert result.text == "Acme Corporation is unrelated."

    def test_both_roles_in_one_sentence(self, aliases):
        result = normalize("Acme Corp instructs Blue Sky Ltd.", aliases)
        assert result.text == "PROCESSOR instructs CONTROLLER."
        assert len(result.applied) == 2

    def test_audit_trail_spans_are_ordered_and_disjoint(self, aliases):
        text = "Blue Sky Ltd and Acme Corp and the importer."
        result = normalize(text, aliases)
        spans = [(a.start, a.end) for a in result.applied]
        assert spans == sorted(spans)
        for (_, e1), (s2, _) in zip(spans, spans[1:]):
            assert e1 <= s2
        for a in result.applied:
            assert text[a.start : a.end] == a.matched

    def test_idempotent(self, aliases):
        once = normalize("Acme Corp instructs Blue Sky Ltd.", aliases)
        twice = normalize(once.text, aliases)
        assert twice.text == once.text
        assert twice.applied == ()


class TestAliasTable:
    def test_rejects_empty_pattern(self):
        with pytest.raises(ValidationError):
            AliasTable([AliasRule("", "PROCESSOR")])

    def test_rejects_unknown_role(self):
        with pytest.raises(ValidationError):
            AliasTable([AliasRule("Acme Corp", "VENDOR")])

    def test_rejects_pattern_equal_to_role_token(self):
        with pytest.raises(ValidationError):
            AliasTable([AliasRule("processor", "PROCESSOR")])

    def test_from_file_parses_tab_separated_rules(self, tmp_path):
        path = tmp_path / "aliases.tsv"
        path.write_text(
            "# party aliases\nAcme Corp\tPROCESSOR\nthe exporter\tCONTROLLER\n",
            encoding="utf-8",
        )
        table = AliasTable.from_file(str(path))
        assert [r.pattern for r in table.rules] == ["Acme Corp", "the exporter"]

    def test_from_file_reports_line_numbers(self, tmp_path):
        path = tmp_path / "aliases.tsv"
        path.write_text("Acme Corp\tPROCESSOR\nbroken line\n", encoding="utf-8")
        with pytest.raises(ParseError) as err:
            AliasTable.from_file(str(path))
        assert ":2:" in str(err.value)


class TestAliasCandidates:
    def test_unmatched_capitalized_phrase_is_reported(self, aliases):
        text = "Acme Corp engages Globex Industries for hosting."
        result = normalize(text, aliases)
        assert alias_candidates(text, result) == ["Globex Industries"]

    def test_replaced_spans_are_not_candidates(self, aliases):
        text = "Acme Corp and Blue Sky Ltd agree."
        result = normalize(text, aliases)
        assert alias_candidates(text, result) == []

    def test_single_capitalized_words_are_ignored(self, aliases):
        text = "Confidentiality obligations survive termination of this agreement."
        result = normalize(text, aliases)
        assert alias_candidates(text, result) == []

    def test_role_tokens_are_never_candidates(self, aliases):
        text = "Acme Corp notifies Blue Sky Ltd."
        result = normalize(text, aliases)
        assert alias_candidates(result.text, normalize(result.text, aliases)) == []
