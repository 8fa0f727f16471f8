"""Text preprocessing: tokenizer, sentence splitter, and party normalizer.

The three stages mirror how agreement text enters the pipeline: raw text is
split into segments on sentence-ending punctuation, each segment is
normalized so that concrete party names become the generic role tokens
PROCESSOR / CONTROLLER, and tokenization provides lossless word/punctuation
offsets for anything downstream that needs them.

Segments are deliberately *not* guaranteed to be grammatical sentences:
legal text is bullet-heavy and clause boundaries (colons, semicolons) are
treated as segment ends so that each obligation lands in its own unit.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ParseError, ValidationError

__all__ = [
    "Token",
    "AliasRule",
    "AliasTable",
    "NormalizeResult",
    "tokenize",
    "split_sentences",
    "normalize",
    "alias_candidates",
    "ROLE_TOKENS",
]

ROLE_TOKENS = ("PROCESSOR", "CONTROLLER")

# Word cores may contain internal hyphens/apostrophes ("data-set", "don't");
# every other non-space character is its own token.
_TOKEN_RE = re.compile(r"\w+(?:['’-]\w+)*|[^\w\s]", re.UNICODE)

_BOUNDARY_CHARS = ".:;?!"

# Periods after these do not end a segment (citation-heavy legal prose).
_ABBREVIATIONS = frozenset(
    {"art.", "no.", "e.g.", "i.e.", "etc.", "cf.", "vs.", "para.", "sec."}
)

_BULLET_RE = re.compile(r"[-•*‣◦]+[ \t]|\([0-9a-zA-Z]{1,3}\)")


@dataclass(frozen=True)
class Token:
    """A token plus its character span in the source string."""

    text: str
    start: int
    end: int

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)


def tokenize(text: str) -> list[Token]:
    """Split ``text`` into word and punctuation tokens with source offsets.

    Joining token texts with the original inter-token gaps reproduces the
    input exactly; empty input yields an empty list.
    """
    return [Token(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def _abbreviation_guard(text: str, dot_index: int) -> bool:
    """True when the period at ``dot_index`` ends an abbreviation or initial."""
    k = dot_index - 1
    while k >= 0 and (text[k].isalnum() or text[k] == "."):
        k -= 1
    word = text[k + 1 : dot_index]
    if len(word) == 1 and word.isupper():
        return True
    return (word + ".").lower() in _ABBREVIATIONS


def split_sentences(text: str) -> list[str]:
    """Split text into trimmed segments at sentence-ending punctuation.

    Boundary characters are ``. : ; ? !`` when followed by whitespace or end
    of text; the punctuation mark stays attached to the left segment. A
    bullet marker at the start of a line always opens a new segment. Periods
    guarded by :func:`_abbreviation_guard` are not boundaries.
    """
    segments: list[str] = []
    start = 0
    i = 0
    n = len(text)

    def flush(end: int, next_start: int) -> None:
        nonlocal start
        seg = text[start:end].strip()
        if seg:
            segments.append(seg)
        start = next_start

    while i < n:
        ch = text[i]
        if ch in _BOUNDARY_CHARS and (i + 1 >= n or text[i + 1].isspace()):
            if ch == "." and _abbreviation_guard(text, i):
                i += 1
                continue
            flush(i + 1, i + 1)
        elif ch == "\n":
            j = i + 1
            while j < n and text[j] in " \t":
                j += 1
            if _BULLET_RE.match(text, j):
                flush(i, j)
        i += 1
    flush(n, n)
    return segments


@dataclass(frozen=True)
class AliasRule:
    """One replacement rule: a literal/wildcard phrase and its role token."""

    pattern: str
    replacement: str


@dataclass(frozen=True)
class Applied:
    """Audit record of a single replacement (span is in the original text)."""

    pattern: str
    start: int
    end: int
    matched: str


@dataclass(frozen=True)
class NormalizeResult:
    text: str
    applied: tuple[Applied, ...]


class AliasTable:
    """Validated set of party-name aliases.

    Patterns are whitespace-separated word sequences; a ``*`` component
    matches one arbitrary word. Matching is case-insensitive and bounded at
    word edges. Patterns equal to a role token are rejected so that
    normalization stays idempotent.
    """

    def __init__(self, rules: list[AliasRule]):
        compiled = []
        for rule in rules:
            pattern = rule.pattern.strip()
            if not pattern:
                raise ValidationError("alias pattern must be non-empty")
            if rule.replacement not in ROLE_TOKENS:
                raise ValidationError(
                    f"alias replacement must be one of {ROLE_TOKENS}, "
                    f"got {rule.replacement!r}"
                )
            if pattern.upper() in ROLE_TOKENS:
                raise ValidationError(
                    f"alias pattern {pattern!r} equals a role token; "
                    "normalization would not be idempotent"
                )
            compiled.append((AliasRule(pattern, rule.replacement), _compile_pattern(pattern)))
        self._rules = compiled

    @property
    def rules(self) -> list[AliasRule]:
        return [rule for rule, _ in self._rules]

    @classmethod
    def from_file(cls, path: str) -> "AliasTable":
        """Load ``pattern<TAB>ROLE`` lines; ``#`` starts a comment line."""
        rules = []
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise ParseError(
                        "expected 'pattern<TAB>ROLE'", path=path, line=lineno
                    )
                rules.append(AliasRule(parts[0].strip(), parts[1].strip()))
        return cls(rules)

    def matches(self, text: str) -> list[tuple[AliasRule, int, int]]:
        found = []
        for idx, (rule, regex) in enumerate(self._rules):
            for m in regex.finditer(text):
                found.append((idx, rule, m.start(), m.end()))
        # Longest match first at each position; rule order breaks ties.
        found.sort(key=lambda t: (t[2], -(t[3] - t[2]), t[0]))
        selected: list[tuple[AliasRule, int, int]] = []
        cursor = -1
        for _, rule, s, e in found:
            if s > cursor:
                selected.append((rule, s, e))
                cursor = e - 1
        return selected


def _compile_pattern(pattern: str) -> re.Pattern[str]:
    parts = [
        r"\w+" if word == "*" else re.escape(word) for word in pattern.split()
    ]
    return re.compile(
        r"(?<!\w)" + r"\s+".join(parts) + r"(?!\w)", re.IGNORECASE | re.UNICODE
    )


def normalize(text: str, aliases: AliasTable) -> NormalizeResult:
    """Replace party references with their role tokens, with an audit trail.

    Replacement is longest-match-first, left-to-right and non-overlapping;
    the audit trail records each applied pattern with its span in the
    original text so a reviewer can verify every substitution.
    """
    out = []
    applied = []
    cursor = 0
    for rule, s, e in aliases.matches(text):
        out.append(text[cursor:s])
        out.append(rule.replacement)
        applied.append(Applied(rule.pattern, s, e, text[s:e]))
        cursor = e
    out.append(text[cursor:])
    return NormalizeResult("".join(out), tuple(applied))


_CANDIDATE_RE = re.compile(r"\b[A-Z][\w&.-]*(?:\s+[A-Z][\w&.-]*)+\b")


def alias_candidates(text: str, result: NormalizeResult) -> list[str]:
    """Capitalized multi-word spans left untouched by normalization.

    Supports the reviewer loop: these are likely party names that still need
    an alias rule.
    """
    covered = [(a.start, a.end) for a in result.applied]
    candidates = []
    for m in _CANDIDATE_RE.finditer(text):
        if any(m.start() < e and s < m.end() for s, e in covered):
            continue
        phrase = m.group()
        if any(role in phrase for role in ROLE_TOKENS):
            continue
        if phrase not in candidates:
            candidates.append(phrase)
    return candidates
