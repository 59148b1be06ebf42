"""Sentence segmentation, tokenization and token normalization.

Everything here is deterministic and offset-preserving: offsets are
Unicode scalar positions into the original document text, never bytes,
so spans can be exchanged with other runtimes (the annotation UI in
particular) without re-deriving them.

Operational definitions, fixed so behavior is auditable:

* a *word* is a maximal run of word characters (``\\w``);
* every other non-whitespace character is a single-character token
  ("punctuation" for our purposes);
* sentences split on runs of ``.``, ``?``, ``!`` or newlines, with an
  editable abbreviation guard list suppressing splits after entries
  such as ``dr.`` or ``e.g.``.
"""
from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")
_TERMINATOR_RE = re.compile(r"[.?!]+|\n+")
_EDGE_PUNCT_RE = re.compile(r"^[\W_]+|[\W_]+$")
_LEAD_PUNCT_RE = re.compile(r"^[^\w]+")


@dataclass(frozen=True)
class Sentence:
    """Half-open character span of one sentence, 0-based ordinal."""

    index: int
    start: int
    end: int


@dataclass(frozen=True)
class Token:
    start: int
    end: int
    surface: str
    norm: str


def normalize(surface: str) -> str:
    """Casefold, NFKC-fold and strip edge punctuation; idempotent.

    Applied to fixpoint so that ``normalize(normalize(x)) == normalize(x)``
    holds by construction even for exotic case/compatibility mappings.
    """
    s = surface
    prev = None
    rounds = 0
    while s != prev:
        prev = s
        s = unicodedata.normalize("NFKC", s).casefold()
        s = _EDGE_PUNCT_RE.sub("", s)
        rounds += 1
        if rounds > 100:  # unreachable in practice; guards against livelock
            raise RuntimeError(f"normalization did not converge for {surface!r}")
    return s


_normalize_cached = lru_cache(maxsize=1 << 17)(normalize)


@lru_cache(maxsize=1)
def default_abbreviations() -> frozenset[str]:
    """Bundled guard list, one lowercase token per line (``data/abbrev.txt``)."""
    text = resources.files("comorbid").joinpath("data/abbrev.txt").read_text("utf-8")
    return frozenset(
        line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")
    )


def load_abbreviations(path) -> frozenset[str]:
    with open(path, encoding="utf-8") as fh:
        return frozenset(
            line.strip() for line in fh if line.strip() and not line.strip().startswith("#")
        )


def _guarded(text: str, dot: int, abbreviations: frozenset[str]) -> bool:
    """True if the period at ``dot`` belongs to a guarded abbreviation.

    The whitespace-delimited chunk around the period is checked, so the
    internal dot of ``e.g.`` is guarded by the single entry ``e.g.``.
    """
    start = dot
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    end = dot
    while end < len(text) and not text[end].isspace():
        end += 1
    chunk = _LEAD_PUNCT_RE.sub("", text[start:end].lower())
    if chunk in abbreviations:
        return True
    prefix = _LEAD_PUNCT_RE.sub("", text[start : dot + 1].lower())
    return prefix in abbreviations


def segment_sentences(text: str, abbreviations: frozenset[str] | None = None) -> list[Sentence]:
    """Split ``text`` into ordered, non-overlapping, trimmed sentence spans.

    Terminator runs of ``.?!`` stay inside their sentence span; newline
    runs separate sentences without belonging to either side.  Spans that
    are empty or whitespace-only after trimming are dropped.
    """
    if abbreviations is None:
        abbreviations = default_abbreviations()
    spans: list[tuple[int, int]] = []
    cursor = 0
    for m in _TERMINATOR_RE.finditer(text):
        run = m.group()
        if run[0] == "\n":
            spans.append((cursor, m.start()))
            cursor = m.end()
            continue
        if run == "." and _guarded(text, m.start(), abbreviations):
            continue
        spans.append((cursor, m.end()))
        cursor = m.end()
    spans.append((cursor, len(text)))

    sentences: list[Sentence] = []
    for start, end in spans:
        while start < end and text[start].isspace():
            start += 1
        while end > start and text[end - 1].isspace():
            end -= 1
        if start < end:
            sentences.append(Sentence(index=len(sentences), start=start, end=end))
    return sentences


def tokenize(text: str, sentence: Sentence) -> list[Token]:
    """Tokens of one sentence with exact document offsets.

    Words are ``\\w`` runs; any other non-space character is its own
    token.  ``norm`` may be empty (pure punctuation tokens).
    """
    return [
        Token(m.start(), m.end(), m.group(), _normalize_cached(m.group()))
        for m in _TOKEN_RE.finditer(text, sentence.start, sentence.end)
    ]


def tokenize_all(text: str, sentences: list[Sentence]) -> list[list[Token]]:
    """Token lists aligned with ``sentences``."""
    return [tokenize(text, sentence) for sentence in sentences]
