"""Dictionary matching of lexicon terms over tokenized documents.

Matching is exact on normalized token sequences (no stemming, no fuzzy
expansion), scoped to single sentences, with punctuation-only tokens
transparent: the pattern "type 2 diabetes" matches the text
"type-2 diabetes" because the hyphen token normalizes to the empty
string and is skipped on both sides.

Overlapping candidate matches are resolved deterministically: longest
character span wins, ties broken leftmost-first, survivors pairwise
disjoint.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

from .errors import ValidationError
from .terminology import Lexicon, chapter_of
from .textproc import Sentence, Token, normalize

if TYPE_CHECKING:  # pragma: no cover
    from .context import MentionAttributes
    from .corpus import Document

_PATTERN_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def pattern_tokens(term: str) -> tuple[str, ...]:
    """Normalized token sequence of a lexicon term, empty norms dropped."""
    parts = (normalize(m.group()) for m in _PATTERN_TOKEN_RE.finditer(term))
    return tuple(part for part in parts if part)


@dataclass(frozen=True)
class ConceptInfo:
    cui: str
    icd_code: str
    chapter: str


@dataclass
class MatchIndex:
    """Immutable-after-build index: normalized token pattern -> CUI."""

    patterns: dict[tuple[str, ...], str] = field(default_factory=dict)
    concepts: dict[str, ConceptInfo] = field(default_factory=dict)
    # first pattern token -> [(pattern, cui)], longest pattern first
    _by_first: dict[str, list[tuple[tuple[str, ...], str]]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.patterns)

    def add_pattern(self, pattern: tuple[str, ...], cui: str) -> None:
        if not pattern:
            raise ValidationError(f"pattern for {cui} normalizes to empty")
        existing = self.patterns.get(pattern)
        if existing is not None:
            if existing != cui:
                raise ValidationError(
                    f"pattern {' '.join(pattern)!r} maps to both {existing} and {cui}"
                )
            return
        self.patterns[pattern] = cui

    def finalize(self) -> None:
        by_first: dict[str, list[tuple[tuple[str, ...], str]]] = {}
        for pattern, cui in self.patterns.items():
            by_first.setdefault(pattern[0], []).append((pattern, cui))
        for bucket in by_first.values():
            bucket.sort(key=lambda item: (-len(item[0]), item[0]))
        self._by_first = by_first

    def candidates_for(self, first_norm: str) -> list[tuple[tuple[str, ...], str]]:
        return self._by_first.get(first_norm, [])


def build_index(lexicon: Lexicon) -> MatchIndex:
    """Index every synonym and preferred term of every lexicon entry.

    Identical normalized patterns deduplicate; a pattern claimed by two
    different CUIs is rejected because matching must be unambiguous.
    """
    index = MatchIndex()
    for entry in lexicon.entries:
        index.concepts[entry.cui] = ConceptInfo(
            cui=entry.cui,
            icd_code=entry.icd_code,
            chapter=chapter_of(entry.icd_code).id,
        )
        for term in (entry.preferred_term, *entry.synonyms):
            index.add_pattern(pattern_tokens(term), entry.cui)
    index.finalize()
    return index


@dataclass
class Mention:
    """A located concept occurrence; attributes filled by the context stage."""

    doc_id: str
    cui: str
    icd_code: str
    chapter: str
    start: int
    end: int
    matched_text: str
    sentence_index: int
    attributes: "MentionAttributes | None" = None
    filter_score: float | None = None

    def with_attributes(self, attributes: "MentionAttributes") -> "Mention":
        return replace(self, attributes=attributes)

    def with_score(self, score: float) -> "Mention":
        return replace(self, filter_score=score)


@dataclass(frozen=True)
class _Candidate:
    start: int
    end: int
    cui: str
    sentence_index: int


def resolve_overlaps(candidates: list[_Candidate]) -> list[_Candidate]:
    """Greedy selection: longest span first, leftmost on ties, no overlaps."""
    chosen: list[_Candidate] = []
    for cand in sorted(candidates, key=lambda c: (-(c.end - c.start), c.start)):
        if all(cand.end <= kept.start or cand.start >= kept.end for kept in chosen):
            chosen.append(cand)
    chosen.sort(key=lambda c: c.start)
    return chosen


def _sentence_candidates(
    sentence: Sentence, tokens: list[Token], index: MatchIndex
) -> list[_Candidate]:
    content = [t for t in tokens if t.norm]
    found: list[_Candidate] = []
    for i, token in enumerate(content):
        for pattern, cui in index.candidates_for(token.norm):
            length = len(pattern)
            if i + length > len(content):
                continue
            if all(content[i + j].norm == pattern[j] for j in range(1, length)):
                found.append(
                    _Candidate(
                        start=token.start,
                        end=content[i + length - 1].end,
                        cui=cui,
                        sentence_index=sentence.index,
                    )
                )
    return found


def find_mentions(
    doc: "Document",
    index: MatchIndex,
    sentences: list[Sentence],
    tokens: list[list[Token]],
) -> list[Mention]:
    """All non-overlapping concept matches in ``doc``, sorted by start."""
    candidates: list[_Candidate] = []
    for sentence, sentence_tokens in zip(sentences, tokens):
        candidates.extend(_sentence_candidates(sentence, sentence_tokens, index))
    mentions = []
    for cand in resolve_overlaps(candidates):
        info = index.concepts[cand.cui]
        mentions.append(
            Mention(
                doc_id=doc.doc_id,
                cui=cand.cui,
                icd_code=info.icd_code,
                chapter=info.chapter,
                start=cand.start,
                end=cand.end,
                matched_text=doc.text[cand.start : cand.end],
                sentence_index=cand.sentence_index,
            )
        )
    return mentions


INDEX_MAGIC = "comorbid-index"
INDEX_VERSION = 1


def serialize_index(index: MatchIndex) -> bytes:
    """Canonical JSON bytes for a finalized (or buildable) index."""
    payload = {
        "magic": INDEX_MAGIC,
        "version": INDEX_VERSION,
        "patterns": [
            [list(pattern), cui] for pattern, cui in sorted(index.patterns.items())
        ],
        "concepts": {
            cui: [info.icd_code, info.chapter]
            for cui, info in sorted(index.concepts.items())
        },
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def deserialize_index(blob: bytes) -> MatchIndex:
    from .errors import ParseError, VersionError

    try:
        payload = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"index payload is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("magic") != INDEX_MAGIC:
        raise ParseError("index payload lacks the expected header")
    if payload.get("version") != INDEX_VERSION:
        raise VersionError(expected=INDEX_VERSION, found=payload.get("version"))
    index = MatchIndex()
    try:
        for cui, (icd_code, chapter) in payload["concepts"].items():
            index.concepts[cui] = ConceptInfo(cui=cui, icd_code=icd_code, chapter=chapter)
        for pattern, cui in payload["patterns"]:
            index.add_pattern(tuple(pattern), cui)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"index payload is malformed: {exc!r}") from exc
    index.finalize()
    return index


def save_index(index: MatchIndex, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_index(index))


def load_index(path) -> MatchIndex:
    with open(path, "rb") as fh:
        return deserialize_index(fh.read())
