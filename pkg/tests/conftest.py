"""Shared fixtures and small builders used across the test suite."""
from __future__ import annotations

from datetime import date
from pathlib import Path

import pytest

from comorbid.annotation import AnnotationRecord
from comorbid.context import Temporality, default_triggers
from comorbid.corpus import Document
from comorbid.matcher import Mention, build_index
from comorbid.terminology import IcdMapping, Lexicon, LexiconEntry, chapter_of

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def triggers():
    return default_triggers()


def make_lexicon(*entries: tuple[str, str, tuple[str, ...], str]) -> Lexicon:
    """Lexicon from (cui, preferred_term, synonyms, icd_code) tuples."""
    return Lexicon(
        entries=tuple(
            LexiconEntry(cui=cui, preferred_term=pref, synonyms=syns, icd_code=icd)
            for cui, pref, syns, icd in entries
        )
    )


SMALL_LEXICON = make_lexicon(
    ("C0008354", "cholera", ("cholera",), "A00"),
    ("C0004096", "asthma", ("asthma",), "J45"),
    ("C0011849", "diabetes mellitus", ("diabetes", "type 2 diabetes"), "E11"),
    ("C0018802", "heart failure", ("heart failure", "heart"), "I50"),
)


@pytest.fixture(scope="session")
def small_index():
    return build_index(SMALL_LEXICON)


def make_mapping(*pairs: tuple[str, str]) -> IcdMapping:
    mapping = IcdMapping()
    for icd_code, cui in pairs:
        mapping.add(icd_code, cui)
    return mapping


def make_document(text: str, doc_id: str = "doc1") -> Document:
    return Document(doc_id=doc_id, patient_id="p1", date=date(2020, 1, 1), text=text)


def make_mention(
    doc_id: str,
    start: int,
    end: int,
    cui: str = "C0008354",
    icd_code: str = "A00",
    sentence_index: int = 0,
    text: str | None = None,
) -> Mention:
    return Mention(
        doc_id=doc_id,
        cui=cui,
        icd_code=icd_code,
        chapter=chapter_of(icd_code).id,
        start=start,
        end=end,
        matched_text=text if text is not None else "x" * (end - start),
        sentence_index=sentence_index,
    )


def make_record(
    mention: Mention,
    annotator_id: str,
    correct: bool,
    negated: bool = False,
    temporality: Temporality = Temporality.RECENT,
    timestamp: str = "2020-02-03T09:00:00",
) -> AnnotationRecord:
    return AnnotationRecord(
        doc_id=mention.doc_id,
        start=mention.start,
        end=mention.end,
        cui=mention.cui,
        annotator_id=annotator_id,
        correct=correct,
        negated=negated,
        temporality=temporality,
        timestamp=timestamp,
    )
