"""Document model and corpus ingestion.

Documents travel as line-delimited JSON records with fields
``doc_id``, ``patient_id``, ``date`` (ISO-8601) and ``text``.  An
optional cohort filter keeps only documents dated inside each patient's
observation window: from three months (calendar arithmetic, day clamped)
before the patient's index date through the configured study end, both
boundaries inclusive.  Documents of patients without an index date are
excluded when a filter is active.
"""
from __future__ import annotations

import calendar
import csv
import json
from dataclasses import dataclass, field
from datetime import date
from typing import Iterator

from .errors import ParseError, ValidationError

DEFAULT_LOOKBACK_MONTHS = 3


def subtract_months(day: date, months: int) -> date:
    """Calendar-month subtraction, clamping to the last day of the month."""
    month_index = day.year * 12 + (day.month - 1) - months
    year, month0 = divmod(month_index, 12)
    last = calendar.monthrange(year, month0 + 1)[1]
    return date(year, month0 + 1, min(day.day, last))


@dataclass(frozen=True)
class Document:
    doc_id: str
    patient_id: str
    date: date
    text: str


@dataclass
class CohortFilter:
    """Per-patient observation windows anchored on the index diagnosis date."""

    index_dates: dict[str, date]
    study_end: date
    lookback_months: int = DEFAULT_LOOKBACK_MONTHS

    def validate(self) -> None:
        for patient_id, index_date in self.index_dates.items():
            if self.window_start(patient_id) >= self.study_end:
                raise ValidationError(
                    f"patient {patient_id}: window start {self.window_start(patient_id)} "
                    f"is not before study end {self.study_end}"
                )

    def window_start(self, patient_id: str) -> date:
        return subtract_months(self.index_dates[patient_id], self.lookback_months)

    def allows(self, doc: Document) -> bool:
        if doc.patient_id not in self.index_dates:
            return False
        return self.window_start(doc.patient_id) <= doc.date <= self.study_end


def load_cohort(path, study_end: date, lookback_months: int = DEFAULT_LOOKBACK_MONTHS) -> CohortFilter:
    """Read a ``patient_id,index_date`` CSV into a validated CohortFilter."""
    index_dates: dict[str, date] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["patient_id", "index_date"]:
            raise ParseError("expected header patient_id,index_date", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 fields, got {len(row)}", line=lineno)
            patient_id, raw_date = row[0].strip(), row[1].strip()
            if patient_id in index_dates:
                raise ValidationError(f"line {lineno}: duplicate patient_id: {patient_id}")
            try:
                index_dates[patient_id] = date.fromisoformat(raw_date)
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from exc
    cohort = CohortFilter(index_dates=index_dates, study_end=study_end, lookback_months=lookback_months)
    cohort.validate()
    return cohort


@dataclass
class Corpus:
    documents: list[Document] = field(default_factory=list)
    excluded: int = 0

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def get(self, doc_id: str) -> Document:
        for doc in self.documents:
            if doc.doc_id == doc_id:
                return doc
        raise KeyError(doc_id)


def parse_document_line(line: str, lineno: int) -> Document:
    try:
        record = json.loads(line)
    except ValueError as exc:
        raise ParseError(f"invalid JSON: {exc}", line=lineno) from exc
    if not isinstance(record, dict):
        raise ParseError("document record must be an object", line=lineno)
    try:
        doc_id = record["doc_id"]
        patient_id = record["patient_id"]
        raw_date = record["date"]
        text = record["text"]
    except KeyError as exc:
        raise ParseError(f"missing field {exc.args[0]}", line=lineno) from exc
    if not isinstance(doc_id, str) or not isinstance(patient_id, str) or not isinstance(text, str):
        raise ParseError("doc_id, patient_id and text must be strings", line=lineno)
    try:
        parsed_date = date.fromisoformat(raw_date)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad date {raw_date!r}: {exc}", line=lineno) from exc
    return Document(doc_id=doc_id, patient_id=patient_id, date=parsed_date, text=text)


def ingest_corpus(path, cohort: CohortFilter | None = None) -> Corpus:
    """Load a line-delimited document file, applying the cohort filter if given.

    Duplicate doc_ids are an error even when one of the duplicates would
    have been filtered out.
    """
    corpus = Corpus()
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            doc = parse_document_line(line, lineno)
            if doc.doc_id in seen:
                raise ValidationError(f"line {lineno}: duplicate doc_id: {doc.doc_id}")
            seen.add(doc.doc_id)
            if cohort is not None and not cohort.allows(doc):
                corpus.excluded += 1
                continue
            corpus.documents.append(doc)
    return corpus


def write_corpus(documents: list[Document], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in documents:
            fh.write(
                json.dumps(
                    {
                        "doc_id": doc.doc_id,
                        "patient_id": doc.patient_id,
                        "date": doc.date.isoformat(),
                        "text": doc.text,
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                    separators=(",", ":"),
                )
                + "\n"
            )
