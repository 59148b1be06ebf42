"""Multi-annotator verdict store, gold adjudication, and Cohen's κ.

Annotators review extracted mentions and record whether each one
really is a condition mention (plus their own negation/temporality
reading).  Verdicts are upserts keyed by (mention, annotator): the
last write wins, and every write is appended to a line-delimited JSON
log so the full annotation history stays auditable.  ``compact``
rewrites the log with only the live records.

Gold adjudication keeps a mention only when at least two annotators
saw it and all of them agree on ``correct``; attribute fields carry
over only where the annotators also agree, otherwise they are left
unset.  Agreement is quantified per annotator pair with Cohen's κ on
the binary ``correct`` verdict, reported per ICD-10 chapter; the
overall figure is the unweighted mean of per-chapter values, and
chapters where no pair yields a computable κ are reported as absent
rather than zero.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .context import Temporality
from .filtermodel import Label
from .errors import (
    ArgumentError,
    DegenerateMarginalsError,
    EmptyScopeError,
    ParseError,
    UnknownMentionError,
    ValidationError,
    VersionConflictError,
)
from .matcher import Mention
from .terminology import chapter_sort_key

MentionKey = tuple[str, int, int, str]  # (doc_id, start, end, cui)


@dataclass(frozen=True)
class AnnotationRecord:
    doc_id: str
    start: int
    end: int
    cui: str
    annotator_id: str
    correct: bool
    negated: bool
    temporality: Temporality
    timestamp: str

    def mention_key(self) -> MentionKey:
        return (self.doc_id, self.start, self.end, self.cui)

    def validate(self) -> None:
        if not self.annotator_id:
            raise ValidationError("annotator_id must be non-empty")
        if self.start < 0 or self.end <= self.start:
            raise ValidationError(f"invalid span [{self.start}, {self.end})")
        try:
            datetime.fromisoformat(self.timestamp)
        except ValueError as exc:
            raise ValidationError(f"timestamp {self.timestamp!r} is not ISO 8601") from exc


def record_to_json(record: AnnotationRecord) -> str:
    return json.dumps(
        {
            "doc_id": record.doc_id,
            "start": record.start,
            "end": record.end,
            "cui": record.cui,
            "annotator_id": record.annotator_id,
            "correct": record.correct,
            "negated": record.negated,
            "temporality": record.temporality.value,
            "timestamp": record.timestamp,
        },
        sort_keys=True,
        separators=(",", ":"),
    )


def record_from_json(line: str, lineno: int | None = None) -> AnnotationRecord:
    try:
        payload = json.loads(line)
        record = AnnotationRecord(
            doc_id=payload["doc_id"],
            start=payload["start"],
            end=payload["end"],
            cui=payload["cui"],
            annotator_id=payload["annotator_id"],
            correct=payload["correct"],
            negated=payload["negated"],
            temporality=Temporality(payload["temporality"]),
            timestamp=payload["timestamp"],
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad annotation record: {exc!r}", line=lineno) from exc
    record.validate()
    return record


class AnnotationStore:
    """In-memory verdict store with an optional append-only JSON-lines log.

    The store only accepts verdicts about mentions it knows
    (``register_mentions``), and tracks a per-(mention, annotator)
    version counter so the service layer can do optimistic locking.
    Single-writer: callers serialize writes; reads are safe anywhere.
    """

    def __init__(self, log_path: str | Path | None = None) -> None:
        self.log_path = Path(log_path) if log_path is not None else None
        self._mentions: dict[MentionKey, Mention] = {}
        self._order: list[MentionKey] = []
        self._records: dict[tuple[MentionKey, str], AnnotationRecord] = {}
        self._versions: dict[tuple[MentionKey, str], int] = {}

    # -- mentions -----------------------------------------------------
    def register_mentions(self, mentions: Iterable[Mention]) -> None:
        for mention in mentions:
            key = (mention.doc_id, mention.start, mention.end, mention.cui)
            if key not in self._mentions:
                self._order.append(key)
            self._mentions[key] = mention

    def mentions(self) -> list[Mention]:
        return [self._mentions[key] for key in self._order]

    def mention_for(self, key: MentionKey) -> Mention:
        try:
            return self._mentions[key]
        except KeyError:
            raise UnknownMentionError(f"no extracted mention matches {key}") from None

    def __contains__(self, key: MentionKey) -> bool:
        return key in self._mentions

    # -- verdicts -----------------------------------------------------
    def version(self, key: MentionKey, annotator_id: str) -> int:
        return self._versions.get((key, annotator_id), 0)

    def record_annotation(
        self, record: AnnotationRecord, expected_version: int | None = None
    ) -> int:
        """Upsert a verdict; returns the new version.  Appends to the log."""
        record.validate()
        key = record.mention_key()
        if key not in self._mentions:
            raise UnknownMentionError(f"no extracted mention matches {key}")
        slot = (key, record.annotator_id)
        current = self._versions.get(slot, 0)
        if expected_version is not None and expected_version != current:
            raise VersionConflictError(expected=current, submitted=expected_version)
        self._records[slot] = record
        self._versions[slot] = current + 1
        if self.log_path is not None:
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(record_to_json(record) + "\n")
        return current + 1

    def records(self) -> list[AnnotationRecord]:
        """Live records (latest write per (mention, annotator)), in mention order."""
        order = {key: i for i, key in enumerate(self._order)}
        return [
            self._records[slot]
            for slot in sorted(
                self._records, key=lambda s: (order.get(s[0], len(order)), s[0], s[1])
            )
        ]

    def records_by(self, annotator_id: str) -> list[AnnotationRecord]:
        return [r for r in self.records() if r.annotator_id == annotator_id]

    def __len__(self) -> int:
        return len(self._records)

    # -- persistence --------------------------------------------------
    def replay_log(self) -> int:
        """Load the log from disk (upsert order = file order); returns lines read."""
        if self.log_path is None or not self.log_path.exists():
            return 0
        count = 0
        with open(self.log_path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                record = record_from_json(line, lineno=lineno)
                key = record.mention_key()
                if key not in self._mentions:
                    raise UnknownMentionError(
                        f"log line {lineno} references unknown mention {key}"
                    )
                slot = (key, record.annotator_id)
                self._records[slot] = record
                self._versions[slot] = self._versions.get(slot, 0) + 1
                count += 1
        return count

    def compact(self) -> None:
        """Rewrite the log keeping only the latest record per (mention, annotator)."""
        if self.log_path is None:
            return
        tmp = self.log_path.with_suffix(self.log_path.suffix + ".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            for record in self.records():
                fh.write(record_to_json(record) + "\n")
        tmp.replace(self.log_path)


def open_store(log_path: str | Path, mentions: Iterable[Mention]) -> AnnotationStore:
    store = AnnotationStore(log_path=log_path)
    store.register_mentions(mentions)
    store.replay_log()
    return store


# -- gold adjudication ----------------------------------------------------


@dataclass(frozen=True)
class GoldInstance:
    doc_id: str
    start: int
    end: int
    cui: str
    label: Label
    gold_negated: bool | None = None
    gold_temporality: Temporality | None = None

    def mention_key(self) -> MentionKey:
        return (self.doc_id, self.start, self.end, self.cui)


@dataclass(frozen=True)
class GoldBuildResult:
    instances: tuple[GoldInstance, ...]
    discarded: int  # mentions with conflicting `correct` verdicts
    under_annotated: int  # mentions seen by fewer than two annotators


def _latest_per_slot(
    records: Sequence[AnnotationRecord],
) -> dict[MentionKey, dict[str, AnnotationRecord]]:
    by_mention: dict[MentionKey, dict[str, AnnotationRecord]] = {}
    for record in records:
        by_mention.setdefault(record.mention_key(), {})[record.annotator_id] = record
    return by_mention


def build_gold(records: Sequence[AnnotationRecord]) -> GoldBuildResult:
    """Adjudicate by unanimity on `correct`; attribute fields only where agreed."""
    by_mention = _latest_per_slot(records)
    instances: list[GoldInstance] = []
    discarded = 0
    under_annotated = 0
    for key in sorted(by_mention):
        verdicts = list(by_mention[key].values())
        if len(verdicts) < 2:
            under_annotated += 1
            continue
        correct_values = {v.correct for v in verdicts}
        if len(correct_values) > 1:
            discarded += 1
            continue
        negated_values = {v.negated for v in verdicts}
        temporality_values = {v.temporality for v in verdicts}
        doc_id, start, end, cui = key
        instances.append(
            GoldInstance(
                doc_id=doc_id,
                start=start,
                end=end,
                cui=cui,
                label=Label.TRUE_MENTION if correct_values.pop() else Label.NOT_MENTION,
                gold_negated=negated_values.pop() if len(negated_values) == 1 else None,
                gold_temporality=(
                    temporality_values.pop() if len(temporality_values) == 1 else None
                ),
            )
        )
    return GoldBuildResult(
        instances=tuple(instances), discarded=discarded, under_annotated=under_annotated
    )


# -- agreement ------------------------------------------------------------


@dataclass(frozen=True)
class AgreementTable:
    """2×2 contingency of paired binary `correct` verdicts."""

    both_true: int
    a_only: int  # annotator A true, B false
    b_only: int  # annotator A false, B true
    both_false: int

    def total(self) -> int:
        return self.both_true + self.a_only + self.b_only + self.both_false

    def validate(self) -> None:
        if min(self.both_true, self.a_only, self.b_only, self.both_false) < 0:
            raise ValidationError("contingency counts must be non-negative")


def contingency(
    records: Sequence[AnnotationRecord],
    pair: tuple[str, str],
    chapter: str | None = None,
    chapter_lookup: Mapping[str, str] | None = None,
) -> AgreementTable:
    """Paired verdict counts for one annotator pair, optionally one chapter."""
    annotator_a, annotator_b = pair
    if annotator_a == annotator_b:
        raise ArgumentError("an annotator cannot be paired with themselves")
    if chapter is not None and chapter_lookup is None:
        raise ArgumentError("chapter filtering needs a cui -> chapter lookup")
    by_mention = _latest_per_slot(records)
    counts = [0, 0, 0, 0]
    for key, verdicts in by_mention.items():
        if annotator_a not in verdicts or annotator_b not in verdicts:
            continue
        if chapter is not None and chapter_lookup.get(key[3]) != chapter:
            continue
        a = verdicts[annotator_a].correct
        b = verdicts[annotator_b].correct
        counts[(0 if a else 2) + (0 if b else 1)] += 1
    table = AgreementTable(*counts)
    if table.total() == 0:
        scope = f" in chapter {chapter}" if chapter is not None else ""
        raise EmptyScopeError(
            f"annotators {annotator_a!r} and {annotator_b!r} share no mentions{scope}"
        )
    return table


def cohens_kappa(table: AgreementTable) -> float:
    """κ = (p_o − p_e)/(1 − p_e) over a 2×2 verdict table."""
    table.validate()
    n = table.total()
    if n == 0:
        raise ArgumentError("empty contingency table")
    p_o = (table.both_true + table.both_false) / n
    p_a = (table.both_true + table.a_only) / n
    p_b = (table.both_true + table.b_only) / n
    p_e = p_a * p_b + (1.0 - p_a) * (1.0 - p_b)
    if p_e == 1.0:
        raise DegenerateMarginalsError(
            "both annotators used a single identical label; κ is undefined"
        )
    return (p_o - p_e) / (1.0 - p_e)


@dataclass(frozen=True)
class ChapterKappa:
    chapter: str
    pair_kappas: tuple[tuple[tuple[str, str], float], ...]
    kappa: float  # unweighted mean over computable pairs


@dataclass(frozen=True)
class KappaReport:
    chapters: tuple[ChapterKappa, ...]
    overall: float | None  # unweighted mean of chapter values; None when empty

    def chapter(self, chapter_id: str) -> ChapterKappa | None:
        for entry in self.chapters:
            if entry.chapter == chapter_id:
                return entry
        return None


def kappa_report(
    records: Sequence[AnnotationRecord],
    pairs: Sequence[tuple[str, str]],
    chapter_lookup: Mapping[str, str],
) -> KappaReport:
    """Per-chapter κ per pair, chapter means, and their unweighted overall mean.

    A (pair, chapter) cell is skipped when the pair shares no mentions
    there or the marginals are degenerate; chapters with no computable
    pair are omitted entirely.
    """
    if not pairs:
        raise ArgumentError("at least one annotator pair is required")
    chapters_seen = sorted(
        {chapter_lookup[r.cui] for r in records if r.cui in chapter_lookup},
        key=chapter_sort_key,
    )
    chapter_entries: list[ChapterKappa] = []
    for chapter in chapters_seen:
        pair_values: list[tuple[tuple[str, str], float]] = []
        for pair in pairs:
            try:
                table = contingency(records, pair, chapter=chapter, chapter_lookup=chapter_lookup)
                value = cohens_kappa(table)
            except (EmptyScopeError, DegenerateMarginalsError):
                continue
            pair_values.append((pair, value))
        if pair_values:
            mean = sum(v for _, v in pair_values) / len(pair_values)
            chapter_entries.append(
                ChapterKappa(chapter=chapter, pair_kappas=tuple(pair_values), kappa=mean)
            )
    overall = (
        sum(entry.kappa for entry in chapter_entries) / len(chapter_entries)
        if chapter_entries
        else None
    )
    return KappaReport(chapters=tuple(chapter_entries), overall=overall)


def render_kappa_csv(report: KappaReport) -> str:
    """Chapter means and the overall mean, six decimals; absent chapters absent."""
    lines = ["chapter,kappa"]
    for entry in report.chapters:
        lines.append(f"{entry.chapter},{entry.kappa:.6f}")
    if report.overall is not None:
        lines.append(f"overall,{report.overall:.6f}")
    return "\n".join(lines) + "\n"


def render_kappa_text(report: KappaReport) -> str:
    """Aligned per-chapter table with per-pair detail."""
    lines = []
    for entry in report.chapters:
        pair_text = "  ".join(
            f"{a}/{b}={value:.3f}" for (a, b), value in entry.pair_kappas
        )
        lines.append(f"{entry.chapter:<6} kappa={entry.kappa:.3f}  {pair_text}".rstrip())
    if report.overall is not None:
        lines.append(f"overall mean kappa={report.overall:.3f}")
    else:
        lines.append("no computable chapter kappa values")
    return "\n".join(lines) + "\n"
