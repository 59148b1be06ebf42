"""HTTP annotation service: task queue, verdict submission, agreement.

The browser annotator consumes only this API:

* ``GET  /api/tasks/next?annotator=ID`` — first mention (extraction
  order) the annotator has not yet judged, with its sentence and the
  neighbouring sentences for context, plus the record's current
  version for optimistic locking.  An exhausted queue returns
  ``{"task": null, ...}``, not an error.
* ``POST /api/annotations`` — upsert one verdict.  The body carries the
  version the client last saw; a stale version gets 409, an unknown
  mention 404.
* ``GET  /api/agreement`` — per-chapter Cohen's κ report.
* ``GET  /api/progress?annotator=ID`` — done/remaining counts.
* ``GET  /api/mentions/{doc_id}`` — extracted mentions of a document.

Domain errors map to JSON bodies ``{"code": ..., "message": ...}``.
Writes go through the single shared store (single-writer contract);
reads are safe at any time, and a submitted verdict is visible to
every subsequent read (read-your-writes).
"""
from __future__ import annotations

from datetime import datetime, timezone
from functools import lru_cache

from fastapi import FastAPI, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .annotation import AnnotationRecord, AnnotationStore, kappa_report
from .context import Temporality
from .corpus import Corpus
from .errors import (
    ArgumentError,
    UnknownMentionError,
    ValidationError,
    VersionConflictError,
)
from .matcher import Mention
from .terminology import Lexicon
from .textproc import segment_sentences


class VerdictBody(BaseModel):
    doc_id: str
    start: int
    end: int
    cui: str
    annotator_id: str = Field(min_length=1)
    correct: bool
    negated: bool
    temporality: str
    timestamp: str | None = None
    version: int = 0


def _mention_payload(mention: Mention) -> dict:
    attrs = mention.attributes
    return {
        "doc_id": mention.doc_id,
        "cui": mention.cui,
        "icd_code": mention.icd_code,
        "chapter": mention.chapter,
        "start": mention.start,
        "end": mention.end,
        "matched_text": mention.matched_text,
        "sentence_index": mention.sentence_index,
        "negated": attrs.negated if attrs else None,
        "temporality": attrs.temporality.value if attrs else None,
    }


def build_app(store: AnnotationStore, corpus: Corpus, lexicon: Lexicon) -> FastAPI:
    app = FastAPI(title="comorbid annotation service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    preferred_terms = {entry.cui: entry.preferred_term for entry in lexicon.entries}
    chapter_lookup = lexicon.chapter_lookup()

    @lru_cache(maxsize=4096)
    def sentence_spans(doc_id: str):
        return segment_sentences(corpus.get(doc_id).text)

    def task_payload(mention: Mention) -> dict:
        doc = corpus.get(mention.doc_id)
        spans = sentence_spans(mention.doc_id)
        sent = spans[mention.sentence_index]
        prior = (
            doc.text[spans[mention.sentence_index - 1].start : spans[mention.sentence_index - 1].end]
            if mention.sentence_index > 0
            else None
        )
        nxt = (
            doc.text[spans[mention.sentence_index + 1].start : spans[mention.sentence_index + 1].end]
            if mention.sentence_index + 1 < len(spans)
            else None
        )
        attrs = mention.attributes
        return {
            "doc_id": mention.doc_id,
            "start": mention.start,
            "end": mention.end,
            "cui": mention.cui,
            "icd_code": mention.icd_code,
            "chapter": mention.chapter,
            "preferred_term": preferred_terms.get(mention.cui, mention.matched_text),
            "matched_text": mention.matched_text,
            "sentence_index": mention.sentence_index,
            "context": {
                "prior": prior,
                "current": doc.text[sent.start : sent.end],
                "next": nxt,
            },
            "highlight": {"start": mention.start - sent.start, "end": mention.end - sent.start},
            "suggested": {
                "negated": attrs.negated if attrs else None,
                "temporality": attrs.temporality.value if attrs else None,
            },
        }

    def progress_counts(annotator: str) -> tuple[int, int]:
        done = sum(
            1
            for m in store.mentions()
            if store.version((m.doc_id, m.start, m.end, m.cui), annotator) > 0
        )
        return done, len(store.mentions()) - done

    @app.exception_handler(UnknownMentionError)
    async def _unknown(request: Request, exc: UnknownMentionError):
        return JSONResponse(
            status_code=404, content={"code": "unknown-mention", "message": str(exc)}
        )

    @app.exception_handler(VersionConflictError)
    async def _conflict(request: Request, exc: VersionConflictError):
        return JSONResponse(
            status_code=409,
            content={
                "code": "version-conflict",
                "message": str(exc),
                "current_version": exc.expected,
            },
        )

    @app.exception_handler(ValidationError)
    async def _invalid(request: Request, exc: ValidationError):
        return JSONResponse(status_code=400, content={"code": "invalid", "message": str(exc)})

    @app.exception_handler(ArgumentError)
    async def _badargs(request: Request, exc: ArgumentError):
        return JSONResponse(status_code=400, content={"code": "bad-argument", "message": str(exc)})

    @app.get("/api/tasks/next")
    def next_task(annotator: str = Query(min_length=1)):
        done, remaining = progress_counts(annotator)
        for mention in store.mentions():
            key = (mention.doc_id, mention.start, mention.end, mention.cui)
            if store.version(key, annotator) == 0:
                payload = task_payload(mention)
                payload["version"] = 0
                return {"task": payload, "done": done, "remaining": remaining}
        return {"task": None, "done": done, "remaining": 0}

    @app.post("/api/annotations")
    def submit(body: VerdictBody):
        try:
            temporality = Temporality(body.temporality)
        except ValueError:
            raise ValidationError(
                f"temporality must be one of {[t.value for t in Temporality]}, "
                f"got {body.temporality!r}"
            ) from None
        record = AnnotationRecord(
            doc_id=body.doc_id,
            start=body.start,
            end=body.end,
            cui=body.cui,
            annotator_id=body.annotator_id,
            correct=body.correct,
            negated=body.negated,
            temporality=temporality,
            timestamp=body.timestamp or datetime.now(timezone.utc).isoformat(),
        )
        version = store.record_annotation(record, expected_version=body.version)
        return {"version": version}

    @app.get("/api/agreement")
    def agreement():
        records = store.records()
        annotators = sorted({r.annotator_id for r in records})
        pairs = [(a, b) for i, a in enumerate(annotators) for b in annotators[i + 1 :]]
        if not pairs:
            return {"chapters": [], "overall": None}
        report = kappa_report(records, pairs, chapter_lookup)
        return {
            "chapters": [
                {
                    "chapter": entry.chapter,
                    "kappa": entry.kappa,
                    "pairs": [
                        {"a": a, "b": b, "kappa": value}
                        for (a, b), value in entry.pair_kappas
                    ],
                }
                for entry in report.chapters
            ],
            "overall": report.overall,
        }

    @app.get("/api/progress")
    def progress(annotator: str = Query(min_length=1)):
        done, remaining = progress_counts(annotator)
        return {
            "annotator": annotator,
            "done": done,
            "remaining": remaining,
            "total": len(store.mentions()),
        }

    @app.get("/api/mentions/{doc_id}")
    def mentions_for(doc_id: str):
        try:
            corpus.get(doc_id)
        except KeyError:
            return JSONResponse(
                status_code=404,
                content={"code": "unknown-document", "message": f"no document {doc_id!r}"},
            )
        found = [m for m in store.mentions() if m.doc_id == doc_id]
        return {"doc_id": doc_id, "mentions": [_mention_payload(m) for m in found]}

    @app.get("/api/export")
    def export():
        return {"records": [_record_payload(r) for r in store.records()]}

    return app


def _record_payload(record: AnnotationRecord) -> dict:
    return {
        "doc_id": record.doc_id,
        "start": record.start,
        "end": record.end,
        "cui": record.cui,
        "annotator_id": record.annotator_id,
        "correct": record.correct,
        "negated": record.negated,
        "temporality": record.temporality.value,
        "timestamp": record.timestamp,
    }
