#!/usr/bin/env python3
"""Serve the annotation service over the hand-designed agreement fixture.

Loads the 50-mention cholera fixture from ``tests/fixtures/kappa/`` —
whose pre-seeded alice/bob verdicts form the (20, 5, 10, 15) table with
Cohen's kappa exactly 0.4 in chapter I — and starts the HTTP service on
top of it.  A fresh annotator then has 50 open tasks.

Intended for manual walkthroughs of the browser annotator and for the
frontend integration tests, which need a live service with a known
agreement value.  The annotation log is copied into a scratch directory
(or ``--log``) so submissions never touch the committed fixture.
"""
from __future__ import annotations

import argparse
import shutil
import tempfile
from datetime import date
from pathlib import Path

import uvicorn

from comorbid.annotation import open_store
from comorbid.corpus import Corpus, Document
from comorbid.pipeline import load_mentions
from comorbid.service import build_app
from comorbid.terminology import load_lexicon, load_mapping

FIXTURE = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "kappa"


def fixture_corpus(mentions) -> Corpus:
    """One single-sentence document per mention, matching the fixture spans."""
    documents = [
        Document(doc_id=doc_id, patient_id="p1", date=date(2021, 3, 1), text="cholera.")
        for doc_id in sorted({m.doc_id for m in mentions})
    ]
    return Corpus(documents=documents)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8100)
    parser.add_argument(
        "--log",
        type=Path,
        default=None,
        help="annotation log to serve from (default: scratch copy of the fixture log)",
    )
    args = parser.parse_args()

    if args.log is None:
        scratch = Path(tempfile.mkdtemp(prefix="comorbid-demo-"))
        log_path = scratch / "annotations.jsonl"
    else:
        log_path = args.log
    if not log_path.exists():
        log_path.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(FIXTURE / "annotations.jsonl", log_path)

    mentions = load_mentions(FIXTURE / "mentions.jsonl")
    mapping = load_mapping(FIXTURE / "mapping.csv")
    lexicon = load_lexicon(FIXTURE / "lexicon.tsv", mapping)
    store = open_store(log_path, mentions)
    app = build_app(store=store, corpus=fixture_corpus(mentions), lexicon=lexicon)

    print(f"serving agreement fixture from {log_path}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
