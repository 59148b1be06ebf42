#!/usr/bin/env python3
"""Regenerate the committed expected-output fixtures under tests/fixtures/.

Two artifact groups:

* ``expected/report.csv`` and ``expected/report.txt`` — the cross-validated
  evaluation report of the seed-42 synthetic world.  The end-to-end test
  regenerates the world and requires byte-identical reports, so these files
  pin the whole pipeline (generation, extraction, adjudication, training,
  evaluation) at once.  Regenerate only after an intentional behaviour change,
  and review the diff.
* ``kappa/`` — a hand-designed two-annotator agreement fixture whose 2x2
  verdict table is (20, 5, 10, 15) by construction, so Cohen's kappa is
  exactly 0.4.  ``expected_kappa.csv`` holds that known value; the mention
  and annotation files are deterministic inputs.
"""
from __future__ import annotations

import json
import tempfile
from pathlib import Path

from comorbid.annotation import build_gold, record_from_json
from comorbid.evaluation import evaluate, render_report_csv, render_report_text
from comorbid.filtermodel import ForestParams
from comorbid.pipeline import eval_instances, load_mentions
from comorbid.synth import generate_world

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def regenerate_report(seed: int = 42, k: int = 10) -> None:
    with tempfile.TemporaryDirectory() as tmp:
        world = generate_world(tmp, seed=seed)
        mentions = load_mentions(world.mentions_path)
        with open(world.annotations_path, encoding="utf-8") as fh:
            records = [record_from_json(line) for line in fh if line.strip()]
    gold = build_gold(records)
    instances = eval_instances(gold.instances, mentions)
    report = evaluate(instances, k, ForestParams(n_trees=100), seed)
    out = FIXTURES / "expected"
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(render_report_csv(report), encoding="utf-8")
    (out / "report.txt").write_text(render_report_text(report), encoding="utf-8")
    overall = f"{report.overall_f1:.6f}" if report.overall_f1 is not None else "n/a"
    print(
        f"expected report: {len(gold.instances)} gold instances "
        f"({gold.discarded} discarded, {gold.under_annotated} under-annotated), "
        f"{len(report.chapters)} chapters, overall F1 {overall}"
    )


def regenerate_kappa_fixture() -> None:
    out = FIXTURES / "kappa"
    out.mkdir(parents=True, exist_ok=True)
    mention_lines = []
    annotation_lines = []
    for i in range(1, 51):
        doc = f"note{i:03d}"
        mention_lines.append(
            json.dumps(
                {
                    "chapter": "I",
                    "cui": "C0008354",
                    "doc_id": doc,
                    "end": 7,
                    "icd_code": "A00",
                    "matched_text": "cholera",
                    "negated": False,
                    "relevant": True,
                    "sentence_index": 0,
                    "start": 0,
                    "temporality": "recent",
                },
                sort_keys=True,
                separators=(",", ":"),
            )
        )
        # 20 both-true, 5 alice-only, 10 bob-only, 15 both-false
        alice = i <= 25
        bob = i <= 20 or 26 <= i <= 35
        for name, correct, stamp in (
            ("alice", alice, "2021-03-01T10:00:00"),
            ("bob", bob, "2021-03-01T11:00:00"),
        ):
            annotation_lines.append(
                json.dumps(
                    {
                        "annotator_id": name,
                        "correct": correct,
                        "cui": "C0008354",
                        "doc_id": doc,
                        "end": 7,
                        "negated": False,
                        "start": 0,
                        "temporality": "recent",
                        "timestamp": stamp,
                    },
                    sort_keys=True,
                    separators=(",", ":"),
                )
            )
    (out / "mentions.jsonl").write_text("\n".join(mention_lines) + "\n", encoding="utf-8")
    (out / "annotations.jsonl").write_text(
        "\n".join(annotation_lines) + "\n", encoding="utf-8"
    )
    # kappa((20,5,10,15)) = (0.7 - 0.5) / (1 - 0.5) = 0.4, derived by hand.
    (out / "expected_kappa.csv").write_text(
        "chapter,kappa\nI,0.400000\noverall,0.400000\n", encoding="utf-8"
    )
    print("kappa fixture: 50 mentions, 100 annotations, expected kappa 0.400000")


def main() -> int:
    regenerate_kappa_fixture()
    regenerate_report()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
