"""Seeded synthetic test substrate: corpus, lexicon, and annotations.

Real source records are private, so the end-to-end tests run on a
generated world with fully known ground truth.  The generator plants
condition mentions in short clinical-note-style documents under a
controlled scheme:

* Separable conditions get true mentions and false-positive mentions
  ("... screening was requested") whose context differs by marker
  concepts: a false mention is always preceded by a sentence containing
  the false-marker concept, and most true mentions by one containing
  the true-marker concept.  A bag-of-concept classifier can therefore
  separate them from (PriorSentence, marker) features alone.
* Two conditions are deliberately inseparable (no markers), and a few
  true mentions are rendered negated or historic to exercise the
  attribution and relevance paths.
* Marker concepts appear only as true mentions, so they train as
  single-class conditions and exercise the skip path.

Two synthetic annotators review every extracted mention: ``alice``
reproduces the planted truth; ``bob`` flips a deterministic,
hash-selected slice of verdicts so adjudication discards some
instances and κ is non-trivial.

Everything derives from one seed.  Generation re-runs the real
extractor over the generated corpus and asserts that extracted
mentions and planted mentions agree one-for-one, so the fixture can
never drift from the pipeline.
"""
from __future__ import annotations

import datetime
import json
from dataclasses import dataclass
from pathlib import Path

from .annotation import AnnotationRecord, record_to_json
from .context import Temporality, default_triggers
from .corpus import Corpus, Document, write_corpus
from .errors import ValidationError
from .matcher import build_index
from .pipeline import run_extract, write_mentions
from .rng import SplitMix64, fnv1a64, mix64
from .terminology import IcdMapping, Lexicon, LexiconEntry, chapter_sort_key, save_mapping

ANNOTATOR_A = "alice"
ANNOTATOR_B = "bob"

# Kinds of planted mention.
TRUE_MARKED = "true_marked"  # true, with the true-marker concept in the prior sentence
TRUE_PLAIN = "true_plain"
TRUE_NEGATED = "true_negated"
TRUE_HISTORIC = "true_historic"
FALSE_MARKED = "false_marked"  # false positive, false-marker concept in prior sentence
FALSE_PLAIN = "false_plain"  # false positive without marker: inseparable
MARKER = "marker"


@dataclass(frozen=True)
class SynthCondition:
    cui: str
    icd_code: str
    preferred: str
    synonyms: tuple[str, ...]
    separable: bool


MARKER_TRUE = SynthCondition("C0028754", "E66", "obesity", ("obesity",), False)
MARKER_FALSE = SynthCondition("C0019159", "B18", "viral hepatitis", ("hepatitis",), False)

SEPARABLE_CONDITIONS = (
    SynthCondition("C0008354", "A00", "cholera", ("cholera",), True),
    SynthCondition("C0002871", "D50", "anaemia", ("anaemia", "anemia"), True),
    SynthCondition("C0011849", "E11", "diabetes mellitus", ("diabetes", "type 2 diabetes"), True),
    SynthCondition("C0149931", "G43", "migraine", ("migraine",), True),
    SynthCondition("C0017601", "H40", "glaucoma", ("glaucoma",), True),
    SynthCondition("C0020538", "I10", "hypertension", ("hypertension", "high blood pressure"), True),
    SynthCondition("C0004096", "J45", "asthma", ("asthma",), True),
    SynthCondition("C0032285", "J18", "pneumonia", ("pneumonia",), True),
    SynthCondition("C0017152", "K29", "gastritis", ("gastritis",), True),
    SynthCondition("C0011615", "L30", "dermatitis", ("dermatitis", "eczema"), True),
    SynthCondition("C0003864", "M13", "arthritis", ("arthritis",), True),
    SynthCondition("C0027697", "N05", "nephritis", ("nephritis",), True),
)

INSEPARABLE_CONDITIONS = (
    SynthCondition("C0014544", "G40", "epilepsy", ("epilepsy",), False),
    SynthCondition("C0041296", "A16", "tuberculosis", ("tuberculosis",), False),
)

ALL_CONDITIONS = SEPARABLE_CONDITIONS + INSEPARABLE_CONDITIONS + (MARKER_TRUE, MARKER_FALSE)

_TRUE_TEMPLATES = (
    "{term} confirmed on examination.",
    "Ongoing {term} managed in primary care.",
    "Examination findings consistent with {term}.",
    "{term} remains stable on current treatment.",
)
_FALSE_TEMPLATES = (
    "{term} screening was requested.",
    "Leaflet about {term} provided to patient.",
    "Family worried about possible {term}.",
    "Awaiting {term} clinic appointment.",
)
_NEGATED_TEMPLATES = (
    "No evidence of {term} currently.",
    "Denies {term} at review.",
)
_HISTORIC_TEMPLATES = (
    "Past history of {term} documented.",
    "Previously had {term} many years ago.",
)
_TRUE_MARKER_SENTENCE = "Obesity documented at last visit."
_FALSE_MARKER_SENTENCE = "Recent viral hepatitis noted in record."
_FILLERS = (
    "Medication reviewed and repeat prescription issued.",
    "Attended clinic with family member today.",
    "Bloods arranged for next week.",
    "Sleep and appetite reported as adequate.",
    "Plan discussed and agreed with patient.",
)

# Per separable condition: 15 true (9 marked, 4 plain, 1 negated, 1 historic) + 9 false.
_SEPARABLE_KINDS = (
    [TRUE_MARKED] * 9 + [TRUE_PLAIN] * 4 + [TRUE_NEGATED, TRUE_HISTORIC] + [FALSE_MARKED] * 9
)
# Per inseparable condition: 8 true + 6 contextually identical false positives.
_INSEPARABLE_KINDS = [TRUE_PLAIN] * 8 + [FALSE_PLAIN] * 6


@dataclass(frozen=True)
class PlantedMention:
    doc_id: str
    sentence_index: int
    cui: str
    correct: bool
    negated: bool
    temporality: Temporality


@dataclass(frozen=True)
class SynthWorld:
    corpus_path: Path
    lexicon_path: Path
    mapping_path: Path
    annotations_path: Path
    mentions_path: Path
    config_path: Path
    meta_path: Path
    planted: tuple[PlantedMention, ...]
    separable_cuis: tuple[str, ...]


def _build_terminology() -> tuple[IcdMapping, Lexicon]:
    mapping = IcdMapping()
    entries = []
    for cond in ALL_CONDITIONS:
        mapping.add(cond.icd_code, cond.cui)
        entries.append(
            LexiconEntry(
                cui=cond.cui,
                preferred_term=cond.preferred,
                synonyms=cond.synonyms,
                icd_code=cond.icd_code,
            )
        )
    return mapping, Lexicon(entries=entries)


def _surface(cond: SynthCondition, rng: SplitMix64) -> str:
    choices = (cond.preferred,) + cond.synonyms
    return choices[rng.randrange(len(choices))]


def _block(kind: str, cond: SynthCondition, rng: SplitMix64) -> tuple[list[str], list[tuple]]:
    """Sentences for one planted instance plus (offset, cui, correct, neg, temp) plants."""
    term = _surface(cond, rng)
    sentences: list[str] = []
    plants: list[tuple] = []
    if kind == TRUE_MARKED:
        sentences.append(_TRUE_MARKER_SENTENCE)
        plants.append((0, MARKER_TRUE.cui, True, False, Temporality.RECENT))
    elif kind == FALSE_MARKED:
        sentences.append(_FALSE_MARKER_SENTENCE)
        plants.append((0, MARKER_FALSE.cui, True, False, Temporality.RECENT))
    offset = len(sentences)
    if kind in (TRUE_MARKED, TRUE_PLAIN):
        template = _TRUE_TEMPLATES[rng.randrange(len(_TRUE_TEMPLATES))]
        plants.append((offset, cond.cui, True, False, Temporality.RECENT))
    elif kind == TRUE_NEGATED:
        template = _NEGATED_TEMPLATES[rng.randrange(len(_NEGATED_TEMPLATES))]
        plants.append((offset, cond.cui, True, True, Temporality.RECENT))
    elif kind == TRUE_HISTORIC:
        template = _HISTORIC_TEMPLATES[rng.randrange(len(_HISTORIC_TEMPLATES))]
        plants.append((offset, cond.cui, True, False, Temporality.HISTORIC))
    elif kind in (FALSE_MARKED, FALSE_PLAIN):
        template = _FALSE_TEMPLATES[rng.randrange(len(_FALSE_TEMPLATES))]
        plants.append((offset, cond.cui, False, False, Temporality.RECENT))
    else:  # pragma: no cover - defensive
        raise ValueError(kind)
    sentence = template.format(term=term)
    sentence = sentence[0].upper() + sentence[1:]
    sentences.append(sentence)
    return sentences, plants


def _assemble_documents(
    seed: int,
) -> tuple[list[Document], list[PlantedMention]]:
    rng = SplitMix64(mix64(seed ^ fnv1a64("synth-corpus")))
    blocks: list[tuple[str, SynthCondition]] = []
    for cond in SEPARABLE_CONDITIONS:
        blocks.extend((kind, cond) for kind in _SEPARABLE_KINDS)
    for cond in INSEPARABLE_CONDITIONS:
        blocks.extend((kind, cond) for kind in _INSEPARABLE_KINDS)
    rng.shuffle(blocks)
    documents: list[Document] = []
    planted: list[PlantedMention] = []
    base_date = datetime.date(2019, 1, 2)
    position = 0
    doc_number = 0
    while position < len(blocks):
        doc_id = f"doc{doc_number:04d}"
        patient_id = f"p{1 + doc_number % 40:04d}"
        date = base_date + datetime.timedelta(days=(doc_number * 3) % 350)
        sentences: list[str] = []
        take = min(2 + rng.randrange(3), len(blocks) - position)  # 2..4 blocks
        for _ in range(take):
            kind, cond = blocks[position]
            position += 1
            block_sentences, plants = _block(kind, cond, rng)
            for offset, cui, correct, negated, temporality in plants:
                planted.append(
                    PlantedMention(
                        doc_id=doc_id,
                        sentence_index=len(sentences) + offset,
                        cui=cui,
                        correct=correct,
                        negated=negated,
                        temporality=temporality,
                    )
                )
            sentences.extend(block_sentences)
            if rng.randrange(100) < 35:
                sentences.append(_FILLERS[rng.randrange(len(_FILLERS))])
        documents.append(
            Document(
                doc_id=doc_id,
                patient_id=patient_id,
                date=date,
                text=" ".join(sentences),
            )
        )
        doc_number += 1
    return documents, planted


def _flip(salt: str, key: str, percent: int) -> bool:
    """Deterministic hash-based selection of roughly `percent`% of keys."""
    return fnv1a64(f"{salt}|{key}") % 100 < percent


def _annotations(
    planted: list[PlantedMention],
    extracted_keys: dict[tuple[str, int, str], tuple[int, int]],
) -> list[AnnotationRecord]:
    records: list[AnnotationRecord] = []
    stamp = datetime.datetime(2020, 2, 3, 9, 0, 0)
    for i, plant in enumerate(sorted(planted, key=lambda p: (p.doc_id, p.sentence_index, p.cui))):
        start, end = extracted_keys[(plant.doc_id, plant.sentence_index, plant.cui)]
        key = f"{plant.doc_id}|{start}|{end}|{plant.cui}"
        for annotator in (ANNOTATOR_A, ANNOTATOR_B):
            correct = plant.correct
            negated = plant.negated
            temporality = plant.temporality
            if annotator == ANNOTATOR_B:
                if _flip("correct", key, 7):
                    correct = not correct
                if _flip("negated", key, 3):
                    negated = not negated
                if _flip("temporality", key, 3):
                    temporality = (
                        Temporality.HISTORIC
                        if temporality is Temporality.RECENT
                        else Temporality.RECENT
                    )
            records.append(
                AnnotationRecord(
                    doc_id=plant.doc_id,
                    start=start,
                    end=end,
                    cui=plant.cui,
                    annotator_id=annotator,
                    correct=correct,
                    negated=negated,
                    temporality=temporality,
                    timestamp=(stamp + datetime.timedelta(seconds=2 * i)).isoformat(),
                )
            )
    return records


_CONFIG_TEMPLATE = """\
# Generated alongside the synthetic corpus; paths are relative to this file.
[paths]
lexicon = "lexicon.tsv"
mapping = "mapping.csv"
corpus = "corpus.jsonl"
model_dir = "models"
annotation_store = "annotations.jsonl"

[evaluation]
k = 10
seed = {seed}

[forest]
n_trees = 100
"""


def generate_world(out_dir: str | Path, seed: int = 42) -> SynthWorld:
    """Write the full synthetic world into ``out_dir`` and cross-check it."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mapping, lexicon = _build_terminology()
    documents, planted = _assemble_documents(seed)

    mapping_path = out / "mapping.csv"
    save_mapping(mapping, mapping_path)
    lexicon_path = out / "lexicon.tsv"
    with open(lexicon_path, "w", encoding="utf-8") as fh:
        fh.write("# cui\tpreferred_term\tsynonyms\ticd_code\n")
        for entry in lexicon.entries:
            fh.write(
                f"{entry.cui}\t{entry.preferred_term}\t{'|'.join(entry.synonyms)}\t{entry.icd_code}\n"
            )
    corpus_path = out / "corpus.jsonl"
    corpus = Corpus(documents=tuple(documents), excluded=0)
    write_corpus(documents, corpus_path)

    # Re-extract with the real pipeline and require planted/extracted agreement.
    index = build_index(lexicon)
    mentions = run_extract(corpus, index, default_triggers())
    extracted = {(m.doc_id, m.sentence_index, m.cui): (m.start, m.end) for m in mentions}
    if len(extracted) != len(mentions):
        raise ValidationError("synthetic corpus produced colliding mentions")
    planted_keys = {(p.doc_id, p.sentence_index, p.cui) for p in planted}
    if planted_keys != set(extracted):
        missing = sorted(planted_keys - set(extracted))[:5]
        extra = sorted(set(extracted) - planted_keys)[:5]
        raise ValidationError(
            f"extraction disagrees with planted mentions; missing={missing} extra={extra}"
        )
    by_key = {(m.doc_id, m.sentence_index, m.cui): m for m in mentions}
    for plant in planted:
        mention = by_key[(plant.doc_id, plant.sentence_index, plant.cui)]
        attrs = mention.attributes
        if attrs.negated != plant.negated or attrs.temporality != plant.temporality:
            raise ValidationError(
                f"attribution mismatch at {plant}: got negated={attrs.negated} "
                f"temporality={attrs.temporality.value}"
            )
    mentions_path = out / "mentions.jsonl"
    write_mentions(mentions, mentions_path)

    annotations_path = out / "annotations.jsonl"
    records = _annotations(planted, extracted)
    with open(annotations_path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(record_to_json(record) + "\n")

    config_path = out / "config.toml"
    config_path.write_text(_CONFIG_TEMPLATE.format(seed=seed), encoding="utf-8")

    separable = tuple(cond.cui for cond in SEPARABLE_CONDITIONS)
    meta_path = out / "meta.json"
    meta = {
        "seed": seed,
        "documents": len(documents),
        "planted_mentions": len(planted),
        "conditions": len(ALL_CONDITIONS),
        "chapters": sorted({m.chapter for m in mentions}, key=chapter_sort_key),
        "separable_cuis": list(separable),
        "annotators": [ANNOTATOR_A, ANNOTATOR_B],
    }
    meta_path.write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return SynthWorld(
        corpus_path=corpus_path,
        lexicon_path=lexicon_path,
        mapping_path=mapping_path,
        annotations_path=annotations_path,
        mentions_path=mentions_path,
        config_path=config_path,
        meta_path=meta_path,
        planted=tuple(planted),
        separable_cuis=separable,
    )


def generate_throughput_corpus(path: str | Path, seed: int = 7, target_bytes: int = 5 * 1024 * 1024) -> int:
    """A large corpus (default 5 MiB of text) for timing extraction throughput."""
    rng = SplitMix64(mix64(seed ^ fnv1a64("synth-throughput")))
    conditions = ALL_CONDITIONS
    documents: list[Document] = []
    base_date = datetime.date(2019, 1, 2)
    total = 0
    doc_number = 0
    while total < target_bytes:
        sentences = []
        for _ in range(12 + rng.randrange(8)):
            roll = rng.randrange(100)
            if roll < 55:
                sentences.append(_FILLERS[rng.randrange(len(_FILLERS))])
            else:
                cond = conditions[rng.randrange(len(conditions))]
                kind_roll = rng.randrange(100)
                if kind_roll < 60:
                    template = _TRUE_TEMPLATES[rng.randrange(len(_TRUE_TEMPLATES))]
                elif kind_roll < 80:
                    template = _FALSE_TEMPLATES[rng.randrange(len(_FALSE_TEMPLATES))]
                elif kind_roll < 90:
                    template = _NEGATED_TEMPLATES[rng.randrange(len(_NEGATED_TEMPLATES))]
                else:
                    template = _HISTORIC_TEMPLATES[rng.randrange(len(_HISTORIC_TEMPLATES))]
                sentence = template.format(term=_surface(cond, rng))
                sentences.append(sentence[0].upper() + sentence[1:])
        text = " ".join(sentences)
        total += len(text.encode("utf-8"))
        documents.append(
            Document(
                doc_id=f"bulk{doc_number:06d}",
                patient_id=f"p{1 + doc_number % 500:04d}",
                date=base_date + datetime.timedelta(days=doc_number % 350),
                text=text,
            )
        )
        doc_number += 1
    write_corpus(documents, path)
    return total
