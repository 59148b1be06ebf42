"""End-to-end orchestration: extract → adjudicate → train → evaluate.

This module glues the components together and owns the on-disk
interchange formats:

* Mention dump: one JSON object per line with keys ``doc_id``, ``cui``,
  ``icd_code``, ``chapter``, ``start``, ``end``, ``matched_text``,
  ``sentence_index``, ``negated``, ``temporality``, ``relevant``,
  sorted by (doc_id, start, end, cui).  Canonical JSON, so identical
  extractions are byte-identical files.
* Gold dump: one JSON object per line mirroring adjudicated instances
  (``label`` is ``true_mention``/``not_mention``; disputed attributes
  are ``null``).

Everything here is deterministic: extraction order follows corpus
order, and training/evaluation seeds derive only from the configured
seed.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Sequence

from .annotation import GoldInstance
from .context import (
    MentionAttributes,
    Temporality,
    TriggerSet,
    attribute_mention,
    default_triggers,
    is_relevant,
    scan_triggers,
)
from .corpus import Corpus, Document
from .errors import ParseError, ValidationError
from .evaluation import EvalInstance
from .filtermodel import (
    FeatureVocab,
    ForestModel,
    ForestParams,
    Label,
    TrainInstance,
    context_pairs,
    encode_pairs,
    load_model,
    predict,
    save_model,
    train_forest,
)
from .matcher import MatchIndex, Mention, find_mentions
from .rng import fnv1a64, mix64
from .textproc import segment_sentences, tokenize_all

logger = logging.getLogger(__name__)


def extract_document(
    doc: Document, index: MatchIndex, triggers: TriggerSet
) -> list[Mention]:
    """Segment, tokenize, match, and attribute one document."""
    sentences = segment_sentences(doc.text)
    token_lists = tokenize_all(doc.text, sentences)
    mentions = find_mentions(doc, index, sentences, token_lists)
    attributed: list[Mention] = []
    occurrences_by_sentence: dict[int, list] = {}
    for mention in mentions:
        tokens = token_lists[mention.sentence_index]
        if mention.sentence_index not in occurrences_by_sentence:
            occurrences_by_sentence[mention.sentence_index] = scan_triggers(tokens, triggers)
        attrs = attribute_mention(
            mention, tokens, triggers,
            occurrences=occurrences_by_sentence[mention.sentence_index],
        )
        attributed.append(mention.with_attributes(attrs))
    return attributed


def run_extract(
    corpus: Corpus, index: MatchIndex, triggers: TriggerSet | None = None
) -> list[Mention]:
    """Attributed mentions for a whole corpus, sorted by (doc_id, start)."""
    if triggers is None:
        triggers = default_triggers()
    mentions: list[Mention] = []
    for doc in corpus.documents:
        mentions.extend(extract_document(doc, index, triggers))
    mentions.sort(key=lambda m: (m.doc_id, m.start, m.end, m.cui))
    return mentions


# -- mention dump I/O -----------------------------------------------------


def mention_to_json(mention: Mention) -> str:
    attrs = mention.attributes
    if attrs is None:
        raise ValidationError(f"mention {mention.doc_id}@{mention.start} lacks attributes")
    return json.dumps(
        {
            "doc_id": mention.doc_id,
            "cui": mention.cui,
            "icd_code": mention.icd_code,
            "chapter": mention.chapter,
            "start": mention.start,
            "end": mention.end,
            "matched_text": mention.matched_text,
            "sentence_index": mention.sentence_index,
            "negated": attrs.negated,
            "temporality": attrs.temporality.value,
            "relevant": is_relevant(attrs),
        },
        sort_keys=True,
        separators=(",", ":"),
    )


def mention_from_json(line: str, lineno: int | None = None) -> Mention:
    try:
        payload = json.loads(line)
        attrs = MentionAttributes(
            negated=payload["negated"],
            temporality=Temporality(payload["temporality"]),
        )
        return Mention(
            doc_id=payload["doc_id"],
            cui=payload["cui"],
            icd_code=payload["icd_code"],
            chapter=payload["chapter"],
            start=payload["start"],
            end=payload["end"],
            matched_text=payload["matched_text"],
            sentence_index=payload["sentence_index"],
            attributes=attrs,
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad mention record: {exc!r}", line=lineno) from exc


def write_mentions(mentions: Sequence[Mention], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for mention in mentions:
            fh.write(mention_to_json(mention) + "\n")


def load_mentions(path: str | Path) -> list[Mention]:
    mentions = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                mentions.append(mention_from_json(line, lineno=lineno))
    return mentions


# -- gold dump I/O --------------------------------------------------------


def gold_to_json(instance: GoldInstance) -> str:
    return json.dumps(
        {
            "doc_id": instance.doc_id,
            "start": instance.start,
            "end": instance.end,
            "cui": instance.cui,
            "label": instance.label.value,
            "gold_negated": instance.gold_negated,
            "gold_temporality": (
                instance.gold_temporality.value if instance.gold_temporality else None
            ),
        },
        sort_keys=True,
        separators=(",", ":"),
    )


def gold_from_json(line: str, lineno: int | None = None) -> GoldInstance:
    try:
        payload = json.loads(line)
        return GoldInstance(
            doc_id=payload["doc_id"],
            start=payload["start"],
            end=payload["end"],
            cui=payload["cui"],
            label=Label(payload["label"]),
            gold_negated=payload["gold_negated"],
            gold_temporality=(
                Temporality(payload["gold_temporality"])
                if payload["gold_temporality"] is not None
                else None
            ),
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad gold record: {exc!r}", line=lineno) from exc


def write_gold(instances: Sequence[GoldInstance], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for instance in instances:
            fh.write(gold_to_json(instance) + "\n")


def load_gold(path: str | Path) -> list[GoldInstance]:
    instances = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                instances.append(gold_from_json(line, lineno=lineno))
    return instances


# -- gold + mentions -> evaluation instances ------------------------------


def eval_instances(
    gold: Sequence[GoldInstance], mentions: Sequence[Mention]
) -> list[EvalInstance]:
    """Join adjudicated labels with extraction context features.

    Features use every extracted mention in the document (relevant or
    not) as context, mirroring what the extractor saw.  An instance is
    irrelevant when its gold attributes mark it negated or historic;
    disputed (null) attributes leave it relevant.
    """
    by_doc: dict[str, list[Mention]] = {}
    by_key: dict[tuple, Mention] = {}
    for mention in mentions:
        by_doc.setdefault(mention.doc_id, []).append(mention)
        by_key[(mention.doc_id, mention.start, mention.end, mention.cui)] = mention
    instances: list[EvalInstance] = []
    for inst in gold:
        mention = by_key.get(inst.mention_key())
        if mention is None:
            raise ValidationError(
                f"gold instance {inst.mention_key()} has no matching extracted mention"
            )
        relevant = not (
            inst.gold_negated is True or inst.gold_temporality is Temporality.HISTORIC
        )
        instances.append(
            EvalInstance(
                cui=inst.cui,
                chapter=mention.chapter,
                label=inst.label,
                pairs=context_pairs(mention, by_doc[mention.doc_id]),
                relevant=relevant,
            )
        )
    return instances


# -- per-condition training over full gold --------------------------------


def model_filename(cui: str) -> str:
    return f"{cui}.forest.json"


def train_models(
    instances: Sequence[EvalInstance],
    params: ForestParams,
    seed: int,
    model_dir: str | Path,
    include_irrelevant: bool = False,
) -> tuple[list[str], list[tuple[str, str]]]:
    """Train and save one forest per trainable condition.

    Returns (trained CUIs, skipped (cui, reason) pairs).  The per-model
    seed derives from the configured seed and the CUI so conditions get
    independent yet reproducible randomness.
    """
    model_dir = Path(model_dir)
    model_dir.mkdir(parents=True, exist_ok=True)
    by_cui: dict[str, list[EvalInstance]] = {}
    for inst in instances:
        if include_irrelevant or inst.relevant:
            by_cui.setdefault(inst.cui, []).append(inst)
    trained: list[str] = []
    skipped: list[tuple[str, str]] = []
    for cui in sorted(by_cui):
        group = by_cui[cui]
        if len({inst.label for inst in group}) < 2:
            skipped.append((cui, "single-class"))
            logger.warning("skipping %s: all instances share one label", cui)
            continue
        vocab = FeatureVocab.build(pair for inst in group for pair in inst.pairs)
        train_set = [
            TrainInstance(
                features=encode_pairs(inst.pairs, vocab),
                label=inst.label,
                cui=cui,
                chapter=inst.chapter,
            )
            for inst in group
        ]
        model = train_forest(train_set, params, mix64(seed ^ fnv1a64(cui)), vocab)
        save_model(model, model_dir / model_filename(cui))
        trained.append(cui)
    return trained, skipped


def load_models(model_dir: str | Path) -> dict[str, ForestModel]:
    models: dict[str, ForestModel] = {}
    for path in sorted(Path(model_dir).glob("*.forest.json")):
        model = load_model(path)
        models[model.condition_cui] = model
    return models


def score_mentions(
    mentions: Sequence[Mention], models: dict[str, ForestModel]
) -> list[Mention]:
    """Attach each condition model's vote fraction to its mentions.

    Mentions of conditions without a model pass through unscored,
    matching the training-time decision to skip untrainable conditions.
    """
    by_doc: dict[str, list[Mention]] = {}
    for mention in mentions:
        by_doc.setdefault(mention.doc_id, []).append(mention)
    scored: list[Mention] = []
    for mention in mentions:
        model = models.get(mention.cui)
        if model is None:
            scored.append(mention)
            continue
        features = encode_pairs(context_pairs(mention, by_doc[mention.doc_id]), model.vocab)
        _, score = predict(model, features)
        scored.append(mention.with_score(score))
    return scored
