"""Stratified k-fold evaluation of per-condition mention filters.

Gold instances are split into k folds stratified by (condition CUI,
label): within each stratum the instance ids are shuffled with a
seeded generator and dealt round-robin, so fold sizes per stratum
differ by at most one and the whole plan is a pure function of
(instances, k, seed).

Each condition is evaluated with its own forest.  For every fold, a
feature vocabulary is frozen from the training folds only (no
leakage), a forest is trained on the training folds, and the held-out
fold is scored; true/false positives and false negatives accumulate
across folds.  A condition is skipped — with a reason, never silently —
when it cannot give every training split both classes.

Aggregation is macro throughout: chapter precision/recall/F1 are
unweighted means over the chapter's conditions (chapter F1 is the mean
of condition F1s, not the harmonic mean of chapter means), and the
overall row is the unweighted mean over chapters.  Undefined
precision/recall (zero denominators) are reported as 0.0 with explicit
flags rather than errors.

By default instances whose gold attributes mark them negated or
historic are excluded before splitting (the relevance rule);
``include_irrelevant=True`` keeps them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import ArgumentError
from .filtermodel import (
    FeaturePair,
    FeatureVocab,
    ForestParams,
    Label,
    TrainInstance,
    encode_pairs,
    predict,
    train_forest,
)
from .rng import SplitMix64, fnv1a64, mix64
from .terminology import chapter_sort_key

REASON_SINGLE_CLASS = "single-class"
REASON_FOLD_MISSING_CLASS = "fold-missing-class"
REASON_NO_RELEVANT_INSTANCES = "no-relevant-instances"


@dataclass(frozen=True)
class EvalInstance:
    """One adjudicated mention, carried in vocabulary-independent form."""

    cui: str
    chapter: str
    label: Label
    pairs: frozenset[FeaturePair]
    relevant: bool = True


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: tuple[int, ...]  # instance index -> fold index
    seed: int

    def fold_of(self, instance_id: int) -> int:
        return self.assignments[instance_id]

    def test_indices(self, fold: int) -> list[int]:
        return [i for i, f in enumerate(self.assignments) if f == fold]

    def train_indices(self, fold: int) -> list[int]:
        return [i for i, f in enumerate(self.assignments) if f != fold]


def kfold_split(instances: Sequence[EvalInstance], k: int, seed: int) -> FoldPlan:
    """Stratified fold assignment: shuffle each (cui, label) stratum, deal % k."""
    if k < 2:
        raise ArgumentError(f"k must be at least 2, got {k}")
    strata: dict[tuple[str, str], list[int]] = {}
    for i, inst in enumerate(instances):
        strata.setdefault((inst.cui, inst.label.value), []).append(i)
    assignments = [0] * len(instances)
    for key in sorted(strata):
        ids = strata[key]
        rng = SplitMix64(mix64(seed ^ fnv1a64(f"{key[0]}|{key[1]}")))
        rng.shuffle(ids)
        for position, instance_id in enumerate(ids):
            assignments[instance_id] = position % k
    return FoldPlan(k=k, assignments=tuple(assignments), seed=seed)


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    precision_undefined: bool = False
    recall_undefined: bool = False


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def prf(tp: int, fp: int, fn: int) -> Metrics:
    """Precision/recall/F1 with zero-denominator cases flagged, not raised."""
    if min(tp, fp, fn) < 0:
        raise ArgumentError("counts must be non-negative")
    precision_undefined = tp + fp == 0
    recall_undefined = tp + fn == 0
    precision = 0.0 if precision_undefined else tp / (tp + fp)
    recall = 0.0 if recall_undefined else tp / (tp + fn)
    return Metrics(
        precision=precision,
        recall=recall,
        f1=f1_score(precision, recall),
        precision_undefined=precision_undefined,
        recall_undefined=recall_undefined,
    )


@dataclass(frozen=True)
class ConditionMetrics:
    cui: str
    chapter: str
    instances: int
    tp: int
    fp: int
    fn: int
    tn: int
    metrics: Metrics


@dataclass(frozen=True)
class ChapterMetrics:
    chapter: str
    instances: int
    precision: float
    recall: float
    f1: float
    conditions: tuple[ConditionMetrics, ...]


@dataclass(frozen=True)
class SkippedCondition:
    cui: str
    chapter: str
    reason: str


@dataclass(frozen=True)
class ChapterMetricsReport:
    k: int
    seed: int
    chapters: tuple[ChapterMetrics, ...]
    overall_precision: float | None
    overall_recall: float | None
    overall_f1: float | None
    skipped: tuple[SkippedCondition, ...]

    def chapter(self, chapter_id: str) -> ChapterMetrics | None:
        for entry in self.chapters:
            if entry.chapter == chapter_id:
                return entry
        return None


def _condition_seed(seed: int, cui: str, fold: int) -> int:
    """Distinct deterministic training seed per (condition, fold)."""
    return mix64(seed ^ fnv1a64(f"{cui}|fold{fold}"))


def _evaluate_condition(
    cui: str,
    instances: list[EvalInstance],
    k: int,
    params: ForestParams,
    seed: int,
) -> ConditionMetrics | SkippedCondition:
    chapter = instances[0].chapter
    labels = {inst.label for inst in instances}
    if len(labels) < 2:
        return SkippedCondition(cui=cui, chapter=chapter, reason=REASON_SINGLE_CLASS)
    plan = kfold_split(instances, k, seed)
    for fold in range(k):
        train_labels = {instances[i].label for i in plan.train_indices(fold)}
        if len(train_labels) < 2:
            return SkippedCondition(cui=cui, chapter=chapter, reason=REASON_FOLD_MISSING_CLASS)
    tp = fp = fn = tn = 0
    for fold in range(k):
        train_ids = plan.train_indices(fold)
        test_ids = plan.test_indices(fold)
        if not test_ids:
            continue
        vocab = FeatureVocab.build(
            pair for i in train_ids for pair in instances[i].pairs
        )
        train_set = [
            TrainInstance(
                features=encode_pairs(instances[i].pairs, vocab),
                label=instances[i].label,
                cui=cui,
                chapter=chapter,
            )
            for i in train_ids
        ]
        model = train_forest(train_set, params, _condition_seed(seed, cui, fold), vocab)
        for i in test_ids:
            predicted, _ = predict(model, encode_pairs(instances[i].pairs, vocab))
            actual = instances[i].label
            if predicted is Label.TRUE_MENTION and actual is Label.TRUE_MENTION:
                tp += 1
            elif predicted is Label.TRUE_MENTION:
                fp += 1
            elif actual is Label.TRUE_MENTION:
                fn += 1
            else:
                tn += 1
    return ConditionMetrics(
        cui=cui,
        chapter=chapter,
        instances=len(instances),
        tp=tp,
        fp=fp,
        fn=fn,
        tn=tn,
        metrics=prf(tp, fp, fn),
    )


def evaluate(
    gold: Sequence[EvalInstance],
    k: int,
    params: ForestParams,
    seed: int,
    include_irrelevant: bool = False,
) -> ChapterMetricsReport:
    """Cross-validated per-chapter report; deterministic given (gold, k, params, seed)."""
    if not gold:
        raise ArgumentError("cannot evaluate an empty gold set")
    if k < 2:
        raise ArgumentError(f"k must be at least 2, got {k}")
    params.validate()
    all_conditions: dict[str, list[EvalInstance]] = {}
    for inst in gold:
        all_conditions.setdefault(inst.cui, []).append(inst)
    skipped: list[SkippedCondition] = []
    evaluated: list[ConditionMetrics] = []
    for cui in sorted(all_conditions):
        instances = all_conditions[cui]
        if not include_irrelevant:
            kept = [inst for inst in instances if inst.relevant]
            if not kept:
                skipped.append(
                    SkippedCondition(
                        cui=cui,
                        chapter=instances[0].chapter,
                        reason=REASON_NO_RELEVANT_INSTANCES,
                    )
                )
                continue
            instances = kept
        outcome = _evaluate_condition(cui, instances, k, params, seed)
        if isinstance(outcome, SkippedCondition):
            skipped.append(outcome)
        else:
            evaluated.append(outcome)
    by_chapter: dict[str, list[ConditionMetrics]] = {}
    for cond in evaluated:
        by_chapter.setdefault(cond.chapter, []).append(cond)
    chapters: list[ChapterMetrics] = []
    for chapter_id in sorted(by_chapter, key=chapter_sort_key):
        conds = sorted(by_chapter[chapter_id], key=lambda c: c.cui)
        chapters.append(
            ChapterMetrics(
                chapter=chapter_id,
                instances=sum(c.instances for c in conds),
                precision=sum(c.metrics.precision for c in conds) / len(conds),
                recall=sum(c.metrics.recall for c in conds) / len(conds),
                f1=sum(c.metrics.f1 for c in conds) / len(conds),
                conditions=tuple(conds),
            )
        )
    if chapters:
        overall_p = sum(ch.precision for ch in chapters) / len(chapters)
        overall_r = sum(ch.recall for ch in chapters) / len(chapters)
        overall_f = sum(ch.f1 for ch in chapters) / len(chapters)
    else:
        overall_p = overall_r = overall_f = None
    return ChapterMetricsReport(
        k=k,
        seed=seed,
        chapters=tuple(chapters),
        overall_precision=overall_p,
        overall_recall=overall_r,
        overall_f1=overall_f,
        skipped=tuple(sorted(skipped, key=lambda s: s.cui)),
    )


# -- rendering ------------------------------------------------------------

CSV_HEADER = "chapter,instances,precision,recall,f1"


def render_report_csv(report: ChapterMetricsReport) -> str:
    """One record per chapter plus a final macro row; floats at 6 decimals."""
    lines = [CSV_HEADER]
    for ch in report.chapters:
        lines.append(
            f"{ch.chapter},{ch.instances},{ch.precision:.6f},{ch.recall:.6f},{ch.f1:.6f}"
        )
    if report.overall_precision is not None:
        total = sum(ch.instances for ch in report.chapters)
        lines.append(
            f"macro,{total},{report.overall_precision:.6f},"
            f"{report.overall_recall:.6f},{report.overall_f1:.6f}"
        )
    return "\n".join(lines) + "\n"


def render_report_text(report: ChapterMetricsReport) -> str:
    """Aligned table of per-chapter macro metrics, three decimals."""
    rows = [("Chapter", "Instances", "Precision", "Recall", "F1")]
    for ch in report.chapters:
        rows.append(
            (ch.chapter, str(ch.instances), f"{ch.precision:.3f}", f"{ch.recall:.3f}", f"{ch.f1:.3f}")
        )
    if report.overall_precision is not None:
        total = sum(ch.instances for ch in report.chapters)
        rows.append(
            (
                "Macro",
                str(total),
                f"{report.overall_precision:.3f}",
                f"{report.overall_recall:.3f}",
                f"{report.overall_f1:.3f}",
            )
        )
    widths = [max(len(row[col]) for row in rows) for col in range(5)]
    lines = []
    for i, row in enumerate(rows):
        cells = [row[0].ljust(widths[0])] + [row[c].rjust(widths[c]) for c in range(1, 5)]
        lines.append("  ".join(cells).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    for entry in report.skipped:
        lines.append(f"skipped {entry.cui} ({entry.chapter}): {entry.reason}")
    return "\n".join(lines) + "\n"
