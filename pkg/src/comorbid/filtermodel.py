"""Bag-of-concept features and a from-scratch random-forest mention filter.

One forest is trained per condition concept.  An instance's features
describe which concepts were detected in the sentence containing the
candidate mention (including the candidate itself) and in the
immediately preceding sentence; both are binary presence indicators
over a vocabulary frozen at training time.

The forest is deliberately self-contained and bit-reproducible:

* All randomness comes from :class:`~comorbid.rng.SplitMix64`, a
  published 64-bit generator that cross-language ports can reproduce.
  Tree ``t`` draws from its own stream seeded ``seed + t`` (mod 2^64),
  so per-tree training can run on any number of threads and still
  produce byte-identical models.
* Each tree trains on a bootstrap resample the size of the training
  set (disable with ``bootstrap=False`` to train on the instances as
  given).  At every node, ``max_features`` candidate features are
  sampled without replacement from the same stream; the split with the
  best Gini gain wins and ties go to the lowest feature id.  Gain
  comparisons use exact rational arithmetic so tie-breaking never
  depends on floating-point noise.
* A leaf predicts its majority class; an exactly tied leaf — and an
  exactly tied forest vote — predicts ``TRUE_MENTION``, biasing the
  filter toward recall.

Models serialize to a canonical, versioned JSON document (UTF-8,
sorted keys, no whitespace) so equal models have equal bytes.
"""
from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import ArgumentError, DegenerateDataError, ParseError, ValidationError, VersionError
from .matcher import Mention
from .rng import _MASK64, SplitMix64
from .terminology import validate_cui

MODEL_MAGIC = "comorbid-forest"
MODEL_VERSION = 1


class Slot(enum.Enum):
    """Which sentence, relative to the candidate, a co-occurring concept sits in."""

    SAME_SENTENCE = "same"
    PRIOR_SENTENCE = "prior"


_SLOT_ORDER = {Slot.SAME_SENTENCE: 0, Slot.PRIOR_SENTENCE: 1}
_SLOT_BY_VALUE = {slot.value: slot for slot in Slot}

FeaturePair = tuple[Slot, str]


class Label(enum.Enum):
    TRUE_MENTION = "true_mention"
    NOT_MENTION = "not_mention"


@dataclass(frozen=True)
class FeatureVocab:
    """Frozen mapping from (slot, cui) pairs to dense feature ids."""

    pairs: tuple[FeaturePair, ...]

    @classmethod
    def build(cls, pairs: Iterable[FeaturePair]) -> "FeatureVocab":
        unique = sorted(set(pairs), key=lambda p: (_SLOT_ORDER[p[0]], p[1]))
        return cls(pairs=tuple(unique))

    def __len__(self) -> int:
        return len(self.pairs)

    def index(self) -> dict[FeaturePair, int]:
        return {pair: i for i, pair in enumerate(self.pairs)}


def context_pairs(mention: Mention, doc_mentions: Sequence[Mention]) -> frozenset[FeaturePair]:
    """Raw (slot, cui) context of one mention within its document.

    The vocabulary-independent form: evaluation stores these and
    re-encodes them against each training fold's vocabulary.
    """
    pairs: set[FeaturePair] = set()
    for other in doc_mentions:
        if other.sentence_index == mention.sentence_index:
            pairs.add((Slot.SAME_SENTENCE, other.cui))
        elif other.sentence_index == mention.sentence_index - 1:
            pairs.add((Slot.PRIOR_SENTENCE, other.cui))
    return frozenset(pairs)


def encode_features(
    mention: Mention, doc_mentions: Sequence[Mention], vocab: FeatureVocab
) -> frozenset[int]:
    """Active feature ids for a mention; pairs outside the vocab are ignored."""
    return encode_pairs(context_pairs(mention, doc_mentions), vocab)


def encode_pairs(pairs: Iterable[FeaturePair], vocab: FeatureVocab) -> frozenset[int]:
    index = vocab.index()
    return frozenset(index[pair] for pair in pairs if pair in index)


@dataclass(frozen=True)
class TrainInstance:
    features: frozenset[int]
    label: Label
    cui: str
    chapter: str


def gini(counts: Sequence[int]) -> float:
    """Gini impurity 1 − Σ pᵢ² of a class-count vector."""
    if any(c < 0 for c in counts):
        raise ArgumentError("class counts must be non-negative")
    total = sum(counts)
    if total == 0:
        raise ArgumentError("cannot compute impurity of an empty node")
    return 1.0 - sum((c / total) ** 2 for c in counts)


def _gain(parent: tuple[int, int], left: tuple[int, int], right: tuple[int, int]) -> Fraction:
    """Exact Gini gain of a split; comparable across candidates without float error."""
    n = parent[0] + parent[1]
    nl = left[0] + left[1]
    nr = right[0] + right[1]
    return (
        Fraction(left[0] ** 2 + left[1] ** 2, n * nl)
        + Fraction(right[0] ** 2 + right[1] ** 2, n * nr)
        - Fraction(parent[0] ** 2 + parent[1] ** 2, n * n)
    )


@dataclass(frozen=True)
class Split:
    feature: int
    left: int  # child node index, feature absent
    right: int  # child node index, feature present


@dataclass(frozen=True)
class Leaf:
    true_count: int
    not_count: int


Tree = tuple["Split | Leaf", ...]


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_features: int | None = None  # None: floor(sqrt(vocab size)), at least 1
    min_leaf: int = 1
    max_depth: int | None = None  # None: unlimited
    bootstrap: bool = True

    def validate(self) -> None:
        if self.n_trees < 1:
            raise ValidationError("n_trees must be at least 1")
        if self.min_leaf < 1:
            raise ValidationError("min_leaf must be at least 1")
        if self.max_features is not None and self.max_features < 1:
            raise ValidationError("max_features must be at least 1 when given")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValidationError("max_depth must be non-negative when given")

    def features_per_node(self, vocab_size: int) -> int:
        if self.max_features is not None:
            return min(self.max_features, vocab_size)
        return max(1, math.isqrt(vocab_size))


@dataclass(frozen=True)
class ForestModel:
    condition_cui: str
    trees: tuple[Tree, ...]
    params: ForestParams
    vocab: FeatureVocab
    seed: int
    # Debug record of each tree's bootstrap indices; not serialized.
    sample_record: tuple[tuple[int, ...], ...] | None = field(default=None, compare=False)


def _count_labels(instances: Sequence[TrainInstance], idxs: Sequence[int]) -> tuple[int, int]:
    true = sum(1 for i in idxs if instances[i].label is Label.TRUE_MENTION)
    return true, len(idxs) - true


def _build_tree(
    instances: Sequence[TrainInstance],
    params: ForestParams,
    vocab_size: int,
    rng: SplitMix64,
) -> tuple[Tree, tuple[int, ...]]:
    n = len(instances)
    if params.bootstrap:
        sample = tuple(rng.bootstrap_indices(n))
    else:
        sample = tuple(range(n))
    k = params.features_per_node(vocab_size)
    nodes: list[Split | Leaf | None] = []

    def build(idxs: list[int], depth: int) -> int:
        node_index = len(nodes)
        nodes.append(None)
        counts = _count_labels(instances, idxs)
        at_limit = params.max_depth is not None and depth >= params.max_depth
        if counts[0] == 0 or counts[1] == 0 or at_limit or vocab_size == 0:
            nodes[node_index] = Leaf(*counts)
            return node_index
        candidates = rng.sample_indices(vocab_size, k)
        best_feature = -1
        best_gain: Fraction | None = None
        for feature in candidates:
            left = [i for i in idxs if feature not in instances[i].features]
            if len(left) < params.min_leaf or len(idxs) - len(left) < params.min_leaf:
                continue
            right_counts = _count_labels(
                instances, [i for i in idxs if feature in instances[i].features]
            )
            left_counts = (counts[0] - right_counts[0], counts[1] - right_counts[1])
            gain = _gain(counts, left_counts, right_counts)
            if gain <= 0:
                continue
            if best_gain is None or gain > best_gain or (gain == best_gain and feature < best_feature):
                best_gain = gain
                best_feature = feature
        if best_gain is None:
            nodes[node_index] = Leaf(*counts)
            return node_index
        left_idxs = [i for i in idxs if best_feature not in instances[i].features]
        right_idxs = [i for i in idxs if best_feature in instances[i].features]
        left_child = build(left_idxs, depth + 1)
        right_child = build(right_idxs, depth + 1)
        nodes[node_index] = Split(best_feature, left_child, right_child)
        return node_index

    build(list(sample), 0)
    return tuple(node for node in nodes if node is not None), sample


def train_forest(
    instances: Sequence[TrainInstance],
    params: ForestParams,
    seed: int,
    vocab: FeatureVocab,
    n_jobs: int = 1,
    record_samples: bool = False,
) -> ForestModel:
    """Fit one forest for one condition; pure function of (instances, params, seed, vocab).

    ``n_jobs`` only chooses how many threads build trees; the result is
    byte-identical for every value.  ``record_samples`` keeps each
    tree's bootstrap indices on the model for debugging.
    """
    params.validate()
    if not instances:
        raise ArgumentError("cannot train on an empty instance list")
    cuis = {inst.cui for inst in instances}
    if len(cuis) > 1:
        raise ValidationError(f"instances mix condition CUIs: {sorted(cuis)}")
    labels = {inst.label for inst in instances}
    if len(labels) < 2:
        only = next(iter(labels))
        raise DegenerateDataError(f"all instances share label {only.value}; nothing to learn")
    vocab_size = len(vocab)
    for inst in instances:
        for fid in inst.features:
            if not 0 <= fid < vocab_size:
                raise ValidationError(
                    f"feature id {fid} outside vocabulary of size {vocab_size}"
                )
    condition_cui = next(iter(cuis))
    validate_cui(condition_cui)

    def one_tree(index: int) -> tuple[Tree, tuple[int, ...]]:
        rng = SplitMix64((seed + index) & _MASK64)
        return _build_tree(instances, params, vocab_size, rng)

    if n_jobs <= 1:
        built = [one_tree(t) for t in range(params.n_trees)]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            built = list(pool.map(one_tree, range(params.n_trees)))
    trees = tuple(tree for tree, _ in built)
    record = tuple(sample for _, sample in built) if record_samples else None
    return ForestModel(
        condition_cui=condition_cui,
        trees=trees,
        params=params,
        vocab=vocab,
        seed=seed,
        sample_record=record,
    )


def _tree_vote(tree: Tree, features: frozenset[int]) -> bool:
    """One tree's vote: True for TRUE_MENTION.  Tied leaves vote True."""
    node = tree[0]
    while isinstance(node, Split):
        node = tree[node.right] if node.feature in features else tree[node.left]
    return node.true_count >= node.not_count


def predict(model: ForestModel, features: frozenset[int]) -> tuple[Label, float]:
    """Majority vote over trees; exact ties go to TRUE_MENTION."""
    votes = sum(1 for tree in model.trees if _tree_vote(tree, features))
    score = votes / len(model.trees)
    label = Label.TRUE_MENTION if 2 * votes >= len(model.trees) else Label.NOT_MENTION
    return label, score


def _node_to_json(node: "Split | Leaf") -> dict:
    if isinstance(node, Split):
        return {"f": node.feature, "l": node.left, "r": node.right}
    return {"n": node.not_count, "t": node.true_count}


def _node_from_json(payload: dict) -> "Split | Leaf":
    if "f" in payload:
        return Split(feature=payload["f"], left=payload["l"], right=payload["r"])
    return Leaf(true_count=payload["t"], not_count=payload["n"])


def serialize_model(model: ForestModel) -> bytes:
    """Canonical UTF-8 JSON bytes: equal models serialize to equal bytes."""
    payload = {
        "magic": MODEL_MAGIC,
        "version": MODEL_VERSION,
        "condition_cui": model.condition_cui,
        "seed": model.seed,
        "params": {
            "n_trees": model.params.n_trees,
            "max_features": model.params.max_features,
            "min_leaf": model.params.min_leaf,
            "max_depth": model.params.max_depth,
            "bootstrap": model.params.bootstrap,
        },
        "vocab": [[slot.value, cui] for slot, cui in model.vocab.pairs],
        "trees": [[_node_to_json(node) for node in tree] for tree in model.trees],
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def deserialize_model(blob: bytes) -> ForestModel:
    try:
        payload = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"model payload is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("magic") != MODEL_MAGIC:
        raise ParseError("model payload lacks the expected header")
    version = payload.get("version")
    if version != MODEL_VERSION:
        raise VersionError(expected=MODEL_VERSION, found=version)
    try:
        params = ForestParams(
            n_trees=payload["params"]["n_trees"],
            max_features=payload["params"]["max_features"],
            min_leaf=payload["params"]["min_leaf"],
            max_depth=payload["params"]["max_depth"],
            bootstrap=payload["params"]["bootstrap"],
        )
        vocab = FeatureVocab(
            pairs=tuple((_SLOT_BY_VALUE[slot], cui) for slot, cui in payload["vocab"])
        )
        trees = tuple(
            tuple(_node_from_json(node) for node in tree) for tree in payload["trees"]
        )
        model = ForestModel(
            condition_cui=payload["condition_cui"],
            trees=trees,
            params=params,
            vocab=vocab,
            seed=payload["seed"],
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"model payload is malformed: {exc!r}") from exc
    _validate_model(model)
    return model


def _validate_model(model: ForestModel) -> None:
    if len(model.trees) != model.params.n_trees:
        raise ParseError(
            f"model declares {model.params.n_trees} trees but contains {len(model.trees)}"
        )
    vocab_size = len(model.vocab)
    for tree in model.trees:
        if not tree:
            raise ParseError("model contains an empty tree")
        for node in tree:
            if isinstance(node, Split):
                if not 0 <= node.feature < vocab_size:
                    raise ParseError(
                        f"split references feature {node.feature} outside vocabulary"
                    )
                if not (0 <= node.left < len(tree) and 0 <= node.right < len(tree)):
                    raise ParseError("split references a node outside its tree")


def save_model(model: ForestModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_model(model))


def load_model(path) -> ForestModel:
    with open(path, "rb") as fh:
        return deserialize_model(fh.read())
