"""Feature encoding and the from-scratch random forest."""
from __future__ import annotations

import itertools
import random

import pytest

from comorbid.errors import (
    ArgumentError,
    DegenerateDataError,
    ParseError,
    ValidationError,
    VersionError,
)
from comorbid.filtermodel import (
    FeatureVocab,
    ForestModel,
    ForestParams,
    Label,
    Leaf,
    Slot,
    TrainInstance,
    context_pairs,
    deserialize_model,
    encode_features,
    gini,
    load_model,
    predict,
    save_model,
    serialize_model,
    train_forest,
)

from .conftest import make_mention
from ._oracles import exhaustive_gini_tree, nested_tree

CUI = "C0000001"


def inst(features, label, cui=CUI):
    return TrainInstance(
        features=frozenset(features),
        label=Label.TRUE_MENTION if label else Label.NOT_MENTION,
        cui=cui,
        chapter="I",
    )


def vocab_of_size(n: int) -> FeatureVocab:
    return FeatureVocab.build([(Slot.SAME_SENTENCE, f"C{i:07d}") for i in range(n)])


def single_tree_params(n_features: int) -> ForestParams:
    return ForestParams(n_trees=1, max_features=n_features, bootstrap=False)


class TestGini:
    def test_pure_node(self):
        assert gini((10, 0)) == 0.0

    def test_maximal_impurity(self):
        assert gini((5, 5)) == 0.5

    def test_hand_value(self):
        assert gini((3, 1)) == pytest.approx(0.375, abs=1e-15)

    def test_empty_rejected(self):
        with pytest.raises(ArgumentError):
            gini((0, 0))

    def test_negative_rejected(self):
        with pytest.raises(ArgumentError):
            gini((-1, 2))


class TestEncoding:
    def test_same_and_prior_sentence(self):
        m0 = make_mention("d", 0, 7, cui="C0008354", sentence_index=0)
        m1 = make_mention("d", 20, 28, cui="C0011849", icd_code="E11", sentence_index=1)
        pairs = context_pairs(m1, [m0, m1])
        assert pairs == frozenset(
            {(Slot.SAME_SENTENCE, "C0011849"), (Slot.PRIOR_SENTENCE, "C0008354")}
        )

    def test_first_sentence_sole_mention(self):
        m = make_mention("d", 0, 7, cui="C0008354", sentence_index=0)
        assert context_pairs(m, [m]) == frozenset({(Slot.SAME_SENTENCE, "C0008354")})

    def test_binary_encoding_ignores_repeats(self):
        m1 = make_mention("d", 0, 7, cui="C0008354", sentence_index=0)
        m2 = make_mention("d", 10, 17, cui="C0008354", sentence_index=0)
        assert context_pairs(m1, [m1, m2]) == frozenset(
            {(Slot.SAME_SENTENCE, "C0008354")}
        )

    def test_next_sentence_not_a_feature(self):
        m0 = make_mention("d", 0, 7, cui="C0008354", sentence_index=0)
        m1 = make_mention("d", 20, 28, cui="C0011849", icd_code="E11", sentence_index=1)
        assert context_pairs(m0, [m0, m1]) == frozenset(
            {(Slot.SAME_SENTENCE, "C0008354")}
        )

    def test_unseen_pairs_ignored_at_inference(self):
        vocab = FeatureVocab.build([(Slot.SAME_SENTENCE, "C0008354")])
        m0 = make_mention("d", 0, 7, cui="C0008354", sentence_index=0)
        m1 = make_mention("d", 9, 15, cui="C0099999", sentence_index=0)
        assert encode_features(m0, [m0, m1], vocab) == frozenset({0})

    def test_vocab_sorted_same_slot_first(self):
        vocab = FeatureVocab.build(
            [
                (Slot.PRIOR_SENTENCE, "C0000002"),
                (Slot.SAME_SENTENCE, "C0000009"),
                (Slot.SAME_SENTENCE, "C0000001"),
                (Slot.PRIOR_SENTENCE, "C0000002"),
            ]
        )
        assert vocab.pairs == (
            (Slot.SAME_SENTENCE, "C0000001"),
            (Slot.SAME_SENTENCE, "C0000009"),
            (Slot.PRIOR_SENTENCE, "C0000002"),
        )
        assert vocab.index()[(Slot.PRIOR_SENTENCE, "C0000002")] == 2


class TestParams:
    def test_defaults(self):
        params = ForestParams()
        assert params.n_trees == 100
        assert params.max_features is None
        assert params.min_leaf == 1
        assert params.max_depth is None
        assert params.bootstrap is True

    def test_sqrt_rule(self):
        params = ForestParams()
        assert params.features_per_node(16) == 4
        assert params.features_per_node(17) == 4
        assert params.features_per_node(1) == 1
        assert params.features_per_node(0) == 1

    def test_explicit_capped_at_vocab(self):
        assert ForestParams(max_features=10).features_per_node(4) == 4

    def test_validation(self):
        with pytest.raises(ValidationError):
            ForestParams(n_trees=0).validate()
        with pytest.raises(ValidationError):
            ForestParams(min_leaf=0).validate()
        with pytest.raises(ValidationError):
            ForestParams(max_features=0).validate()


SEPARABLE = [inst({0}, True) for _ in range(10)] + [inst(set(), False) for _ in range(10)]


class TestTrainErrors:
    def test_empty_rejected(self):
        with pytest.raises(ArgumentError):
            train_forest([], ForestParams(), 1, vocab_of_size(1))

    def test_single_class_rejected(self):
        data = [inst({0}, True) for _ in range(5)]
        with pytest.raises(DegenerateDataError):
            train_forest(data, ForestParams(), 1, vocab_of_size(1))

    def test_mixed_conditions_rejected(self):
        data = [inst({0}, True), inst(set(), False, cui="C0000002")]
        with pytest.raises(ValidationError, match="mix condition"):
            train_forest(data, ForestParams(), 1, vocab_of_size(1))

    def test_feature_id_outside_vocab_rejected(self):
        data = [inst({5}, True), inst(set(), False)]
        with pytest.raises(ValidationError, match="outside vocabulary"):
            train_forest(data, ForestParams(), 1, vocab_of_size(1))


class TestDeterminism:
    def test_same_seed_byte_identical(self):
        params = ForestParams(n_trees=20)
        a = train_forest(SEPARABLE, params, 42, vocab_of_size(1))
        b = train_forest(SEPARABLE, params, 42, vocab_of_size(1))
        assert serialize_model(a) == serialize_model(b)

    def test_different_seed_differs(self):
        # With bootstrap resampling the sampled multisets almost surely differ.
        data = [inst({i % 2}, i % 3 == 0) for i in range(12)]
        params = ForestParams(n_trees=5)
        a = train_forest(data, params, 1, vocab_of_size(2))
        b = train_forest(data, params, 2, vocab_of_size(2))
        assert serialize_model(a) != serialize_model(b)

    def test_thread_counts_byte_identical(self):
        params = ForestParams(n_trees=16)
        reference = serialize_model(train_forest(SEPARABLE, params, 7, vocab_of_size(1)))
        for n_jobs in (2, 4):
            model = train_forest(SEPARABLE, params, 7, vocab_of_size(1), n_jobs=n_jobs)
            assert serialize_model(model) == reference


class TestTraining:
    def test_separable_training_accuracy(self):
        model = train_forest(SEPARABLE, ForestParams(n_trees=25), 3, vocab_of_size(1))
        for instance in SEPARABLE:
            label, _ = predict(model, instance.features)
            assert label == instance.label

    def test_bootstrap_law(self):
        params = ForestParams(n_trees=10)
        model = train_forest(SEPARABLE, params, 5, vocab_of_size(1), record_samples=True)
        assert model.sample_record is not None
        assert len(model.sample_record) == 10
        for sample in model.sample_record:
            assert len(sample) == len(SEPARABLE)
            assert all(0 <= i < len(SEPARABLE) for i in sample)

    def test_bootstrap_disabled_uses_instances_as_given(self):
        params = ForestParams(n_trees=3, bootstrap=False)
        model = train_forest(SEPARABLE, params, 5, vocab_of_size(1), record_samples=True)
        for sample in model.sample_record:
            assert sample == tuple(range(len(SEPARABLE)))


class TestPredict:
    def _model(self, trees):
        return ForestModel(
            condition_cui=CUI,
            trees=trees,
            params=ForestParams(n_trees=len(trees)),
            vocab=vocab_of_size(0),
            seed=0,
        )

    def test_unanimous_true(self):
        model = self._model(((Leaf(3, 0),), (Leaf(2, 0),)))
        assert predict(model, frozenset()) == (Label.TRUE_MENTION, 1.0)

    def test_unanimous_not(self):
        model = self._model(((Leaf(0, 3),), (Leaf(0, 2),)))
        assert predict(model, frozenset()) == (Label.NOT_MENTION, 0.0)

    def test_exact_tie_goes_true(self):
        model = self._model(((Leaf(1, 0),), (Leaf(0, 1),)))
        assert predict(model, frozenset()) == (Label.TRUE_MENTION, 0.5)

    def test_tied_leaf_votes_true(self):
        model = self._model(((Leaf(2, 2),),))
        assert predict(model, frozenset()) == (Label.TRUE_MENTION, 1.0)

    def test_score_is_vote_fraction(self):
        data = [inst({i % 2}, i < 8) for i in range(14)]
        model = train_forest(data, ForestParams(n_trees=9), 11, vocab_of_size(2))
        for features in (frozenset(), frozenset({0}), frozenset({1}), frozenset({0, 1})):
            label, score = predict(model, features)
            votes = round(score * 9)
            assert score == votes / 9
            assert label == (
                Label.TRUE_MENTION if 2 * votes >= 9 else Label.NOT_MENTION
            )


def _rows_to_instances(rows):
    return [inst(features, label) for features, label in rows]


class TestSingleTreeOracle:
    """The library tree in full-feature single-tree mode must equal the
    exhaustive greedy-Gini oracle exactly; the complete enumeration runs
    in the acceptance suite."""

    def _assert_matches(self, rows, n_features):
        instances = _rows_to_instances(rows)
        labels = {label for _, label in rows}
        if len(labels) < 2:
            return
        model = train_forest(
            instances, single_tree_params(n_features), 0, vocab_of_size(n_features)
        )
        assert nested_tree(model.trees[0]) == exhaustive_gini_tree(
            list(rows), n_features
        )

    def test_single_feature_separable(self):
        rows = [(frozenset({0}), True)] * 3 + [(frozenset(), False)] * 3
        self._assert_matches(rows, 1)

    def test_tie_broken_by_lowest_feature(self):
        # Features 0 and 1 carry identical information; the tree must use 0.
        rows = [(frozenset({0, 1}), True)] * 2 + [(frozenset(), False)] * 2
        instances = _rows_to_instances(rows)
        model = train_forest(instances, single_tree_params(2), 0, vocab_of_size(2))
        root = model.trees[0][0]
        assert root.feature == 0
        self._assert_matches(rows, 2)

    def test_exhaustive_two_features_up_to_four_rows(self):
        patterns = [frozenset(), frozenset({0}), frozenset({1}), frozenset({0, 1})]
        cases = 0
        for n_rows in (2, 3, 4):
            for combo in itertools.product(range(len(patterns) * 2), repeat=n_rows):
                rows = [(patterns[c // 2], bool(c % 2)) for c in combo]
                if len({label for _, label in rows}) < 2:
                    continue
                self._assert_matches(rows, 2)
                cases += 1
        assert cases > 100

    def test_random_cases_up_to_four_features(self):
        rng = random.Random(2024)
        for _ in range(150):
            n_features = rng.randint(1, 4)
            n_rows = rng.randint(2, 12)
            rows = [
                (
                    frozenset(f for f in range(n_features) if rng.random() < 0.5),
                    rng.random() < 0.5,
                )
                for _ in range(n_rows)
            ]
            self._assert_matches(rows, n_features)


class TestSerialization:
    def _trained(self):
        return train_forest(SEPARABLE, ForestParams(n_trees=4), 9, vocab_of_size(1))

    def test_round_trip(self, tmp_path):
        model = self._trained()
        assert deserialize_model(serialize_model(model)) == model
        path = tmp_path / "model.json"
        save_model(model, path)
        assert load_model(path) == model

    def test_canonical_bytes(self):
        model = self._trained()
        assert serialize_model(model) == serialize_model(
            deserialize_model(serialize_model(model))
        )

    def test_truncated_is_parse_error(self):
        blob = serialize_model(self._trained())
        with pytest.raises(ParseError):
            deserialize_model(blob[:-10])

    def test_wrong_magic_is_parse_error(self):
        with pytest.raises(ParseError, match="header"):
            deserialize_model(b'{"magic":"nope","version":1}')

    def test_unknown_version_names_expected_and_found(self):
        blob = serialize_model(self._trained()).replace(b'"version":1', b'"version":7')
        with pytest.raises(VersionError) as excinfo:
            deserialize_model(blob)
        assert excinfo.value.expected == 1
        assert excinfo.value.found == 7

    def test_tree_count_mismatch_rejected(self):
        blob = serialize_model(self._trained()).replace(b'"n_trees":4', b'"n_trees":5')
        with pytest.raises(ParseError, match="declares 5 trees"):
            deserialize_model(blob)

    def test_out_of_vocabulary_feature_rejected(self):
        model = self._trained()
        blob = serialize_model(model).replace(b'"f":0', b'"f":9')
        with pytest.raises(ParseError, match="outside vocabulary"):
            deserialize_model(blob)
