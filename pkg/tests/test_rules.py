import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import rulecast as rc
from rulecast.data import CATEGORICAL, NUMERIC
from rulecast.errors import DataError
from rulecast.forest import ForestConfig, Leaf, Split, count_leaves, fit_forest
from rulecast.rules import (
    Condition,
    Rule,
    build_condition_matrix,
    condition_verified,
    dedup_rules,
    extract_forest_rules,
    extract_rules,
    render_rule,
    rule_fires,
    rule_output,
    rule_outputs_matrix,
)


def paper_example_tree():
    """Root tests x1 <= 0.5; its left child tests x2 (categories false/true).

    Classes: y1 encoded as 1, y2 as 0.  Category codes: false = 0, true = 1.
    """
    return Split(
        feature=0, kind=NUMERIC, value=0.5,
        left=Split(
            feature=1, kind=CATEGORICAL, value=0.0,
            left=Leaf(0, (5, 0)),
            right=Leaf(1, (0, 5)),
        ),
        right=Leaf(1, (0, 5)),
    )


def paper_rules():
    """The worked example's three rules, indexed in its enumeration order."""
    rules = extract_rules(paper_example_tree(), n_categories=(0, 2))
    assert len(rules) == 3
    by_key = {r.canonical_key(): r for r in rules}
    r1 = by_key[(((0, 1, 0.5),), 1)]                      # x1 > 0.5 -> y1
    r2 = by_key[(((0, 0, 0.5), (1, 2, 0.0)), 0)]          # x1 <= 0.5 & x2 = false -> y2
    r3 = by_key[(((0, 0, 0.5), (1, 2, 1.0)), 1)]          # x1 <= 0.5 & x2 = true -> y1
    return [r1, r2, r3]


class TestExtractRules:
    def test_paper_tree_yields_its_three_rules(self):
        rules = paper_rules()
        names = ("x1", "x2")
        cats = ((), ("false", "true"))
        texts = [render_rule(r, names, cats, "y1", "y2") for r in rules]
        assert texts == [
            "IF x1 > 0.5, THEN y1 (ELSE y2)",
            "IF x1 <= 0.5 AND x2 = false, THEN y2 (ELSE y1)",
            "IF x1 <= 0.5 AND x2 = true, THEN y1 (ELSE y2)",
        ]

    def test_single_leaf_gives_empty_condition_rule(self):
        rules = extract_rules(Leaf(1, (0, 3)))
        assert len(rules) == 1
        assert rules[0].conditions == ()
        assert rules[0].then_class == 1

    def test_complete_depth3_tree_gives_8_rules_of_3_conditions(self):
        def full(depth, feature=0):
            if depth == 3:
                return Leaf(0, (1, 0))
            return Split(feature=depth, kind=NUMERIC, value=0.0,
                         left=full(depth + 1), right=full(depth + 1))

        rules = extract_rules(full(0))
        assert len(rules) == 8
        assert all(len(r.conditions) == 3 for r in rules)

    def test_right_branch_negates_numeric(self):
        tree = Split(feature=0, kind=NUMERIC, value=1.5,
                     left=Leaf(0, (2, 0)), right=Leaf(1, (0, 2)))
        left_rule, right_rule = extract_rules(tree)
        assert left_rule.conditions[0].op == "<="
        assert right_rule.conditions[0].op == ">"

    def test_multicategory_negation_keeps_not_equal(self):
        tree = Split(feature=0, kind=CATEGORICAL, value=1.0,
                     left=Leaf(1, (0, 2)), right=Leaf(0, (2, 0)))
        rules = extract_rules(tree, n_categories=(3,))
        assert rules[0].conditions[0].op == "="
        assert rules[1].conditions[0].op == "!="

    def test_leaf_count_equals_rule_count_on_random_trees(self, synth_clinical):
        small = synth_clinical.subset(np.arange(150))
        forest = fit_forest(small, ForestConfig(n_trees=20, max_depth=3, seed=8))
        for tree in forest.trees:
            assert len(extract_rules(tree)) == count_leaves(tree)

    def test_provenance_tracks_tree_and_leaf(self, synth_clinical):
        small = synth_clinical.subset(np.arange(120))
        forest = fit_forest(small, ForestConfig(n_trees=4, max_depth=2, seed=0))
        rules = extract_forest_rules(forest)
        trees_seen = {r.provenance[0] for r in rules}
        assert trees_seen == {0, 1, 2, 3}


class TestDedupRules:
    def cond(self, f, op, v):
        return Condition(f, op, v)

    def test_exact_duplicate_collapses(self):
        r = Rule((self.cond(0, "<=", 0.5),), 1)
        assert dedup_rules([r, Rule((self.cond(0, "<=", 0.5),), 1)]) == [r]

    def test_commuted_conjunction_collapses(self):
        a = Rule((self.cond(0, "<=", 0.5), self.cond(1, ">", 3.0)), 1)
        b = Rule((self.cond(1, ">", 3.0), self.cond(0, "<=", 0.5)), 1)
        out = dedup_rules([a, b])
        assert out == [a]

    def test_different_then_class_kept(self):
        a = Rule((self.cond(0, "<=", 0.5),), 1)
        b = Rule((self.cond(0, "<=", 0.5),), 0)
        assert dedup_rules([a, b]) == [a, b]

    def test_preserves_first_occurrence_order(self):
        a = Rule((self.cond(0, "<=", 1.0),), 1)
        b = Rule((self.cond(1, ">", 2.0),), 0)
        assert dedup_rules([a, b, a, b, a]) == [a, b]

    @given(st.lists(st.tuples(st.integers(0, 2), st.sampled_from(["<=", ">"]),
                              st.sampled_from([0.5, 1.5]), st.integers(0, 1)),
                    max_size=30))
    @settings(max_examples=200, deadline=None)
    def test_idempotent(self, raw):
        rules = [Rule((Condition(f, op, v),), c) for f, op, v, c in raw]
        once = dedup_rules(rules)
        assert dedup_rules(once) == once


class TestConditionEvaluation:
    def test_paper_condition_vector(self):
        rules = paper_rules()
        sample = np.array([0.3, 1.0])  # x1=0.3, x2=true
        assert [condition_verified(r, sample) for r in rules] == [0, 0, 1]

    def test_empty_condition_vacuously_true(self):
        rule = Rule((), 1)
        assert condition_verified(rule, np.array([123.0])) == 1

    def test_strict_boundary(self):
        rule = Rule((Condition(0, ">", 0.5),), 1)
        assert condition_verified(rule, np.array([0.5])) == 0
        rule_le = Rule((Condition(0, "<=", 0.5),), 1)
        assert condition_verified(rule_le, np.array([0.5])) == 1

    def test_missing_feature_raises(self):
        rule = Rule((Condition(3, ">", 0.5),), 1)
        with pytest.raises(DataError, match="feature"):
            condition_verified(rule, np.array([1.0, 2.0]))

    def test_rule_fires_matches_scalar(self):
        rules = paper_rules()
        X = np.array([[0.3, 1.0], [0.7, 0.0], [0.5, 0.0], [0.2, 0.0]])
        for r in rules:
            batch = rule_fires(r, X)
            assert batch.tolist() == [condition_verified(r, x) for x in X]


class TestRuleOutput:
    def test_paper_outputs(self):
        rules = paper_rules()
        sample = np.array([0.3, 1.0])
        # paper: rule 1 -> y2 (0), rule 2 -> y1 (1), rule 3 -> y1 (1)
        assert [rule_output(r, sample) for r in rules] == [0, 1, 1]

    def test_verified_condition_gives_then_class(self):
        rule = Rule((Condition(0, "<=", 1.0),), 0)
        assert rule_output(rule, np.array([0.5])) == 0
        assert rule_output(rule, np.array([2.0])) == 1

    def test_truth_table_identity(self):
        # output = then_class if fired else 1 - then_class, exhaustively
        for then_class in (0, 1):
            for fired in (0, 1):
                cond = Condition(0, "<=", 0.0)
                rule = Rule((cond,), then_class)
                x = np.array([-1.0 if fired else 1.0])
                expect = then_class ^ (1 - fired)
                assert rule_output(rule, x) == expect

    def test_outputs_matrix_agrees(self):
        rules = paper_rules()
        X = np.array([[0.3, 1.0], [0.9, 0.0]])
        mat = rule_outputs_matrix(rules, X)
        for m, r in enumerate(rules):
            for i, x in enumerate(X):
                assert mat[i, m] == rule_output(r, x)


class TestConditionMatrix:
    def test_paper_row(self):
        ds = rc.Dataset(
            name="fig",
            columns=(
                rc.FeatureColumn("x1", NUMERIC, np.array([0.3, 0.8])),
                rc.FeatureColumn("x2", CATEGORICAL, np.array([1.0, 0.0]), ("false", "true")),
            ),
            labels=np.array([1, 0]),
        )
        cm = build_condition_matrix(paper_rules(), ds)
        assert cm.entries[0].tolist() == [0, 0, 1]

    def test_empty_rule_list(self):
        ds = rc.dataset_from_arrays(np.arange(4.0), [0, 1, 0, 1])
        cm = build_condition_matrix([], ds)
        assert cm.entries.shape == (4, 0)

    def test_duplicate_samples_give_identical_rows(self):
        ds = rc.dataset_from_arrays(np.array([2.0, 2.0, 5.0]), [0, 1, 1])
        rule = Rule((Condition(0, "<=", 3.0),), 1)
        cm = build_condition_matrix([rule], ds)
        assert cm.entries[0, 0] == cm.entries[1, 0]

    def test_exactly_one_leaf_rule_fires_per_tree(self, synth_clinical):
        small = synth_clinical.subset(np.arange(100))
        forest = fit_forest(small, ForestConfig(n_trees=10, max_depth=3, seed=4))
        X = small.matrix()
        for tree in forest.trees:
            rules = extract_rules(tree)
            fired = np.column_stack([rule_fires(r, X) for r in rules])
            assert np.all(fired.sum(axis=1) == 1)


class TestRendering:
    def test_integral_threshold_renders_one_decimal(self):
        rule = Rule((Condition(0, "<=", 69.0),), 1)
        text = render_rule(rule, ("blood_pressure",), ((),), "diabetes", "no-diabetes")
        assert text == "IF blood_pressure <= 69.0, THEN diabetes (ELSE no-diabetes)"

    def test_empty_rule_renders_true(self):
        rule = Rule((), 0)
        assert render_rule(rule, (), (), "pos", "neg") == "IF TRUE, THEN neg (ELSE pos)"

    def test_categorical_uses_label(self):
        rule = Rule((Condition(0, "=", 1.0),), 1)
        text = render_rule(rule, ("thal",), (("3", "6"),), "disease", "no-disease")
        assert text == "IF thal = 6, THEN disease (ELSE no-disease)"
