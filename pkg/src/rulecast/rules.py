"""IF-THEN(-ELSE) decision rules extracted from tree paths.

A rule is an ordered conjunction of feature conditions plus a THEN class; the
ELSE class is always the opposite.  A rule *fires* for a sample when every
condition holds; its *output* is the THEN class when it fires and the ELSE
class otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import CATEGORICAL, Dataset
from .errors import DataError
from .forest import Forest, Leaf, TreeNode

OP_LE = "<="
OP_GT = ">"
OP_EQ = "="
OP_NE = "!="
_OP_RANK = {OP_LE: 0, OP_GT: 1, OP_EQ: 2, OP_NE: 3}
NUMERIC_OPS = (OP_LE, OP_GT)
CATEGORICAL_OPS = (OP_EQ, OP_NE)


@dataclass(frozen=True)
class Condition:
    feature: int
    op: str
    value: float

    def __post_init__(self) -> None:
        if self.op not in _OP_RANK:
            raise ValueError(f"unknown operator {self.op!r}")

    def holds(self, x: np.ndarray) -> np.ndarray:
        col = x[..., self.feature]
        if self.op == OP_LE:
            return col <= self.value
        if self.op == OP_GT:
            return col > self.value
        if self.op == OP_EQ:
            return col == self.value
        return col != self.value


@dataclass(frozen=True)
class Rule:
    conditions: tuple[Condition, ...]
    then_class: int
    provenance: tuple[int, int] = (0, 0)  # (tree index, leaf index)

    @property
    def else_class(self) -> int:
        return 1 - self.then_class

    @property
    def features(self) -> tuple[int, ...]:
        return tuple(sorted({c.feature for c in self.conditions}))

    def canonical_key(self):
        conds = tuple(sorted((c.feature, _OP_RANK[c.op], c.value) for c in self.conditions))
        return conds, self.then_class


def extract_rules(
    tree: TreeNode,
    tree_index: int = 0,
    n_categories: "tuple[int, ...] | None" = None,
) -> list[Rule]:
    """One rule per leaf: the branch tests along the root-to-leaf path.

    Right branches negate the stored test (`<=` becomes `>`, `==` becomes
    `!=`).  When `n_categories` is given, a negated test on a two-category
    feature is rewritten as equality with the other category, which matches
    how such rules are usually written out.
    """
    rules: list[Rule] = []

    def walk(node: TreeNode, conds: tuple[Condition, ...]) -> None:
        if isinstance(node, Leaf):
            rules.append(Rule(conditions=conds, then_class=node.predicted_class,
                              provenance=(tree_index, len(rules))))
            return
        if node.kind == CATEGORICAL:
            left_c = Condition(node.feature, OP_EQ, node.value)
            if n_categories is not None and n_categories[node.feature] == 2:
                right_c = Condition(node.feature, OP_EQ, 1.0 - node.value)
            else:
                right_c = Condition(node.feature, OP_NE, node.value)
        else:
            left_c = Condition(node.feature, OP_LE, node.value)
            right_c = Condition(node.feature, OP_GT, node.value)
        walk(node.left, conds + (left_c,))
        walk(node.right, conds + (right_c,))

    walk(tree, ())
    return rules


def extract_forest_rules(
    forest: Forest, n_categories: "tuple[int, ...] | None" = None
) -> list[Rule]:
    rules: list[Rule] = []
    for t, tree in enumerate(forest.trees):
        rules.extend(extract_rules(tree, tree_index=t, n_categories=n_categories))
    return rules


def dedup_rules(rules) -> list[Rule]:
    """Drop rules whose canonical form (sorted conditions + THEN class) repeats.

    First occurrence wins; relative order is preserved.
    """
    seen = set()
    out = []
    for rule in rules:
        key = rule.canonical_key()
        if key not in seen:
            seen.add(key)
            out.append(rule)
    return out


def _check_features(rule: Rule, width: int) -> None:
    for c in rule.conditions:
        if c.feature >= width:
            raise DataError(f"rule references feature {c.feature}, sample has {width}")


def condition_verified(rule: Rule, sample: np.ndarray) -> int:
    """1 iff every condition of the rule holds for the sample."""
    x = np.asarray(sample, dtype=np.float64)
    _check_features(rule, x.shape[-1])
    return int(all(bool(c.holds(x)) for c in rule.conditions))


def rule_fires(rule: Rule, X: np.ndarray) -> np.ndarray:
    """Vector of condition_verified over the rows of X."""
    X = np.asarray(X, dtype=np.float64)
    _check_features(rule, X.shape[1])
    mask = np.ones(X.shape[0], dtype=bool)
    for c in rule.conditions:
        mask &= c.holds(X)
    return mask.astype(np.uint8)


def rule_output(rule: Rule, sample: np.ndarray) -> int:
    """THEN class if the rule fires, ELSE class otherwise."""
    return rule.then_class if condition_verified(rule, sample) else rule.else_class


def rule_outputs_matrix(rules, X: np.ndarray) -> np.ndarray:
    """(N, M) matrix of rule outputs."""
    X = np.asarray(X, dtype=np.float64)
    out = np.empty((X.shape[0], len(rules)), dtype=np.uint8)
    for m, rule in enumerate(rules):
        fired = rule_fires(rule, X)
        out[:, m] = np.where(fired, rule.then_class, rule.else_class)
    return out


@dataclass(frozen=True)
class ConditionMatrix:
    """Binary N x P matrix: entry (n, p) says rule p fires for sample n."""

    entries: np.ndarray
    rules: tuple[Rule, ...]


def build_condition_matrix(rules, dataset: Dataset) -> ConditionMatrix:
    X = dataset.matrix()
    for rule in rules:
        _check_features(rule, dataset.n_features)
    entries = np.empty((dataset.n_samples, len(rules)), dtype=np.uint8)
    for p, rule in enumerate(rules):
        entries[:, p] = rule_fires(rule, X)
    return ConditionMatrix(entries=entries, rules=tuple(rules))


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def _fmt_value(v: float) -> str:
    if v == int(v):
        return f"{v:.1f}"
    return f"{v:g}"


def render_condition(cond: Condition, feature_names, categories) -> str:
    name = feature_names[cond.feature]
    cats = categories[cond.feature] if categories else ()
    if cond.op in CATEGORICAL_OPS and cats:
        label = cats[int(cond.value)]
        return f"{name} {cond.op} {label}"
    return f"{name} {cond.op} {_fmt_value(cond.value)}"


def render_rule(rule: Rule, feature_names, categories, positive_name="positive",
                negative_name="negative") -> str:
    """`IF <cond> AND ..., THEN <class> (ELSE <class>)`; empty IF-parts render as TRUE."""
    if rule.conditions:
        body = " AND ".join(render_condition(c, feature_names, categories) for c in rule.conditions)
    else:
        body = "TRUE"
    then_name = positive_name if rule.then_class == 1 else negative_name
    else_name = negative_name if rule.then_class == 1 else positive_name
    return f"IF {body}, THEN {then_name} (ELSE {else_name})"
