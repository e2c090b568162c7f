"""Versioned model-file serialization.

Models persist as JSON with sorted keys.  Floats are rendered by Python's
shortest-round-trip repr (at most 17 significant digits), so loading restores
bit-identical values and predictions.  Files are written to a temp path and
atomically renamed; a failed save never leaves a partial file.
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np

from .correctness import CorrectnessModelSet, RuleCorrectnessModel
from .errors import DataError
from .evaluate import PipelineModel
from .forest import Forest, Leaf, Split, TreeNode
from .lasso import LogisticModel, SelectedRuleSet
from .predictor import WeightScheme
from .rules import Condition, Rule

FORMAT = "rulecast-model"
VERSION = 1


def schema_fingerprint(feature_names, feature_kinds, feature_categories,
                       positive_name, negative_name) -> str:
    payload = json.dumps(
        {
            "names": list(feature_names),
            "kinds": list(feature_kinds),
            "categories": [list(c) for c in feature_categories],
            "classes": [negative_name, positive_name],
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def tree_to_dict(node: TreeNode) -> dict:
    """Nested node records: split feature/threshold or leaf class counts."""
    if isinstance(node, Leaf):
        return {"class": node.predicted_class, "counts": list(node.class_counts)}
    return {
        "feature": node.feature,
        "kind": node.kind,
        "value": node.value,
        "left": tree_to_dict(node.left),
        "right": tree_to_dict(node.right),
    }


def tree_from_dict(doc: dict) -> TreeNode:
    if "class" in doc:
        return Leaf(predicted_class=int(doc["class"]),
                    class_counts=(int(doc["counts"][0]), int(doc["counts"][1])))
    return Split(
        feature=int(doc["feature"]),
        kind=doc["kind"],
        value=float(doc["value"]),
        left=tree_from_dict(doc["left"]),
        right=tree_from_dict(doc["right"]),
    )


def forest_to_dict(forest: Forest) -> dict:
    return {
        "trees": [tree_to_dict(t) for t in forest.trees],
        "n_features": forest.n_features,
        "max_depth": forest.max_depth,
        "feature_subset_size": forest.feature_subset_size,
        "min_leaf": forest.min_leaf,
        "bootstrap": forest.bootstrap,
        "seed": forest.seed,
    }


def forest_from_dict(doc: dict) -> Forest:
    return Forest(
        trees=tuple(tree_from_dict(t) for t in doc["trees"]),
        n_features=int(doc["n_features"]),
        max_depth=int(doc["max_depth"]),
        feature_subset_size=int(doc["feature_subset_size"]),
        min_leaf=int(doc["min_leaf"]),
        bootstrap=bool(doc["bootstrap"]),
        seed=int(doc["seed"]),
    )


def _rule_to_dict(rule: Rule) -> dict:
    return {
        "conditions": [[c.feature, c.op, c.value] for c in rule.conditions],
        "then_class": rule.then_class,
        "provenance": list(rule.provenance),
    }


def _rule_from_dict(d: dict) -> Rule:
    return Rule(
        conditions=tuple(Condition(int(f), op, float(v)) for f, op, v in d["conditions"]),
        then_class=int(d["then_class"]),
        provenance=tuple(d["provenance"]),
    )


def _logistic_to_dict(m: LogisticModel) -> dict:
    return {
        "intercept": m.intercept,
        "coefficients": list(map(float, m.coefficients)),
        "lambda": m.lam,
    }


def _logistic_from_dict(d: dict) -> LogisticModel:
    return LogisticModel(
        intercept=float(d["intercept"]),
        coefficients=np.array(d["coefficients"], dtype=np.float64),
        lam=float(d["lambda"]),
    )


def model_to_dict(model: PipelineModel) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "schema_fingerprint": schema_fingerprint(
            model.feature_names,
            model.feature_kinds,
            model.feature_categories,
            model.positive_name,
            model.negative_name,
        ),
        "features": {
            "names": list(model.feature_names),
            "kinds": list(model.feature_kinds),
            "categories": [list(c) for c in model.feature_categories],
        },
        "classes": {"positive": model.positive_name, "negative": model.negative_name},
        "selected_rules": {
            "rules": [_rule_to_dict(r) for r in model.selected.rules],
            "coefficients": list(map(float, model.selected.coefficients)),
            "feature_union": list(model.selected.feature_union),
            "padded": model.selected.padded,
        },
        "correctness": {
            "threshold": model.correctness.threshold,
            "feature_union": list(model.correctness.feature_union),
            "models": [
                {"constant": rcm.constant}
                if rcm.constant is not None
                else _logistic_to_dict(rcm.model)
                for rcm in model.correctness.models
            ],
        },
        "weights": {
            "correct": model.weights.weight_correct,
            "incorrect": model.weights.weight_incorrect,
        },
        "train_correctness_rate": list(map(float, model.train_correctness_rate)),
        "selection_lambda": model.selection_lambda,
        "provenance": {k: list(v) if isinstance(v, tuple) else v
                       for k, v in model.provenance.items()},
    }


def model_from_dict(doc: dict) -> PipelineModel:
    if doc.get("format") != FORMAT:
        raise DataError(f"not a {FORMAT} file")
    if doc.get("version") != VERSION:
        raise DataError(f"unsupported model version {doc.get('version')!r}, expected {VERSION}")
    sel = doc["selected_rules"]
    selected = SelectedRuleSet(
        rules=tuple(_rule_from_dict(r) for r in sel["rules"]),
        coefficients=np.array(sel["coefficients"], dtype=np.float64),
        feature_union=tuple(int(f) for f in sel["feature_union"]),
        padded=bool(sel["padded"]),
    )
    corr = doc["correctness"]
    models = tuple(
        RuleCorrectnessModel(constant=int(m["constant"]))
        if "constant" in m
        else RuleCorrectnessModel(model=_logistic_from_dict(m))
        for m in corr["models"]
    )
    correctness = CorrectnessModelSet(
        models=models,
        feature_union=tuple(int(f) for f in corr["feature_union"]),
        threshold=float(corr["threshold"]),
    )
    feats = doc["features"]
    return PipelineModel(
        selected=selected,
        correctness=correctness,
        weights=WeightScheme(
            weight_correct=float(doc["weights"]["correct"]),
            weight_incorrect=float(doc["weights"]["incorrect"]),
        ),
        feature_names=tuple(feats["names"]),
        feature_kinds=tuple(feats["kinds"]),
        feature_categories=tuple(tuple(c) for c in feats["categories"]),
        positive_name=doc["classes"]["positive"],
        negative_name=doc["classes"]["negative"],
        train_correctness_rate=np.array(doc["train_correctness_rate"], dtype=np.float64),
        selection_lambda=float(doc["selection_lambda"]),
        provenance=dict(doc.get("provenance", {})),
    )


def save_model(model: PipelineModel, path) -> None:
    doc = model_to_dict(model)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True, indent=2)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_model(path) -> PipelineModel:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed model file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise DataError(f"malformed model file {path}")
    return model_from_dict(doc)
