"""Personalized decision rules from tree ensembles.

Extracts short IF-THEN(-ELSE) rules from a depth-limited random forest,
selects a sparse subset with L1-regularized logistic regression, learns one
classifier per rule that predicts whether the rule will be correct for a
sample, and combines rule outputs with a correctness-weighted average into a
positive-class probability.
"""

from .data import (
    CATEGORICAL,
    NUMERIC,
    Dataset,
    DatasetSchema,
    FeatureColumn,
    SplitPlan,
    dataset_from_arrays,
    impute_mode,
    load_csv,
    load_schema,
    make_split_plan,
)
from .errors import DataError, RulecastError, TrainingError
from .forest import Forest, ForestConfig, Leaf, Split, fit_forest, fit_tree, predict_proba
from .lasso import (
    LogisticModel,
    SelectedRuleSet,
    cv_select_lambda,
    default_lambda_grid,
    fit_lasso_logistic,
    lambda_max,
    select_top_rules,
)
from .correctness import (
    CorrectnessLabels,
    CorrectnessModelSet,
    build_correctness_labels,
    fit_correctness_models,
    predict_correctness,
)
from .predictor import (
    PredictionTrace,
    WeightScheme,
    predict_sample,
    simple_mean_probability,
    weighted_probability,
)
from .evaluate import (
    EvaluationReport,
    PipelineConfig,
    PipelineModel,
    compute_auc,
    count_rules,
    run_experiment,
    train_pipeline,
)
from .rules import (
    Condition,
    ConditionMatrix,
    Rule,
    build_condition_matrix,
    condition_verified,
    dedup_rules,
    extract_rules,
    render_rule,
    rule_output,
)
from .persist import load_model, save_model

__version__ = "0.1.0"
