"""Attribute-inference attack laboratory for graph neural models.

Train a 2-layer graph convolutional target, expose it behind a posterior-only
black-box handle, and measure how well imputation- and query-based attacks
recover hidden node attributes.
"""

from .attacks import (ATTACKS, AttackBudgetError, AttackConfig, AttackOutcome,
                      AttackTask, UnsupportedConfigError, attack_iterative,
                      attack_shadow, attack_single_pass, confidence_scores,
                      infer_multi, read_trace, write_trace)
from .data import (Dataset, LoadError, PartialFeatureMatrix, Split,
                   load_dataset, make_split, mask_sensitive, save_dataset)
from .experiment import (ExperimentConfig, ExperimentRecord, emit_table,
                         parse_table, run_experiment, run_sweep)
from .graph import (PropagationOperator, SparseGraph, build_knn_graph,
                    degree_matrix, gcn_operator, propagation_operator)
from .imputation import (FeaturePropagationImputer, ImputerConfig,
                         RandomImputer, feature_propagate, random_impute)
from .metrics import hamming_percentage, masked_mse
from .models import (BlackBoxHandle, GcnClassifier, MlpClassifier, QueryError,
                     TrainingError, softmax, train_gcn, train_mlp)
from .synthetic import SyntheticSpec, generate_synthetic
from .validation import DataError, ParameterError

__version__ = "0.1.0"

__all__ = [
    "ATTACKS", "AttackBudgetError", "AttackConfig", "AttackOutcome",
    "AttackTask", "BlackBoxHandle", "DataError", "Dataset", "ExperimentConfig",
    "ExperimentRecord", "FeaturePropagationImputer", "GcnClassifier",
    "ImputerConfig", "LoadError", "MlpClassifier", "ParameterError",
    "PartialFeatureMatrix", "PropagationOperator", "QueryError",
    "RandomImputer", "SparseGraph", "Split", "SyntheticSpec", "TrainingError",
    "UnsupportedConfigError", "attack_iterative", "attack_shadow",
    "attack_single_pass", "build_knn_graph", "confidence_scores",
    "degree_matrix", "emit_table", "feature_propagate", "gcn_operator",
    "generate_synthetic", "hamming_percentage", "infer_multi", "load_dataset",
    "make_split", "mask_sensitive", "masked_mse", "parse_table",
    "propagation_operator", "random_impute", "read_trace", "run_experiment",
    "run_sweep", "save_dataset", "softmax", "train_gcn", "train_mlp",
    "write_trace",
]
