"""Contrast-specific propensity scores for multi-treatment studies.

The package covers the full design-stage workflow: contrast algebra and
bifurcations, score estimation (exact cells or logistic maximum likelihood),
chained balancing with subclassification, covariate balance diagnostics, and
a reproducible Monte Carlo harness.
"""

from .balancing import (
    AlgorithmConfig,
    BalanceReport,
    ContrastBalance,
    SubclassAssignment,
    SubclassBalanceRow,
    chained_propensity,
    covariate_mean_difference,
    run_algorithm,
    subclassify,
)
from .contrasts import (
    Bifurcation,
    Contrast,
    assignment_indicator,
    assignment_indicators,
    bifurcation_span_contains,
    bounded_bifurcate,
    is_orthogonal,
    linear_combination,
    parse_contrast,
    read_contrast_file,
    sgn_bifurcate,
    validate_contrast,
)
from .data import CellIndex, Dataset, build_cell_index, load_dataset, write_dataset_csv
from .estimation import (
    BinaryLogisticModel,
    MultinomialLogisticModel,
    ScoreVector,
    csps_from_treatment_probs,
    empirical_csps,
    fit_binary_logistic,
    fit_multinomial_logistic,
    model_csps,
    predict_binary,
    predict_multinomial,
)
from .simulation import (
    ExperimentResult,
    SimulationConfig,
    default_balancing,
    mechanism_i,
    mechanism_ii,
    oracle_group_means,
    run_experiment,
    sample_dataset,
    simulation_contrasts,
)
from . import errors

__version__ = "0.1.0"

__all__ = [
    "AlgorithmConfig",
    "BalanceReport",
    "Bifurcation",
    "BinaryLogisticModel",
    "CellIndex",
    "Contrast",
    "ContrastBalance",
    "Dataset",
    "ExperimentResult",
    "MultinomialLogisticModel",
    "ScoreVector",
    "SimulationConfig",
    "SubclassAssignment",
    "SubclassBalanceRow",
    "assignment_indicator",
    "assignment_indicators",
    "bifurcation_span_contains",
    "bounded_bifurcate",
    "build_cell_index",
    "chained_propensity",
    "covariate_mean_difference",
    "csps_from_treatment_probs",
    "default_balancing",
    "empirical_csps",
    "errors",
    "fit_binary_logistic",
    "fit_multinomial_logistic",
    "is_orthogonal",
    "linear_combination",
    "load_dataset",
    "mechanism_i",
    "mechanism_ii",
    "model_csps",
    "oracle_group_means",
    "parse_contrast",
    "predict_binary",
    "predict_multinomial",
    "read_contrast_file",
    "run_algorithm",
    "run_experiment",
    "sample_dataset",
    "sgn_bifurcate",
    "simulation_contrasts",
    "subclassify",
    "validate_contrast",
    "write_dataset_csv",
]
