"""Trapdoor distributions: exact TV geometry, learners and private-learning experiments."""

from trapdoor.distributions import (
    Dataset,
    Hard,
    Key,
    TrapdoorParams,
    empirical_tv,
    pmf,
    sample,
    tv_decomposed,
    tv_exact_bruteforce,
    tv_product_bruteforce,
)
from trapdoor.learners import (
    LearnReport,
    PrivacyBudget,
    learn_dp_hard,
    learn_dp_key,
    learn_nonprivate,
    reduce_then_estimate,
    required_samples_nonprivate,
)
from trapdoor.reductions import (
    HypothesisNet,
    ProductDataset,
    extract_parameters,
    lift_product_samples,
    project_to_class,
)

__all__ = [
    "Dataset",
    "Hard",
    "HypothesisNet",
    "Key",
    "LearnReport",
    "PrivacyBudget",
    "ProductDataset",
    "TrapdoorParams",
    "empirical_tv",
    "extract_parameters",
    "learn_dp_hard",
    "learn_dp_key",
    "learn_nonprivate",
    "lift_product_samples",
    "pmf",
    "project_to_class",
    "reduce_then_estimate",
    "required_samples_nonprivate",
    "sample",
    "tv_decomposed",
    "tv_exact_bruteforce",
    "tv_product_bruteforce",
]
