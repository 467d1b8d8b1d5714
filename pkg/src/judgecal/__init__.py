"""Calibrated aggregation of repeated three-way judge votes."""

from .baselines import ConfidentVote, SoftReducer, ci_sc, majority_vote, rounded_median, soft_sc
from .calibrate import Box, CalibrationItem, FitConfig, FitResult, fit_drps, grid_oracle
from .core import (DavidsonParams, FeaturePair, Smoothing, TernaryDistribution, VoteCounts,
                   bayes_action, compute_features, davidson_probs, drps, mae_risks)
from .data_io import ItemLabel, VoteRecord, canonicalize, read_labels, read_votes, tally, write_predictions
from .metaeval import (SignificanceConfig, SplitConfig, leave_one_out, mae, paired_permutation_test,
                       pairwise_accuracy, run_splits, top_cluster)
from .synthetic import GeneratorConfig, generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "ConfidentVote", "SoftReducer", "ci_sc", "majority_vote", "rounded_median", "soft_sc",
    "Box", "CalibrationItem", "FitConfig", "FitResult", "fit_drps", "grid_oracle",
    "DavidsonParams", "FeaturePair", "Smoothing", "TernaryDistribution", "VoteCounts",
    "bayes_action", "compute_features", "davidson_probs", "drps", "mae_risks", "ItemLabel",
    "VoteRecord", "canonicalize", "read_labels", "read_votes", "tally", "write_predictions",
    "SignificanceConfig", "SplitConfig", "leave_one_out", "mae", "paired_permutation_test",
    "pairwise_accuracy", "run_splits", "top_cluster", "GeneratorConfig", "generate_synthetic",
    "__version__",
]
