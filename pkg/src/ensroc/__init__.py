"""Analytic ROC curves and confidence bands for unweighted voting ensembles."""

__version__ = "0.1.0"

from .bands import BandedCurve, build_bands, simultaneous_bands, to_log_axis, write_bands_csv
from .binomial import ThresholdProfile, binomial_survival, threshold_profile
from .forest import ForestConfig, ForestModel, load_forest, predict_votes, save_forest, train_forest
from .oracle import OracleConfig, OracleSummary, compare_to_analytic, coverage_experiment, run_oracle
from .roc import RocEstimate, auc, compare_curves, estimate_roc, variance_term
from .synth import synth_dataset
from .votes import (
    ClassCounts,
    DataFormatError,
    LabeledDataset,
    VoteMatrix,
    counts_from_full,
    load_dataset,
    load_votes,
    save_dataset,
    save_votes,
)

__all__ = [
    "BandedCurve",
    "ClassCounts",
    "DataFormatError",
    "ForestConfig",
    "ForestModel",
    "LabeledDataset",
    "OracleConfig",
    "OracleSummary",
    "RocEstimate",
    "ThresholdProfile",
    "VoteMatrix",
    "auc",
    "binomial_survival",
    "build_bands",
    "compare_curves",
    "compare_to_analytic",
    "counts_from_full",
    "coverage_experiment",
    "estimate_roc",
    "load_dataset",
    "load_forest",
    "load_votes",
    "predict_votes",
    "run_oracle",
    "save_dataset",
    "save_forest",
    "save_votes",
    "simultaneous_bands",
    "synth_dataset",
    "threshold_profile",
    "to_log_axis",
    "train_forest",
    "variance_term",
    "write_bands_csv",
]
