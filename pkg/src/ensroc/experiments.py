"""Train-evaluate helpers for meta-parameter comparisons."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .bands import build_bands, normal_quantile, write_bands_csv
from .binomial import threshold_profile
from .forest import ForestConfig, ForestModel, predict_votes, train_forest
from .roc import CurveComparison, Mode, RocEstimate, auc, compare_curves, estimate_roc
from .votes import LabeledDataset, VoteMatrix


@dataclass(frozen=True)
class ForestRun:
    model: ForestModel
    votes: VoteMatrix
    estimate: RocEstimate

    @property
    def auc(self) -> float:
        return auc(self.estimate)


def evaluate_votes(votes: VoteMatrix, m_eval: int | None = None) -> RocEstimate:
    return estimate_roc(threshold_profile(votes, m_eval), votes.labels)


def run_forest(
    train: LabeledDataset, test: LabeledDataset, config: ForestConfig, m_eval: int | None = None
) -> ForestRun:
    model = train_forest(train, config)
    votes = predict_votes(model, test)
    return ForestRun(model, votes, evaluate_votes(votes, m_eval))


OVERLAY_COLUMNS = (
    "fpr",
    "log10_fpr",
    "tpr_a",
    "tpr_lo_a",
    "tpr_hi_a",
    "tpr_b",
    "tpr_lo_b",
    "tpr_hi_b",
    "delta_tpr",
    "se_delta",
)


def overlay_rows(cmp: CurveComparison, confidence: float = 0.95, floor: float = 1e-6):
    """Rows of the comparison overlay: both curves with TPR bands on the shared grid."""
    z = normal_quantile(confidence)
    sa, sb = np.sqrt(cmp.var_tpr_a), np.sqrt(cmp.var_tpr_b)
    cols = [
        cmp.fpr,
        np.log10(np.maximum(cmp.fpr, floor)),
        cmp.tpr_a,
        np.clip(cmp.tpr_a - z * sa, 0.0, 1.0),
        np.clip(cmp.tpr_a + z * sa, 0.0, 1.0),
        cmp.tpr_b,
        np.clip(cmp.tpr_b - z * sb, 0.0, 1.0),
        np.clip(cmp.tpr_b + z * sb, 0.0, 1.0),
        cmp.delta_tpr,
        cmp.se_delta,
    ]
    return zip(*(c.tolist() for c in cols))


def write_overlay_csv(cmp: CurveComparison, path, confidence: float = 0.95, floor: float = 1e-6) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(OVERLAY_COLUMNS)
        for row in overlay_rows(cmp, confidence, floor):
            w.writerow(map(repr, row))
    os.replace(tmp, path)


def compare_forests(
    train: LabeledDataset,
    test: LabeledDataset,
    config_a: ForestConfig,
    config_b: ForestConfig,
    out_dir=None,
    mode: Mode = "classifier",
    confidence: float = 0.95,
    train_b: LabeledDataset | None = None,
) -> tuple[ForestRun, ForestRun, CurveComparison]:
    """Train two forests on the same test set and difference their mean curves.

    With ``out_dir`` set, writes ``a.bands.csv``, ``b.bands.csv`` and
    ``overlay.csv`` there.
    """
    run_a = run_forest(train, test, config_a)
    run_b = run_forest(train if train_b is None else train_b, test, config_b)
    cmp = compare_curves(run_a.estimate, run_b.estimate, mode)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        floor = 1.0 / (10.0 * run_a.estimate.class_counts.n_neg)
        for tag, run in (("a", run_a), ("b", run_b)):
            write_bands_csv(build_bands(run.estimate, confidence, mode), os.path.join(out_dir, f"{tag}.bands.csv"))
        write_overlay_csv(cmp, os.path.join(out_dir, "overlay.csv"), confidence, floor)
    return run_a, run_b, cmp
