"""Mean ROC curves and their variances under ensemble and test-set resampling.

For each threshold ``t`` every test point contributes ``q_j(t)``, the
probability that a freshly drawn ensemble clears ``t`` on it.  Summed over a
class and divided by the class size this gives the mean FPR or TPR.

Two variances are reported per threshold:

* classifier-only: redrawing the ensemble, each point is a Bernoulli(q_j)
  indicator with variance ``q_j (1 - q_j)``;
* full: additionally the point enters with a Poisson(1) multiplicity ``c_j``,
  giving ``Var(c_j b_j) = q_j + q_j (1 - q_j)``.

Points are treated as independent, and the denominators stay at the original
class counts even though Poisson resampling changes them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .binomial import ThresholdProfile
from .votes import ClassCounts

Mode = Literal["classifier", "full"]
MODES = ("classifier", "full")


@dataclass(frozen=True)
class VarianceTerm:
    q: float
    classifier_only: float
    with_poisson: float


def variance_term(q: float) -> VarianceTerm:
    """Per-point variance contributions for a clearing probability ``q``."""
    q = float(q)
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    v = q * (1.0 - q)
    return VarianceTerm(q, v, q + v)


@dataclass(frozen=True)
class RocEstimate:
    thresholds: np.ndarray
    mean_fpr: np.ndarray
    mean_tpr: np.ndarray
    var_fpr_classifier: np.ndarray
    var_tpr_classifier: np.ndarray
    var_fpr_full: np.ndarray
    var_tpr_full: np.ndarray
    class_counts: ClassCounts
    m_eval: int

    def var_fpr(self, mode: Mode = "full") -> np.ndarray:
        return _pick(mode, self.var_fpr_classifier, self.var_fpr_full)

    def var_tpr(self, mode: Mode = "full") -> np.ndarray:
        return _pick(mode, self.var_tpr_classifier, self.var_tpr_full)

    def __len__(self) -> int:
        return self.thresholds.shape[0]


def _pick(mode, classifier, full):
    if mode == "classifier":
        return classifier
    if mode == "full":
        return full
    raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def _class_sums(rows: np.ndarray, weights: np.ndarray, n: int):
    # weights are per-distinct-row multiplicities within one class
    w = weights[:, None].astype(np.float64)
    s_q = (w * rows).sum(axis=0)
    s_v = (w * (rows * (1.0 - rows))).sum(axis=0)
    s_full = (w * (rows + rows * (1.0 - rows))).sum(axis=0)
    nn = float(n) * n
    return s_q / n, s_v / nn, s_full / nn


def estimate_roc(profile: ThresholdProfile, labels) -> RocEstimate:
    labels = np.asarray(labels)
    if labels.shape != (profile.n,):
        raise ValueError(f"profile has {profile.n} rows but {labels.shape[0]} labels were given")
    counts = ClassCounts.from_labels(labels)
    n_rows = profile.rows.shape[0]
    w_pos = np.bincount(profile.index[labels == 1], minlength=n_rows)
    w_neg = np.bincount(profile.index[labels == 0], minlength=n_rows)
    fpr, vf_c, vf_f = _class_sums(profile.rows, w_neg, counts.n_neg)
    tpr, vt_c, vt_f = _class_sums(profile.rows, w_pos, counts.n_pos)
    arrays = [profile.thresholds, fpr, tpr, vf_c, vt_c, vf_f, vt_f]
    for a in arrays:
        a.setflags(write=False)
    return RocEstimate(*arrays, class_counts=counts, m_eval=profile.m_eval)


def auc(estimate: RocEstimate) -> float:
    """Trapezoidal area under the mean curve, swept from the highest threshold down."""
    x = estimate.mean_fpr[::-1]
    y = estimate.mean_tpr[::-1]
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1])) / 2.0)


def _upper_envelope(estimate: RocEstimate, mode: Mode):
    """Curve points in increasing FPR; tied FPR values keep the largest TPR."""
    x = estimate.mean_fpr[::-1]
    y = estimate.mean_tpr[::-1]
    v = estimate.var_tpr(mode)[::-1]
    keep = np.ones(x.shape[0], dtype=bool)
    keep[:-1] = x[1:] != x[:-1]
    return x[keep], y[keep], v[keep]


@dataclass(frozen=True)
class CurveComparison:
    """TPR of curve ``b`` minus curve ``a`` on a shared FPR grid."""

    fpr: np.ndarray
    tpr_a: np.ndarray
    tpr_b: np.ndarray
    var_tpr_a: np.ndarray
    var_tpr_b: np.ndarray
    delta_tpr: np.ndarray
    se_delta: np.ndarray
    auc_a: float
    auc_b: float
    mode: str

    @property
    def delta_auc(self) -> float:
        return self.auc_b - self.auc_a


def compare_curves(a: RocEstimate, b: RocEstimate, mode: Mode = "full") -> CurveComparison:
    """Align two mean curves on the union of their FPR points and difference them.

    Interpolation is linear in raw FPR.  The standard error of each TPR delta
    is ``sqrt(var_a + var_b)``, treating the two curves as independent.
    """
    if a.class_counts != b.class_counts:
        raise ValueError(
            f"curves were evaluated on different label sets: {a.class_counts} vs {b.class_counts}"
        )
    xa, ya, va = _upper_envelope(a, mode)
    xb, yb, vb = _upper_envelope(b, mode)
    lo, hi = max(xa[0], xb[0]), min(xa[-1], xb[-1])
    if lo > hi:
        raise ValueError(f"FPR ranges do not overlap ([{xa[0]}, {xa[-1]}] vs [{xb[0]}, {xb[-1]}])")
    grid = np.union1d(xa, xb)
    grid = grid[(grid >= lo) & (grid <= hi)]
    ta, tb = np.interp(grid, xa, ya), np.interp(grid, xb, yb)
    sa, sb = np.interp(grid, xa, va), np.interp(grid, xb, vb)
    return CurveComparison(
        fpr=grid,
        tpr_a=ta,
        tpr_b=tb,
        var_tpr_a=sa,
        var_tpr_b=sb,
        delta_tpr=tb - ta,
        se_delta=np.sqrt(sa + sb),
        auc_a=auc(a),
        auc_b=auc(b),
        mode=mode,
    )
