"""Normal-approximation confidence bands around a mean ROC curve."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .roc import Mode, RocEstimate

BAND_COLUMNS = (
    "t",
    "mean_fpr",
    "fpr_lo",
    "fpr_hi",
    "mean_tpr",
    "tpr_lo",
    "tpr_hi",
    "log10_fpr",
    "log10_fpr_lo",
    "log10_fpr_hi",
)


def normal_quantile(level: float) -> float:
    """Two-sided standard-normal critical value for a central ``level`` interval."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence level must lie in (0, 1), got {level}")
    return NormalDist().inv_cdf(0.5 + level / 2.0)


@dataclass(frozen=True)
class BandedCurve:
    t: np.ndarray
    mean_fpr: np.ndarray
    mean_tpr: np.ndarray
    fpr_lo: np.ndarray
    fpr_hi: np.ndarray
    tpr_lo: np.ndarray
    tpr_hi: np.ndarray
    confidence: float
    mode: str
    z: float
    n_neg: int
    kind: str = "pointwise"

    def __len__(self) -> int:
        return self.t.shape[0]


def _banded(estimate: RocEstimate, z: float, confidence: float, mode: Mode, kind: str):
    sd_f = np.sqrt(estimate.var_fpr(mode))
    sd_t = np.sqrt(estimate.var_tpr(mode))
    f, r = estimate.mean_fpr, estimate.mean_tpr
    return BandedCurve(
        t=estimate.thresholds,
        mean_fpr=f,
        mean_tpr=r,
        fpr_lo=np.clip(f - z * sd_f, 0.0, 1.0),
        fpr_hi=np.clip(f + z * sd_f, 0.0, 1.0),
        tpr_lo=np.clip(r - z * sd_t, 0.0, 1.0),
        tpr_hi=np.clip(r + z * sd_t, 0.0, 1.0),
        confidence=float(confidence),
        mode=mode,
        z=z,
        n_neg=estimate.class_counts.n_neg,
        kind=kind,
    )


def build_bands(estimate: RocEstimate, confidence: float = 0.95, mode: Mode = "full") -> BandedCurve:
    """Pointwise ``mean +/- z * sd`` intervals for FPR and TPR at every threshold."""
    estimate.var_fpr(mode)  # validates mode
    return _banded(estimate, normal_quantile(confidence), confidence, mode, "pointwise")


def simultaneous_bands(
    estimate: RocEstimate, confidence: float = 0.95, mode: Mode = "full"
) -> BandedCurve:
    """Bonferroni bands over the thresholds whose variance is nonzero.

    With ``T`` such thresholds each interval is built at level
    ``1 - (1 - confidence) / T``.
    """
    normal_quantile(confidence)
    live = (estimate.var_fpr(mode) > 0) | (estimate.var_tpr(mode) > 0)
    n_live = max(int(np.count_nonzero(live)), 1)
    z = normal_quantile(1.0 - (1.0 - confidence) / n_live)
    return _banded(estimate, z, confidence, mode, "bonferroni")


@dataclass(frozen=True)
class LogAxisCurve:
    """Band coordinates with FPR mapped to ``log10(max(fpr, floor))``."""

    t: np.ndarray
    log10_fpr: np.ndarray
    log10_fpr_lo: np.ndarray
    log10_fpr_hi: np.ndarray
    mean_tpr: np.ndarray
    tpr_lo: np.ndarray
    tpr_hi: np.ndarray
    floor: float

    def polylines(self) -> dict[str, tuple[np.ndarray, np.ndarray]]:
        """``(x, y)`` vertex arrays for the mean curve and the two band edges.

        The upper-left edge pairs the low FPR with the high TPR and the
        lower-right edge the reverse, so the band encloses the mean curve.
        """
        return {
            "mean": (self.log10_fpr, self.mean_tpr),
            "upper": (self.log10_fpr_lo, self.tpr_hi),
            "lower": (self.log10_fpr_hi, self.tpr_lo),
        }


def default_log_floor(n_neg: int) -> float:
    # half a decade below the smallest nonzero FPR a single negative can produce
    return 1.0 / (10.0 * n_neg)


def to_log_axis(curve: BandedCurve, floor: float | None = None) -> LogAxisCurve:
    if floor is None:
        floor = default_log_floor(curve.n_neg)
    if not floor > 0:
        raise ValueError(f"log-axis floor must be positive, got {floor}")

    def lg(a):
        return np.log10(np.maximum(a, floor))

    return LogAxisCurve(
        t=curve.t,
        log10_fpr=lg(curve.mean_fpr),
        log10_fpr_lo=lg(curve.fpr_lo),
        log10_fpr_hi=lg(curve.fpr_hi),
        mean_tpr=curve.mean_tpr,
        tpr_lo=curve.tpr_lo,
        tpr_hi=curve.tpr_hi,
        floor=float(floor),
    )


def band_rows(curve: BandedCurve, floor: float | None = None):
    logs = to_log_axis(curve, floor)
    cols = [
        curve.t,
        curve.mean_fpr,
        curve.fpr_lo,
        curve.fpr_hi,
        curve.mean_tpr,
        curve.tpr_lo,
        curve.tpr_hi,
        logs.log10_fpr,
        logs.log10_fpr_lo,
        logs.log10_fpr_hi,
    ]
    lists = [c.tolist() for c in cols]
    for i in range(len(curve)):
        yield [lists[0][i]] + [float(c[i]) for c in lists[1:]]


def write_bands_csv(curve: BandedCurve, path, floor: float | None = None) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BAND_COLUMNS)
        for row in band_rows(curve, floor):
            w.writerow([row[0], *map(repr, row[1:])])
    os.replace(tmp, path)


def read_bands_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != BAND_COLUMNS:
            raise ValueError(f"{path}: not a band CSV (header {header!r})")
        rows = [r for r in reader if r]
    data = np.array(rows, dtype=np.float64).reshape(-1, len(BAND_COLUMNS))
    out = {name: data[:, i] for i, name in enumerate(BAND_COLUMNS)}
    out["t"] = out["t"].astype(np.int64)
    return out
