"""Labeled datasets and ensemble vote matrices.

Votes are stored canonically in compact form: for every test point the number
of weak classifiers that voted positive, out of ``m_observed``.  The full
point-by-classifier 0/1 matrix is optional and only needed when the oracle
resamples whole classifiers.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class DataFormatError(ValueError):
    """Raised when a dataset or vote file violates its format or invariants."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _check_labels(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size == 0:
        raise DataFormatError("labels must be a non-empty 1-d vector")
    if not np.all((labels == 0) | (labels == 1)):
        raise DataFormatError("invalid label: labels must be 0 or 1")
    return labels.astype(np.int8)


@dataclass(frozen=True)
class ClassCounts:
    n_neg: int
    n_pos: int

    def __post_init__(self):
        if self.n_neg < 1 or self.n_pos < 1:
            raise DataFormatError(
                f"both classes must be present (n_neg={self.n_neg}, n_pos={self.n_pos})"
            )

    @property
    def total(self) -> int:
        return self.n_neg + self.n_pos

    @classmethod
    def from_labels(cls, labels) -> "ClassCounts":
        labels = np.asarray(labels)
        n_pos = int(np.count_nonzero(labels == 1))
        return cls(n_neg=int(labels.size - n_pos), n_pos=n_pos)


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix with binary labels.  Row order is significant."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise DataFormatError(f"features must be an N x d matrix with N, d >= 1, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise DataFormatError("non-finite feature value in dataset")
        y = _check_labels(self.labels)
        if y.shape[0] != x.shape[0]:
            raise DataFormatError(f"{x.shape[0]} feature rows but {y.shape[0]} labels")
        names = self.feature_names
        if names is not None:
            names = tuple(str(n) for n in names)
            if len(names) != x.shape[1]:
                raise DataFormatError("feature_names length does not match d")
        object.__setattr__(self, "features", _frozen(x))
        object.__setattr__(self, "labels", _frozen(y))
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> ClassCounts:
        return ClassCounts.from_labels(self.labels)

    def subset(self, rows) -> "LabeledDataset":
        rows = np.asarray(rows)
        return LabeledDataset(self.features[rows], self.labels[rows], self.feature_names)


@dataclass(frozen=True)
class VoteMatrix:
    """Positive-vote counts per test point out of ``m_observed`` classifiers.

    Both classes must be present, otherwise FPR or TPR has no denominator.
    """

    counts: np.ndarray
    m_observed: int
    labels: np.ndarray
    full_votes: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        m = int(self.m_observed)
        if m < 1:
            raise DataFormatError("m_observed must be >= 1")
        k = np.asarray(self.counts)
        if k.ndim != 1 or k.size == 0:
            raise DataFormatError("counts must be a non-empty 1-d vector")
        if not np.all(k == np.round(k)):
            raise DataFormatError("vote counts must be integers")
        k = k.astype(np.int64)
        if np.any(k < 0):
            raise DataFormatError("negative vote count")
        if np.any(k > m):
            raise DataFormatError(f"count exceeds m (m={m}, max count={int(k.max())})")
        y = _check_labels(self.labels)
        if y.shape[0] != k.shape[0]:
            raise DataFormatError(f"{k.shape[0]} counts but {y.shape[0]} labels")
        ClassCounts.from_labels(y)
        full = self.full_votes
        if full is not None:
            full = np.asarray(full)
            if full.shape != (k.shape[0], m):
                raise DataFormatError(f"full_votes shape {full.shape} != {(k.shape[0], m)}")
            if not np.all((full == 0) | (full == 1)):
                raise DataFormatError("full_votes entries must be 0 or 1")
            full = full.astype(np.uint8)
            if not np.array_equal(full.sum(axis=1, dtype=np.int64), k):
                raise DataFormatError("full_votes row sums do not match counts")
            full = _frozen(full)
        object.__setattr__(self, "m_observed", m)
        object.__setattr__(self, "counts", _frozen(k))
        object.__setattr__(self, "labels", _frozen(y))
        object.__setattr__(self, "full_votes", full)

    @property
    def n(self) -> int:
        return self.counts.shape[0]

    @property
    def p_hat(self) -> np.ndarray:
        """Empirical positive-vote rate ``k_j / m_observed`` per test point."""
        return self.counts / self.m_observed

    def class_counts(self) -> ClassCounts:
        return ClassCounts.from_labels(self.labels)


def counts_from_full(full_votes, labels) -> VoteMatrix:
    full = np.asarray(full_votes)
    if full.ndim != 2 or full.shape[1] < 1:
        raise DataFormatError("full_votes must be an N x m matrix with m >= 1")
    if not np.all((full == 0) | (full == 1)):
        raise DataFormatError("non-binary entry in vote matrix")
    full = full.astype(np.uint8)
    return VoteMatrix(
        counts=full.sum(axis=1, dtype=np.int64),
        m_observed=full.shape[1],
        labels=labels,
        full_votes=full,
    )


# --------------------------------------------------------------------------
# file formats


def _read_rows(path) -> list[list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    return rows


def _resolve_label_column(header: Sequence[str], label_column) -> int:
    names = [h.strip() for h in header]
    if isinstance(label_column, (int, np.integer)):
        idx = int(label_column)
    elif label_column in names:
        return names.index(label_column)
    elif isinstance(label_column, str) and label_column.lstrip("-").isdigit():
        idx = int(label_column)
    else:
        raise DataFormatError(f"label column {label_column!r} not in header")
    if not -len(names) <= idx < len(names):
        raise DataFormatError(f"label column index {idx} out of range")
    return idx % len(names)


def load_dataset(path, label_column="label") -> LabeledDataset:
    """Read a CSV dataset with a header row.

    ``label_column`` is a header name or a zero-based column index; every other
    column is parsed as a float feature.
    """
    rows = _read_rows(path)
    if len(rows) < 2:
        raise DataFormatError(f"{path}: empty dataset (need a header and at least one row)")
    header, body = rows[0], rows[1:]
    li = _resolve_label_column(header, label_column)
    width = len(header)
    feat_cols = [i for i in range(width) if i != li]
    if not feat_cols:
        raise DataFormatError(f"{path}: no feature columns")
    x = np.empty((len(body), len(feat_cols)))
    y = np.empty(len(body), dtype=np.int8)
    for r, row in enumerate(body, start=2):
        if len(row) != width:
            raise DataFormatError(f"{path}:{r}: expected {width} fields, got {len(row)}")
        try:
            lab = float(row[li])
        except ValueError:
            raise DataFormatError(f"{path}:{r}: invalid label {row[li]!r}") from None
        if lab not in (0.0, 1.0):
            raise DataFormatError(f"{path}:{r}: invalid label {row[li]!r}")
        y[r - 2] = int(lab)
        for c, col in enumerate(feat_cols):
            try:
                v = float(row[col])
            except ValueError:
                raise DataFormatError(f"{path}:{r}: non-numeric feature {row[col]!r}") from None
            if not math.isfinite(v):
                raise DataFormatError(f"{path}:{r}: non-finite feature {row[col]!r}")
            x[r - 2, c] = v
    names = tuple(header[i].strip() for i in feat_cols)
    return LabeledDataset(x, y, names)


def save_dataset(data: LabeledDataset, path, label_name: str = "label") -> None:
    names = data.feature_names or tuple(f"x{i}" for i in range(data.d))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([label_name, *names])
        for lab, row in zip(data.labels.tolist(), data.features.tolist()):
            w.writerow([lab, *map(repr, row)])


def _parse_int(tok: str, where: str) -> int:
    try:
        return int(tok.strip())
    except ValueError:
        raise DataFormatError(f"{where}: expected an integer, got {tok!r}") from None


def load_votes(path) -> VoteMatrix:
    """Read a vote file in compact (``# m=...`` + ``label,count``) or full form."""
    rows = _read_rows(path)
    if not rows:
        raise DataFormatError(f"{path}: empty vote file")
    m_decl = None
    first = rows[0][0].strip()
    if first.startswith("#"):
        meta = ",".join(rows[0]).lstrip("#").strip()
        key, _, val = meta.partition("=")
        if key.strip() != "m":
            raise DataFormatError(f"{path}: bad comment line {meta!r}, expected '# m=<int>'")
        m_decl = _parse_int(val, f"{path}:1")
        rows = rows[1:]
    if not rows or rows[0][0].strip() != "label":
        raise DataFormatError(f"{path}: missing header row starting with 'label'")
    header, body = [h.strip() for h in rows[0]], rows[1:]
    if not body:
        raise DataFormatError(f"{path}: no vote rows")
    where = lambda i: f"{path}:row {i}"  # noqa: E731

    if header == ["label", "count"]:
        if m_decl is None:
            raise DataFormatError(f"{path}: compact vote file needs a '# m=<int>' first line")
        labels, counts = [], []
        for i, row in enumerate(body, start=1):
            if len(row) != 2:
                raise DataFormatError(f"{where(i)}: expected 2 fields, got {len(row)}")
            labels.append(_parse_int(row[0], where(i)))
            k = _parse_int(row[1], where(i))
            if k > m_decl:
                raise DataFormatError(f"{where(i)}: count exceeds m ({k} > {m_decl})")
            counts.append(k)
        return VoteMatrix(np.array(counts, dtype=np.int64), m_decl, np.array(labels))

    m = len(header) - 1
    if m < 1 or header[1:] != [f"v{i}" for i in range(1, m + 1)]:
        raise DataFormatError(f"{path}: header must be 'label,count' or 'label,v1,...,vm'")
    if m_decl is not None and m_decl != m:
        raise DataFormatError(f"{path}: '# m={m_decl}' disagrees with {m} vote columns")
    full = np.empty((len(body), m), dtype=np.int64)
    labels = []
    for i, row in enumerate(body, start=1):
        if len(row) != m + 1:
            raise DataFormatError(f"{where(i)}: inconsistent row width {len(row)}, expected {m + 1}")
        labels.append(_parse_int(row[0], where(i)))
        full[i - 1] = [_parse_int(v, where(i)) for v in row[1:]]
    return counts_from_full(full, np.array(labels))


def save_votes(votes: VoteMatrix, path, compact: bool = False) -> None:
    """Write a vote file.  Falls back to compact form when full votes are absent."""
    compact = compact or votes.full_votes is None
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        if compact:
            fh.write(f"# m={votes.m_observed}\nlabel,count\n")
            fh.writelines(f"{y},{k}\n" for y, k in zip(votes.labels.tolist(), votes.counts.tolist()))
        else:
            m = votes.m_observed
            fh.write("label," + ",".join(f"v{i}" for i in range(1, m + 1)) + "\n")
            for y, row in zip(votes.labels.tolist(), votes.full_votes):
                fh.write(f"{y}," + ",".join("1" if v else "0" for v in row.tolist()) + "\n")
    os.replace(tmp, path)
