"""Binomial upper-tail probabilities for vote thresholds.

The probability that an ensemble of ``m`` classifiers, each voting positive
with probability ``p``, collects at least ``t`` positive votes is the binomial
survival function ``sum_{k>=t} C(m,k) p^k (1-p)^(m-k)``.

The pmf is evaluated at the mode with Loader's saddle-point formula (deviance
``bd0`` plus Stirling remainders), then extended outwards with ratio
recurrences.  Every recurrence step multiplies by a factor <= 1, so there is
no overflow and relative error grows at most linearly in ``m``.  Tails are
accumulated from the small end, which keeps tiny upper tails accurate in
relative terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .votes import VoteMatrix

_LN_2PI = math.log(2.0 * math.pi)
_HALF_LN_2PI = 0.5 * _LN_2PI

# coefficients of the asymptotic series for the Stirling remainder
_S0 = 1.0 / 12
_S1 = 1.0 / 360
_S2 = 1.0 / 1260
_S3 = 1.0 / 1680
_S4 = 1.0 / 1188


def _stirlerr(n: int) -> float:
    """``log(n!) - log(sqrt(2 pi n) (n/e)^n)`` for integer ``n >= 1``."""
    if n <= 15:
        return math.lgamma(n + 1.0) - (n + 0.5) * math.log(n) + n - _HALF_LN_2PI
    nn = float(n) * n
    if n > 500:
        return (_S0 - _S1 / nn) / n
    if n > 80:
        return (_S0 - (_S1 - _S2 / nn) / nn) / n
    if n > 35:
        return (_S0 - (_S1 - (_S2 - _S3 / nn) / nn) / nn) / n
    return (_S0 - (_S1 - (_S2 - (_S3 - _S4 / nn) / nn) / nn) / nn) / n


def _bd0(x: float, np_: float) -> float:
    """Deviance term ``x log(x/np) + np - x`` without cancellation."""
    if abs(x - np_) < 0.1 * (x + np_):
        v = (x - np_) / (x + np_)
        s = (x - np_) * v
        ej = 2.0 * x * v
        v2 = v * v
        j = 1
        while True:
            ej *= v2
            s1 = s + ej / (2 * j + 1)
            if s1 == s:
                return s1
            s = s1
            j += 1
    return x * math.log(x / np_) + np_ - x


def _dbinom(k: int, m: int, p: float) -> float:
    q = 1.0 - p
    if k == 0:
        if p < 0.1:
            return math.exp(-_bd0(m, m * q) - m * p)
        return q**m
    if k == m:
        if q < 0.1:
            return math.exp(-_bd0(m, m * p) - m * q)
        return p**m
    lc = _stirlerr(m) - _stirlerr(k) - _stirlerr(m - k) - _bd0(k, m * p) - _bd0(m - k, m * q)
    lf = _LN_2PI + math.log(k) + math.log1p(-k / m)
    return math.exp(lc - 0.5 * lf)


def binomial_pmf(m: int, p: float) -> np.ndarray:
    """Probabilities ``Pr[K = k]`` for ``K ~ Binomial(m, p)``, ``k = 0..m``."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    pmf = np.zeros(m + 1)
    if p == 0.0:
        pmf[0] = 1.0
        return pmf
    if p == 1.0:
        pmf[m] = 1.0
        return pmf
    q = 1.0 - p
    mode = min(int((m + 1) * p), m)
    pmf[mode] = _dbinom(mode, m, p)
    if mode < m:
        k = np.arange(mode, m, dtype=np.float64)
        up = ((m - k) * p) / ((k + 1.0) * q)
        pmf[mode + 1 :] = pmf[mode] * np.cumprod(up)
    if mode > 0:
        k = np.arange(mode, 0, -1, dtype=np.float64)
        down = (k * q) / ((m - k + 1.0) * p)
        pmf[mode - 1 :: -1] = pmf[mode] * np.cumprod(down)
    return pmf


def survival_row(m: int, p: float) -> np.ndarray:
    """``Pr[K >= t]`` for ``t = 0..m+1``; first entry exactly 1, last exactly 0."""
    pmf = binomial_pmf(m, p)
    row = np.empty(m + 2)
    row[m + 1] = 0.0
    row[m::-1] = np.cumsum(pmf[::-1])
    np.clip(row, 0.0, 1.0, out=row)
    row[0] = 1.0
    return row


def binomial_survival(m: int, p: float, t: int) -> float:
    """Probability that at least ``t`` of ``m`` independent votes are positive.

    >>> binomial_survival(4, 0.5, 2)
    0.6875
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if t <= 0:
        return 1.0
    if t > m:
        return 0.0
    return float(survival_row(m, p)[t])


@dataclass(frozen=True)
class ThresholdProfile:
    """Per-point threshold-clearing probabilities for an ensemble of size ``m_eval``.

    Points with the same vote count share one row: ``rows[index[j]]`` is the
    profile of test point ``j`` and ``rows[r]`` belongs to the vote count
    ``distinct_counts[r]``.  Column ``t`` holds ``Pr[votes >= t]`` for
    ``t = 0..m_eval+1``.
    """

    m_eval: int
    m_observed: int
    distinct_counts: np.ndarray
    rows: np.ndarray
    index: np.ndarray

    @property
    def n(self) -> int:
        return self.index.shape[0]

    @property
    def thresholds(self) -> np.ndarray:
        return np.arange(self.m_eval + 2)

    @property
    def q(self) -> np.ndarray:
        """Dense ``N x (m_eval+2)`` matrix (materialized on each access)."""
        return self.rows[self.index]


def threshold_profile(votes: VoteMatrix, m_eval: int | None = None) -> ThresholdProfile:
    """Survival profiles using the empirical vote rate ``k_j / m_observed``.

    ``m_eval`` may differ from the number of observed classifiers; only one
    row per distinct vote count is computed, so the cost is bounded by
    ``(m_observed + 1) * m_eval`` regardless of the number of test points.
    """
    m_eval = votes.m_observed if m_eval is None else int(m_eval)
    if m_eval < 1:
        raise ValueError(f"m_eval must be >= 1, got {m_eval}")
    distinct, index = np.unique(votes.counts, return_inverse=True)
    rows = np.empty((distinct.size, m_eval + 2))
    for r, k in enumerate(distinct.tolist()):
        rows[r] = survival_row(m_eval, k / votes.m_observed)
    rows.setflags(write=False)
    distinct.setflags(write=False)
    index = index.reshape(-1)
    index.setflags(write=False)
    return ThresholdProfile(m_eval, votes.m_observed, distinct, rows, index)
