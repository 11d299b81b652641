"""Monte Carlo resampling oracle for the analytic ROC estimators.

The oracle literally performs the resampling that the closed forms integrate
out: it redraws the ensemble (either per-point binomial votes or a bootstrap
of whole classifiers) and optionally Poisson(1)-reweights the test points,
then tabulates FPR/TPR at every threshold.

Randomness: replicates are processed in fixed blocks of ``BLOCK`` replicates.
Block ``b`` draws from ``Generator(Philox(SeedSequence([seed, b])))``, so the
stream assigned to a replicate depends only on ``(seed, replicate index)``.
Per-threshold sums are kept as exact integers, so the summary does not depend
on the order in which blocks are combined.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field
from statistics import NormalDist
from typing import Literal

import numpy as np

from .bands import build_bands, simultaneous_bands
from .binomial import survival_row, threshold_profile
from .roc import RocEstimate, estimate_roc
from .votes import ClassCounts, VoteMatrix

BLOCK = 1024
CLASSIFIER_MODES = ("independent-binomial", "shared-column-bootstrap")

# Poisson(1) CDF for k = 0..16
_POISSON_CDF = np.cumsum([math.exp(-1.0) / math.factorial(k) for k in range(17)])


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))


def poisson1(rng: np.random.Generator, size) -> np.ndarray:
    """Poisson(1) draws by inversion of the CDF.

    A tabulated CDF covers ``k <= 16``; the rare uniforms beyond it (about one
    in 10^15) continue the inversion term by term.
    """
    u = rng.random(size)
    c = np.searchsorted(_POISSON_CDF, u, side="right").astype(np.int64)
    tail = np.flatnonzero(c > 16)
    if tail.size:
        flat_u, flat_c = u.reshape(-1), c.reshape(-1)
        for i in tail:
            k, term, cdf = 16, math.exp(-1.0) / math.factorial(16), float(_POISSON_CDF[-1])
            while cdf <= flat_u[i] and term > 0.0:
                k += 1
                term /= k
                cdf += term
            flat_c[i] = k
    return c


@dataclass(frozen=True)
class OracleConfig:
    replicates: int
    seed: int
    classifier_mode: Literal["independent-binomial", "shared-column-bootstrap"] = "independent-binomial"
    poisson_resampling: bool = False
    m_eval: int | None = None

    def __post_init__(self):
        if int(self.replicates) < 1:
            raise ValueError(f"replicates must be >= 1, got {self.replicates}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.classifier_mode not in CLASSIFIER_MODES:
            raise ValueError(f"classifier_mode must be one of {CLASSIFIER_MODES}")
        if self.m_eval is not None and int(self.m_eval) < 1:
            raise ValueError(f"m_eval must be >= 1, got {self.m_eval}")


@dataclass(frozen=True)
class OracleSummary:
    thresholds: np.ndarray
    mean_fpr: np.ndarray
    var_fpr: np.ndarray
    se_fpr: np.ndarray
    mean_tpr: np.ndarray
    var_tpr: np.ndarray
    se_tpr: np.ndarray
    auc: np.ndarray
    # diagnostic: rates normalized by the resampled class totals instead
    realized_mean_fpr: np.ndarray
    realized_mean_tpr: np.ndarray
    config: OracleConfig
    m_eval: int
    class_counts: ClassCounts = field(repr=False)

    @property
    def replicates(self) -> int:
        return self.config.replicates


class _Moments:
    """Exact integer power sums of per-replicate positive counts."""

    def __init__(self, width: int):
        self.s1 = [0] * width
        self.s2 = [0] * width

    def add(self, counts: np.ndarray):
        c = counts.astype(np.int64)
        for t, (a, b) in enumerate(zip(c.sum(axis=0).tolist(), (c * c).sum(axis=0).tolist())):
            self.s1[t] += a
            self.s2[t] += b

    def finish(self, n_rep: int, denom: int):
        mean = np.array([s / (n_rep * denom) for s in self.s1])
        if n_rep > 1:
            var = np.array(
                [(n_rep * s2 - s1 * s1) / (n_rep * (n_rep - 1) * denom * denom)
                 for s1, s2 in zip(self.s1, self.s2)]
            )
        else:
            var = np.zeros(len(self.s1))
        return mean, var


def _clearing_counts(k, weights, mask, m_eval):
    """Weighted number of masked points with ``k >= t`` per replicate, ``t = 0..m_eval+1``."""
    b = k.shape[0]
    kk = k[:, mask]
    ww = weights[:, mask]
    idx = (np.arange(b)[:, None] * (m_eval + 1) + kk).ravel()
    hist = np.bincount(idx, weights=ww.ravel(), minlength=b * (m_eval + 1)).reshape(b, m_eval + 1)
    out = np.zeros((b, m_eval + 2))
    out[:, m_eval::-1] = np.cumsum(hist[:, ::-1], axis=1)
    return np.rint(out).astype(np.int64)


def _draw_votes(rng, votes: VoteMatrix, config: OracleConfig, m_eval: int, b: int):
    if config.classifier_mode == "independent-binomial":
        return rng.binomial(m_eval, votes.p_hat, size=(b, votes.n)).astype(np.int64)
    cols = rng.integers(0, votes.m_observed, size=(b, m_eval))
    mult = np.zeros((b, votes.m_observed), dtype=np.int64)
    np.add.at(mult, (np.repeat(np.arange(b), m_eval), cols.ravel()), 1)
    return mult @ votes.full_votes.T.astype(np.int64)


def run_oracle(votes: VoteMatrix, config: OracleConfig) -> OracleSummary:
    if config.classifier_mode == "shared-column-bootstrap" and votes.full_votes is None:
        raise ValueError("shared-column-bootstrap mode needs the full vote matrix")
    m_eval = votes.m_observed if config.m_eval is None else int(config.m_eval)
    counts = votes.class_counts()
    neg, pos = votes.labels == 0, votes.labels == 1
    width = m_eval + 2
    mom_f, mom_t = _Moments(width), _Moments(width)
    real_f = np.zeros(width)
    real_t = np.zeros(width)
    real_nf = np.zeros(width)
    real_nt = np.zeros(width)
    aucs = np.empty(config.replicates)

    done = 0
    block = 0
    while done < config.replicates:
        b = min(BLOCK, config.replicates - done)
        rng = block_rng(int(config.seed), block)
        k = _draw_votes(rng, votes, config, m_eval, b)
        if config.poisson_resampling:
            c = poisson1(rng, (b, votes.n))
        else:
            c = np.ones((b, votes.n), dtype=np.int64)
        cf = _clearing_counts(k, c, neg, m_eval)
        ct = _clearing_counts(k, c, pos, m_eval)
        mom_f.add(cf)
        mom_t.add(ct)
        fpr, tpr = cf / counts.n_neg, ct / counts.n_pos
        fr, tr = fpr[:, ::-1], tpr[:, ::-1]
        aucs[done : done + b] = (np.diff(fr, axis=1) * (tr[:, 1:] + tr[:, :-1])).sum(axis=1) / 2.0
        # realized-total normalization; replicates with an empty class are skipped
        tot_f, tot_t = cf[:, :1], ct[:, :1]
        ok_f, ok_t = tot_f[:, 0] > 0, tot_t[:, 0] > 0
        real_f += (cf[ok_f] / tot_f[ok_f]).sum(axis=0)
        real_t += (ct[ok_t] / tot_t[ok_t]).sum(axis=0)
        real_nf += ok_f.sum()
        real_nt += ok_t.sum()
        done += b
        block += 1

    r = config.replicates
    mean_f, var_f = mom_f.finish(r, counts.n_neg)
    mean_t, var_t = mom_t.finish(r, counts.n_pos)
    with np.errstate(invalid="ignore", divide="ignore"):
        rmf, rmt = real_f / real_nf, real_t / real_nt
    return OracleSummary(
        thresholds=np.arange(width),
        mean_fpr=mean_f,
        var_fpr=var_f,
        se_fpr=np.sqrt(var_f / r),
        mean_tpr=mean_t,
        var_tpr=var_t,
        se_tpr=np.sqrt(var_t / r),
        auc=aucs,
        realized_mean_fpr=rmf,
        realized_mean_tpr=rmt,
        config=config,
        m_eval=m_eval,
        class_counts=counts,
    )


# --------------------------------------------------------------------------
# analytic vs empirical


def chi2_quantile(p: float, dof: int) -> float:
    """Wilson-Hilferty approximation to the chi-square quantile (fine for large dof)."""
    z = NormalDist().inv_cdf(p)
    h = 2.0 / (9.0 * dof)
    return dof * (1.0 - h + z * math.sqrt(h)) ** 3


@dataclass(frozen=True)
class OracleReport:
    thresholds: np.ndarray
    mean_pass_fpr: np.ndarray
    mean_pass_tpr: np.ndarray
    var_checked_fpr: np.ndarray
    var_checked_tpr: np.ndarray
    var_pass_fpr: np.ndarray
    var_pass_tpr: np.ndarray
    analytic_var_fpr: np.ndarray
    analytic_var_tpr: np.ndarray
    n_se: float
    var_rel_tol: float

    @property
    def mean_pass_fraction(self) -> float:
        ok = np.concatenate([self.mean_pass_fpr, self.mean_pass_tpr])
        return float(ok.mean())

    @property
    def var_pass_fraction(self) -> float:
        checked = np.concatenate([self.var_checked_fpr, self.var_checked_tpr])
        ok = np.concatenate([self.var_pass_fpr, self.var_pass_tpr])[checked]
        return float(ok.mean()) if ok.size else 1.0


def _mean_ok(analytic, emp, se, n_se):
    return np.where(se > 0, np.abs(analytic - emp) <= n_se * se, np.abs(analytic - emp) <= 1e-12)


def _var_ok(analytic, emp, r, rel_tol, chi_lo, chi_hi):
    rel = np.abs(emp - analytic) <= rel_tol * analytic
    # 99% interval for the true variance given the sample variance
    in_ci = ((r - 1) * emp / chi_hi <= analytic) & (analytic <= (r - 1) * emp / chi_lo)
    return rel | in_ci


def compare_to_analytic(
    summary: OracleSummary,
    estimate: RocEstimate,
    n_se: float = 4.0,
    var_rel_tol: float = 0.10,
    var_floor: float = 1e-8,
) -> OracleReport:
    """Per-threshold verdicts: means within ``n_se`` standard errors, variances
    within ``var_rel_tol`` relative error or a 99% chi-square interval."""
    if estimate.m_eval != summary.m_eval:
        raise ValueError(f"m_eval mismatch: estimate {estimate.m_eval}, oracle {summary.m_eval}")
    mode = "full" if summary.config.poisson_resampling else "classifier"
    r = summary.replicates
    chi_lo = chi2_quantile(0.005, max(r - 1, 1))
    chi_hi = chi2_quantile(0.995, max(r - 1, 1))
    avf, avt = estimate.var_fpr(mode), estimate.var_tpr(mode)
    return OracleReport(
        thresholds=summary.thresholds,
        mean_pass_fpr=_mean_ok(estimate.mean_fpr, summary.mean_fpr, summary.se_fpr, n_se),
        mean_pass_tpr=_mean_ok(estimate.mean_tpr, summary.mean_tpr, summary.se_tpr, n_se),
        var_checked_fpr=avf > var_floor,
        var_checked_tpr=avt > var_floor,
        var_pass_fpr=_var_ok(avf, summary.var_fpr, r, var_rel_tol, chi_lo, chi_hi),
        var_pass_tpr=_var_ok(avt, summary.var_tpr, r, var_rel_tol, chi_lo, chi_hi),
        analytic_var_fpr=avf,
        analytic_var_tpr=avt,
        n_se=n_se,
        var_rel_tol=var_rel_tol,
    )


SUMMARY_COLUMNS = (
    "t",
    "mean_fpr",
    "var_fpr",
    "se_fpr",
    "mean_tpr",
    "var_tpr",
    "se_tpr",
    "realized_mean_fpr",
    "realized_mean_tpr",
)


def write_oracle_summary(summary: OracleSummary, csv_path, json_path) -> None:
    cols = [getattr(summary, c if c != "t" else "thresholds").tolist() for c in SUMMARY_COLUMNS]
    tmp = f"{csv_path}.tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for row in zip(*cols):
            w.writerow([row[0], *map(repr, row[1:])])
    os.replace(tmp, csv_path)
    header = {
        "config": asdict(summary.config),
        "m_eval": summary.m_eval,
        "n_neg": summary.class_counts.n_neg,
        "n_pos": summary.class_counts.n_pos,
        "auc_mean": float(summary.auc.mean()),
        "auc_var": float(summary.auc.var(ddof=1)) if summary.replicates > 1 else 0.0,
        "block_size": BLOCK,
        "rng": "numpy Philox keyed by SeedSequence([seed, block_index])",
    }
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")


# --------------------------------------------------------------------------
# band coverage


@dataclass(frozen=True)
class CoverageResult:
    thresholds: np.ndarray
    fpr_coverage: np.ndarray
    tpr_coverage: np.ndarray
    interior: np.ndarray
    n_draws: int
    target: str

    @property
    def interior_fpr(self) -> np.ndarray:
        return self.fpr_coverage[self.interior]

    @property
    def interior_tpr(self) -> np.ndarray:
        return self.tpr_coverage[self.interior]


def true_mean_curve(truth, labels, m_eval: int):
    truth = np.asarray(truth, dtype=np.float64)
    labels = np.asarray(labels)
    q = np.array([survival_row(m_eval, p) for p in truth])
    return q[labels == 0].mean(axis=0), q[labels == 1].mean(axis=0)


def coverage_experiment(
    truth,
    labels,
    n_draws: int,
    config: OracleConfig,
    *,
    m_observed: int | None = None,
    confidence: float = 0.95,
    target: Literal["realized", "mean"] = "realized",
    simultaneous: bool = False,
) -> CoverageResult:
    """Empirical coverage of confidence bands built from synthetic vote draws.

    Each trial draws ``k_j ~ Binomial(m_observed, truth_j)``, builds bands for
    an ensemble of ``config.m_eval`` classifiers (full mode when
    ``config.poisson_resampling`` is set, classifier mode otherwise) and checks
    whether the target lies inside them at each threshold.

    ``target="realized"`` checks the curve of an independently drawn ensemble
    of ``m_eval`` classifiers (Poisson-reweighted when resampling is on),
    which is the quantity the band variance describes.  ``target="mean"``
    checks the exact mean curve implied by ``truth``.
    """
    truth = np.asarray(truth, dtype=np.float64)
    labels = np.asarray(labels)
    if truth.shape != labels.shape:
        raise ValueError("truth and labels must have the same length")
    if np.any((truth < 0) | (truth > 1)):
        raise ValueError("truth probabilities must lie in [0, 1]")
    if target not in ("realized", "mean"):
        raise ValueError(f"unknown coverage target {target!r}")
    m_eval = int(config.m_eval) if config.m_eval is not None else int(m_observed or 0)
    if m_eval < 1:
        raise ValueError("config.m_eval or m_observed must be given")
    m_obs = int(m_observed) if m_observed is not None else m_eval
    counts = ClassCounts.from_labels(labels)
    neg, pos = labels == 0, labels == 1
    mode = "full" if config.poisson_resampling else "classifier"
    make = simultaneous_bands if simultaneous else build_bands
    if target == "mean":
        true_f, true_t = true_mean_curve(truth, labels, m_eval)
    eps = 1e-12
    hit_f = np.zeros(m_eval + 2, dtype=np.int64)
    hit_t = np.zeros(m_eval + 2, dtype=np.int64)
    t = np.arange(m_eval + 2)
    for trial in range(n_draws):
        rng = block_rng(int(config.seed), trial)
        k = rng.binomial(m_obs, truth)
        est = estimate_roc(threshold_profile(VoteMatrix(k, m_obs, labels), m_eval), labels)
        band = make(est, confidence, mode)
        if target == "realized":
            k2 = rng.binomial(m_eval, truth)
            c = poisson1(rng, truth.shape[0]) if config.poisson_resampling else np.ones(truth.shape[0])
            clears = k2[:, None] >= t[None, :]
            true_f = (c[neg, None] * clears[neg]).sum(axis=0) / counts.n_neg
            true_t = (c[pos, None] * clears[pos]).sum(axis=0) / counts.n_pos
        hit_f += (band.fpr_lo - eps <= true_f) & (true_f <= band.fpr_hi + eps)
        hit_t += (band.tpr_lo - eps <= true_t) & (true_t <= band.tpr_hi + eps)
    interior = (t >= 1) & (t <= m_eval)
    return CoverageResult(t, hit_f / n_draws, hit_t / n_draws, interior, n_draws, target)
