import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ensroc.binomial import threshold_profile
from ensroc.roc import auc, compare_curves, estimate_roc, variance_term
from ensroc.votes import VoteMatrix


def _estimate(votes, m_eval=None):
    return estimate_roc(threshold_profile(votes, m_eval), votes.labels)


@pytest.mark.parametrize(
    "q, classifier, poisson",
    [(0.0, 0.0, 0.0), (1.0, 0.0, 1.0), (0.5, 0.25, 0.75)],
)
def test_variance_term(q, classifier, poisson):
    v = variance_term(q)
    assert v.classifier_only == classifier
    assert v.with_poisson == poisson


def test_variance_term_rejects_bad_q():
    with pytest.raises(ValueError):
        variance_term(1.01)


def test_hand_example(small_votes):
    est = _estimate(small_votes)
    assert est.mean_fpr[2] == 0.5
    assert est.mean_tpr[2] == 1.0
    assert est.var_fpr_classifier[2] == 0.0
    assert est.var_fpr_full[2] == 0.25


def test_threshold_zero(small_votes):
    est = _estimate(small_votes)
    n_neg = est.class_counts.n_neg
    assert est.mean_fpr[0] == 1.0 and est.mean_tpr[0] == 1.0
    assert est.var_fpr_classifier[0] == 0.0 and est.var_tpr_classifier[0] == 0.0
    assert est.var_fpr_full[0] == pytest.approx(1.0 / n_neg, abs=1e-15)


def test_all_zero_votes():
    v = VoteMatrix(np.zeros(6, dtype=int), 5, np.array([0, 1, 0, 1, 0, 1]))
    est = _estimate(v)
    for arr in (est.mean_fpr, est.mean_tpr, est.var_fpr_classifier, est.var_fpr_full, est.var_tpr_full):
        assert np.all(arr[1:] == 0.0)


def test_auc_examples(small_votes):
    # curve points (0,0), (0.5,1) x4, (1,1): area 0.25 + 0.5
    assert auc(_estimate(small_votes)) == 0.75
    perfect = VoteMatrix(np.array([0, 0, 6, 6, 6]), 6, np.array([0, 0, 1, 1, 1]))
    assert auc(_estimate(perfect)) == 1.0
    same = VoteMatrix(np.array([2, 2, 2, 2]), 5, np.array([0, 1, 0, 1]))
    assert auc(_estimate(same)) == pytest.approx(0.5, abs=1e-15)


def test_full_variance_identity(random_votes):
    prof = threshold_profile(random_votes)
    est = estimate_roc(prof, random_votes.labels)
    q = prof.q
    neg = random_votes.labels == 0
    n = neg.sum()
    qn = q[neg]
    np.testing.assert_allclose(est.var_fpr_full, (qn.sum(0) + (qn * (1 - qn)).sum(0)) / n**2, atol=1e-12, rtol=0)
    np.testing.assert_allclose(est.mean_fpr, qn.mean(0), atol=1e-12, rtol=0)


def test_poisson_weights_do_not_move_means(random_votes):
    est = _estimate(random_votes)
    # both variance modes describe spread around the same mean vector
    assert est.var_fpr("classifier") is est.var_fpr_classifier
    assert est.var_fpr("full") is est.var_fpr_full
    with pytest.raises(ValueError):
        est.var_fpr("other")


@st.composite
def votes_strategy(draw):
    m = draw(st.integers(1, 40))
    n = draw(st.integers(2, 40))
    counts = draw(st.lists(st.integers(0, m), min_size=n, max_size=n))
    labels = [0, 1] + draw(st.lists(st.integers(0, 1), min_size=n - 2, max_size=n - 2))
    return VoteMatrix(np.array(counts), m, np.array(labels))


@settings(max_examples=150, deadline=None)
@given(votes_strategy(), st.integers(1, 80))
def test_estimate_invariants(votes, m_eval):
    est = _estimate(votes, m_eval)
    assert np.all(np.diff(est.mean_fpr) <= 0) and np.all(np.diff(est.mean_tpr) <= 0)
    assert est.mean_fpr[0] == 1.0 and est.mean_tpr[0] == 1.0
    assert est.mean_fpr[-1] == 0.0 and est.mean_tpr[-1] == 0.0
    assert np.all(est.var_fpr_full >= est.var_fpr_classifier)
    assert np.all(est.var_tpr_full >= est.var_tpr_classifier)
    assert np.all(est.var_fpr_classifier >= 0)
    assert 0.0 <= auc(est) <= 1.0


@settings(max_examples=60, deadline=None)
@given(votes_strategy())
def test_unanimous_votes_have_zero_classifier_variance(votes):
    k = np.where(votes.counts * 2 >= votes.m_observed, votes.m_observed, 0)
    v = VoteMatrix(k, votes.m_observed, votes.labels)
    est = _estimate(v)
    assert np.all(est.var_fpr_classifier == 0.0) and np.all(est.var_tpr_classifier == 0.0)


def test_compare_self(random_votes):
    est = _estimate(random_votes)
    cmp = compare_curves(est, est)
    assert np.all(cmp.delta_tpr == 0.0)
    assert cmp.delta_auc == 0.0
    assert cmp.fpr[0] == 0.0 and cmp.fpr[-1] == 1.0


def test_compare_dominance(random_votes):
    labels = random_votes.labels
    boosted = np.where(labels == 1, np.minimum(random_votes.counts + 3, random_votes.m_observed), random_votes.counts)
    a = _estimate(random_votes)
    b = _estimate(VoteMatrix(boosted, random_votes.m_observed, labels))
    cmp = compare_curves(a, b, "classifier")
    assert np.all(cmp.delta_tpr >= -1e-12)
    assert cmp.delta_auc > 0


def test_compare_recomputed_independently(random_votes):
    a = _estimate(random_votes)
    b = _estimate(random_votes, 3 * random_votes.m_observed)
    cmp = compare_curves(a, b, "full")

    def tpr_at(est, x):
        # walk the curve from the highest threshold down; linear between vertices,
        # and at a repeated FPR the later (higher-TPR) vertex wins
        xs, ys, vs = [], [], []
        for f, r, v in zip(est.mean_fpr[::-1], est.mean_tpr[::-1], est.var_tpr_full[::-1]):
            if xs and f == xs[-1]:
                ys[-1], vs[-1] = r, v
            else:
                xs.append(f), ys.append(r), vs.append(v)
        for i in range(len(xs) - 1):
            if xs[i] <= x <= xs[i + 1]:
                w = (x - xs[i]) / (xs[i + 1] - xs[i])
                return ys[i] + w * (ys[i + 1] - ys[i]), vs[i] + w * (vs[i + 1] - vs[i])
        raise AssertionError(x)

    for i in range(0, len(cmp.fpr), 7):
        x = cmp.fpr[i]
        (ra, va), (rb, vb) = tpr_at(a, x), tpr_at(b, x)
        assert cmp.delta_tpr[i] == pytest.approx(rb - ra, abs=1e-12)
        assert cmp.se_delta[i] == pytest.approx(np.sqrt(va + vb), abs=1e-12)


def test_compare_rejects_different_label_sets(random_votes):
    a = _estimate(random_votes)
    other = VoteMatrix(np.array([1, 2, 3]), 4, np.array([0, 1, 1]))
    with pytest.raises(ValueError, match="label"):
        compare_curves(a, _estimate(other))
