"""Compiled CART kernels: Gini split search, tree growth and prediction.

Feature subsets are drawn with splitmix64 so that tree growth is fully
determined by the integer seed handed in from Python.
"""

from __future__ import annotations

import numba as nb
import numpy as np

UNLIMITED_DEPTH = 1 << 30
_MIN_GAIN = 1e-12


@nb.njit(cache=True)
def _splitmix64(state):
    state[0] += np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@nb.njit(cache=True)
def _best_split(X, y, idx, start, end, feats, min_leaf):
    n = end - start
    best_imp = np.inf
    best_f = -1
    best_thr = 0.0
    vals = np.empty(n)
    labs = np.empty(n, dtype=np.int64)
    for f in feats:
        for i in range(n):
            vals[i] = X[idx[start + i], f]
        order = np.argsort(vals, kind="mergesort")
        for i in range(n):
            labs[i] = y[idx[start + order[i]]]
        n1_total = 0
        for i in range(n):
            n1_total += labs[i]
        l1 = 0
        for i in range(n - 1):
            l1 += labs[i]
            a = vals[order[i]]
            b = vals[order[i + 1]]
            if a == b:
                continue
            nl = i + 1
            nr = n - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            # n * impurity / 2 as a single int / int division: exact ties stay
            # exact, so the lowest feature and threshold win them
            r1 = n1_total - l1
            num = l1 * (nl - l1) * nr + r1 * (nr - r1) * nl
            imp = np.float64(num) / np.float64(nl * nr)
            if imp < best_imp:
                best_imp = imp
                best_f = f
                thr = a + (b - a) / 2.0
                if not (a <= thr < b):
                    thr = a
                best_thr = thr
    return best_f, best_thr, best_imp


@nb.njit(cache=True)
def build_tree(X, y, sample, max_depth, min_leaf, max_features, seed):
    """Grow one tree on the row multiset ``sample``.

    Returns parallel node arrays (feature, threshold, left, right, value,
    depth, n_samples); ``feature == -1`` marks a leaf.
    """
    d = X.shape[1]
    n_s = sample.shape[0]
    cap = 2 * n_s + 1
    feature = np.full(cap, -1, dtype=np.int32)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int32)
    right = np.full(cap, -1, dtype=np.int32)
    value = np.zeros(cap, dtype=np.int8)
    depth = np.zeros(cap, dtype=np.int32)
    count = np.zeros(cap, dtype=np.int64)

    idx = sample.copy()
    buf = np.empty(n_s, dtype=np.int64)
    perm = np.arange(d)
    state = np.zeros(1, dtype=np.uint64)
    state[0] = np.uint64(seed)

    st_node = np.empty(cap, dtype=np.int64)
    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    top = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n_s
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = st_node[top]
        start = st_start[top]
        end = st_end[top]
        n = end - start
        n1 = 0
        for i in range(start, end):
            n1 += y[idx[i]]
        count[node] = n
        # majority class, ties go to class 0
        value[node] = 1 if 2 * n1 > n else 0
        if depth[node] >= max_depth or n1 == 0 or n1 == n or n < 2 * min_leaf:
            continue

        for i in range(max_features):
            j = i + np.int64(_splitmix64(state) % np.uint64(d - i))
            tmp = perm[i]
            perm[i] = perm[j]
            perm[j] = tmp
        feats = np.sort(perm[:max_features])
        f, thr, imp = _best_split(X, y, idx, start, end, feats, min_leaf)
        root = np.float64(n1 * (n - n1)) / np.float64(n)
        if f < 0 or imp >= root - _MIN_GAIN * n:
            continue

        # stable partition: rows with x <= thr first
        nl = 0
        for i in range(start, end):
            if X[idx[i], f] <= thr:
                buf[nl] = idx[i]
                nl += 1
        nr = 0
        for i in range(start, end):
            if X[idx[i], f] > thr:
                buf[nl + nr] = idx[i]
                nr += 1
        for i in range(n):
            idx[start + i] = buf[i]

        feature[node] = f
        threshold[node] = thr
        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        left[node] = lc
        right[node] = rc
        depth[lc] = depth[node] + 1
        depth[rc] = depth[node] + 1
        # push right first so the left subtree is numbered first
        st_node[top] = rc
        st_start[top] = start + nl
        st_end[top] = end
        top += 1
        st_node[top] = lc
        st_start[top] = start
        st_end[top] = start + nl
        top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        depth[:n_nodes].copy(),
        count[:n_nodes].copy(),
    )


@nb.njit(cache=True)
def predict_tree(feature, threshold, left, right, value, X):
    out = np.empty(X.shape[0], dtype=np.uint8)
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out
