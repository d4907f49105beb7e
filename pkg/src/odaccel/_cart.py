"""Compiled kernels for CART regression trees (variance-reduction splits)."""

from __future__ import annotations

import numpy as np
from numba import njit

_LEAF = -1


@njit(cache=True)
def _next(state):
    # splitmix64; state is a length-1 uint64 array
    state[0] += np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _randint(state, n):
    return np.int64(_next(state) % np.uint64(n))


@njit(cache=True)
def build_tree(X, y, rows, max_depth, min_samples_split, max_features, seed):
    """Grow one tree on ``X[rows]``; returns flat node arrays and per-feature gain.

    Every feature keeps the node's samples in sorted order; a split stably
    partitions all of them, so no per-node sorting is needed.
    """
    m = rows.shape[0]
    d = X.shape[1]
    cap = 2 * m + 1
    feature = np.full(cap, _LEAF, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    importance = np.zeros(d)

    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed)

    xs = np.empty((m, d))
    ys = np.empty(m)
    for i in range(m):
        ys[i] = y[rows[i]]
        for f in range(d):
            xs[i, f] = X[rows[i], f]
    order = np.empty((d, m), dtype=np.int64)
    for f in range(d):
        order[f] = np.argsort(xs[:, f], kind="mergesort")
    feats = np.arange(d)
    goes_left = np.zeros(m, dtype=np.bool_)
    buf = np.empty(m, dtype=np.int64)

    st_node = np.empty(cap, dtype=np.int64)
    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = m
    st_depth[0] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = st_node[top]
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]
        cnt = end - start

        total = 0.0
        ymin = np.inf
        ymax = -np.inf
        for i in range(start, end):
            v = ys[order[0, i]]
            total += v
            if v < ymin:
                ymin = v
            if v > ymax:
                ymax = v
        value[node] = total / cnt

        if cnt < min_samples_split or (max_depth >= 0 and depth >= max_depth) or ymax == ymin:
            continue

        best_gain = 0.0
        best_feat = -1
        best_thr = 0.0
        best_gap = 0.0
        parent_proxy = total * total / cnt
        visited = 0
        # Fisher-Yates over features; stop after max_features non-constant ones
        for j in range(d):
            r = j + _randint(state, d - j)
            tmp = feats[j]
            feats[j] = feats[r]
            feats[r] = tmp
            f = feats[j]
            if xs[order[f, end - 1], f] <= xs[order[f, start], f]:
                continue
            visited += 1
            s_left = 0.0
            for i in range(start, end - 1):
                s_left += ys[order[f, i]]
                a = xs[order[f, i], f]
                b = xs[order[f, i + 1], f]
                if b <= a:
                    continue
                nl = i + 1 - start
                nr = cnt - nl
                s_right = total - s_left
                gain = s_left * s_left / nl + s_right * s_right / nr - parent_proxy
                # equal gains (e.g. the same partition via another feature) go to
                # the wider gap, so the choice does not depend on column order
                if gain > best_gain or (gain == best_gain and best_feat >= 0 and b - a > best_gap):
                    best_gain = gain
                    best_gap = b - a
                    best_feat = f
                    t = (a + b) / 2.0
                    if t >= b or t < a:
                        t = a
                    best_thr = t
            if visited >= max_features:
                break

        if best_feat < 0:
            continue

        n_left = 0
        for i in range(start, end):
            s = order[best_feat, i]
            goes_left[s] = xs[s, best_feat] <= best_thr
            if goes_left[s]:
                n_left += 1
        for f in range(d):
            li = start
            ri = 0
            for i in range(start, end):
                s = order[f, i]
                if goes_left[s]:
                    order[f, li] = s
                    li += 1
                else:
                    buf[ri] = s
                    ri += 1
            for i in range(ri):
                order[f, li + i] = buf[i]
        mid = start + n_left
        importance[best_feat] += best_gain

        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        feature[node] = best_feat
        threshold[node] = best_thr
        left[node] = lnode
        right[node] = rnode

        st_node[top] = rnode
        st_start[top] = mid
        st_end[top] = end
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = lnode
        st_start[top] = start
        st_end[top] = mid
        st_depth[top] = depth + 1
        top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        importance,
    )


@njit(cache=True)
def predict_trees(X, offsets, feature, threshold, left, right, value):
    """Mean leaf value over trees, plus the number of split comparisons per sample."""
    n = X.shape[0]
    n_trees = offsets.shape[0] - 1
    out = np.zeros(n)
    comparisons = np.zeros(n, dtype=np.int64)
    for i in range(n):
        acc = 0.0
        c = 0
        for t in range(n_trees):
            base = offsets[t]
            node = base
            while feature[node] != _LEAF:
                c += 1
                if X[i, feature[node]] <= threshold[node]:
                    node = base + left[node]
                else:
                    node = base + right[node]
            acc += value[node]
        out[i] = acc / n_trees
        comparisons[i] = c
    return out, comparisons


@njit(cache=True)
def tree_depths(offsets, feature, left, right):
    n_trees = offsets.shape[0] - 1
    depths = np.zeros(n_trees, dtype=np.int64)
    for t in range(n_trees):
        base = offsets[t]
        size = offsets[t + 1] - base
        depth = np.zeros(size, dtype=np.int64)
        best = 0
        # children always have larger local ids than their parent
        for node in range(size):
            if feature[base + node] != _LEAF:
                depth[left[base + node]] = depth[node] + 1
                depth[right[base + node]] = depth[node] + 1
            if depth[node] > best:
                best = depth[node]
        depths[t] = best
    return depths
