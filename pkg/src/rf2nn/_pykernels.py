"""Pure-Python kernels.

Reference twin of ``_kernels.pyx``. Every function here has the same
signature, the same random-stream consumption order and the same floating
point operation order as its compiled counterpart, so outputs match bit for
bit. Used automatically when the extension is not built.
"""

import math

import numpy as np

from ._rng import RngStream

NAME = "python"


def best_split(X, y, idx, features, n_classes):
    """Best Gini split of rows ``idx`` over ``features`` (ascending).

    Maximizes ``sum_c L_c**2 / n_left + sum_c R_c**2 / n_right``, which is
    equivalent to minimizing the weighted Gini impurity. Ties keep the first
    candidate in (feature, threshold) order. Returns ``(-1, nan)`` when no
    feature has two distinct values.
    """
    idx = np.asarray(idx, dtype=np.int64)
    n = idx.shape[0]
    labels = y[idx]
    total = np.bincount(labels, minlength=n_classes).astype(np.float64)
    onehot = np.zeros((n, n_classes))
    best_f, best_t, best_score = -1, math.nan, -math.inf
    for f in features:
        vals = X[idx, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        cut = np.nonzero(sv[:-1] < sv[1:])[0]
        if cut.size == 0:
            continue
        onehot[:] = 0.0
        onehot[np.arange(n), labels[order]] = 1.0
        left = np.cumsum(onehot, axis=0)[cut]
        right = total - left
        n_left = (cut + 1).astype(np.float64)
        n_right = n - n_left
        score = (left * left).sum(axis=1) / n_left + (right * right).sum(axis=1) / n_right
        j = int(np.argmax(score))
        if score[j] > best_score:
            best_score = float(score[j])
            best_f = int(f)
            best_t = midpoint(float(sv[cut[j]]), float(sv[cut[j] + 1]))
    return best_f, best_t


def midpoint(a, b):
    m = a + (b - a) * 0.5
    if m <= a or m > b:
        m = b
    return m


def _route(feature, threshold, left, right, root, x):
    n = root
    while feature[n] >= 0:
        n = left[n] if x[feature[n]] < threshold[n] else right[n]
    return n


def predict_batch(packed, X):
    """Forest probabilities for each row of ``X`` (sequential tree average)."""
    feature, threshold, left, right, value, roots = packed
    X = np.asarray(X, dtype=np.float64)
    n_trees = roots.shape[0]
    out = np.zeros((X.shape[0], value.shape[1]))
    rows = np.arange(X.shape[0])
    for r in roots:
        node = np.full(X.shape[0], r, dtype=np.int64)
        active = feature[node] >= 0
        while active.any():
            a = node[active]
            go_left = X[rows[active], feature[a]] < threshold[a]
            node[active] = np.where(go_left, left[a], right[a])
            active = feature[node] >= 0
        out += value[node] / n_trees
    return out


def init_into(x, f_min, f_max, f_mean, f_std, c_std, p_zero, rng):
    for f in range(len(x)):
        v = f_mean[f] + c_std * f_std[f] * rng.normal()
        if v < f_min[f]:
            v = f_min[f]
        if v > f_max[f]:
            v = f_max[f]
        if rng.uniform() < p_zero:
            v = 0.0
        x[f] = v


def init_batch(stats, c_std, p_zero, seed, start, count):
    f_min, f_max, f_mean, f_std = (list(map(float, s)) for s in stats)
    out = np.empty((count, len(f_min)))
    x = [0.0] * len(f_min)
    for i in range(count):
        init_into(x, f_min, f_max, f_mean, f_std, c_std, p_zero, RngStream(seed, start + i))
        out[i] = x
    return out


def resample_below(theta, lo, hi, u):
    if theta > lo:
        v = lo + u * (theta - lo)
        if v >= theta:
            v = math.nextafter(theta, -math.inf)
        return v
    eps = 1e-9 * max(1.0, hi - lo)
    return min(theta - eps, math.nextafter(theta, -math.inf))


def resample_above(theta, lo, hi, u):
    if theta < hi:
        return theta + u * (hi - theta)
    return theta


def walk_tree(feature, threshold, left, right, wt, root, x, used,
              f_min, f_max, f_std, w_path, use_pw, rng):
    """Guided root-to-leaf walk for one tree; mutates ``x`` and ``used``.

    ``wt[n]`` is the target-class weight of node ``n``. Returns the leaf.
    """
    n = root
    while feature[n] >= 0:
        f = feature[n]
        th = threshold[n]
        seen = used[f]
        if not seen:
            z = rng.normal()
            if z > 4.0:
                z = 4.0
            elif z < -4.0:
                z = -4.0
            x[f] = th + f_std[f] * z
        w_left = wt[left[n]]
        w_right = wt[right[n]]
        if seen and use_pw:
            if x[f] < th:
                w_left = w_left * w_path
            else:
                w_right = w_right * w_path
        norm = math.sqrt(w_left * w_left + w_right * w_right)
        if norm > 0.0:
            p_left = w_left / norm
            p_right = w_right / norm
            p_left = p_left / (p_left + p_right)
        else:
            p_left = 0.5
        if rng.uniform() < p_left:
            if x[f] >= th:
                x[f] = resample_below(th, f_min[f], f_max[f], rng.uniform())
            nxt = left[n]
        else:
            if x[f] < th:
                x[f] = resample_above(th, f_min[f], f_max[f], rng.uniform())
            nxt = right[n]
        used[f] = True
        n = nxt
    return n


def subset_order(n_trees, n_sub, rng):
    """First ``n_sub`` entries of a partial Fisher-Yates shuffle."""
    order = list(range(n_trees))
    for i in range(n_sub):
        j = i + rng.below(n_trees - i)
        order[i], order[j] = order[j], order[i]
    return order[:n_sub]


def subset_size(n_trees, p_forest, use_dts):
    if not use_dts:
        return n_trees
    return min(n_trees, max(1, int(math.ceil(n_trees * p_forest))))


def draw_sample_params(rng, w_path_sigma, p_forest_fixed):
    w_path = 1.0 + abs(w_path_sigma * rng.normal())
    u = rng.uniform()
    p_forest = u if math.isnan(p_forest_fixed) else p_forest_fixed
    return w_path, p_forest


def generate_batch(packed, weights, stats, params, seed, start, count):
    """Samples ``start .. start+count-1`` of the generation stream.

    ``params`` is ``(c_std, p_zero, w_path_sigma, p_forest_fixed, use_pw,
    use_dts)`` with ``p_forest_fixed = nan`` meaning uniformly drawn.
    Returns ``(X, Y, targets)``.
    """
    feature, threshold, left, right, value, roots = packed
    c_std, p_zero, w_path_sigma, p_forest_fixed, use_pw, use_dts = params
    n_classes = value.shape[1]
    n_trees = roots.shape[0]
    f_min, f_max, f_mean, f_std = (list(map(float, s)) for s in stats)
    n_features = len(f_min)
    feat_l, thr_l = feature.tolist(), threshold.tolist()
    left_l, right_l = left.tolist(), right.tolist()
    roots_l = roots.tolist()
    value_l = value.tolist()
    w_cols = [weights[:, c].tolist() for c in range(n_classes)]

    X = np.empty((count, n_features))
    Y = np.empty((count, n_classes))
    targets = np.empty(count, dtype=np.int64)
    x = [0.0] * n_features
    for i in range(count):
        k = start + i
        t = k % n_classes
        rng = RngStream(seed, k)
        w_path, p_forest = draw_sample_params(rng, w_path_sigma, p_forest_fixed)
        init_into(x, f_min, f_max, f_mean, f_std, c_std, p_zero, rng)
        used = [False] * n_features
        n_sub = subset_size(n_trees, p_forest, use_dts)
        for ti in subset_order(n_trees, n_sub, rng):
            walk_tree(feat_l, thr_l, left_l, right_l, w_cols[t], roots_l[ti], x, used,
                      f_min, f_max, f_std, w_path, use_pw, rng)
        acc = [0.0] * n_classes
        for r in roots_l:
            leaf = _route(feat_l, thr_l, left_l, right_l, r, x)
            probs = value_l[leaf]
            for c in range(n_classes):
                acc[c] += probs[c] / n_trees
        X[i] = x
        Y[i] = acc
        targets[i] = t
    return X, Y, targets
