# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: Gini split search, forest prediction, sample generation.

Mirrors ``_pykernels`` operation for operation; see that module for the
reference semantics.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, cos, fabs, isnan, log, nextafter, sqrt, INFINITY
from libc.stdint cimport int64_t, uint64_t

cnp.import_array()

NAME = "cython"

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double TO_UNIT = 1.0 / 9007199254740992.0
cdef double TWO_PI = 6.283185307179586


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t stream_state(uint64_t seed, uint64_t index) noexcept nogil:
    return mix64(mix64(seed) + index * GOLDEN)


cdef inline double uniform(uint64_t* s) noexcept nogil:
    s[0] = s[0] + GOLDEN
    return <double>(mix64(s[0]) >> 11) * TO_UNIT


cdef inline double normal(uint64_t* s) noexcept nogil:
    cdef double u1 = 1.0 - uniform(s)
    cdef double u2 = uniform(s)
    return sqrt(-2.0 * log(u1)) * cos(TWO_PI * u2)


cdef inline uint64_t as_u64(object v):
    return <uint64_t>(int(v) & 0xFFFFFFFFFFFFFFFF)


cdef inline double midpoint(double a, double b) noexcept nogil:
    cdef double m = a + (b - a) * 0.5
    if m <= a or m > b:
        m = b
    return m


def best_split(const double[:, ::1] X, const int64_t[::1] y, idx, features, int n_classes):
    cdef const int64_t[::1] rows = np.ascontiguousarray(idx, dtype=np.int64)
    cdef Py_ssize_t n = rows.shape[0]
    cdef Py_ssize_t i, j, c
    cdef int64_t f
    cdef double[::1] total = np.zeros(n_classes)
    cdef double[::1] lcount = np.zeros(n_classes)
    cdef double[::1] vals = np.empty(n)
    cdef double[::1] sv = np.empty(n)
    cdef int64_t[::1] sl = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] order
    cdef double a, b, nl, nr, score
    cdef double best_score = -INFINITY
    cdef int64_t best_f = -1
    cdef double best_t = np.nan
    cdef double feat_best = 0.0

    for i in range(n):
        total[y[rows[i]]] += 1.0
    for f in features:
        for i in range(n):
            vals[i] = X[rows[i], f]
        order = np.argsort(np.asarray(vals), kind="stable")
        for i in range(n):
            sv[i] = vals[order[i]]
            sl[i] = y[rows[order[i]]]
        for c in range(n_classes):
            lcount[c] = 0.0
        j = -1
        for i in range(n - 1):
            lcount[sl[i]] += 1.0
            if sv[i] < sv[i + 1]:
                nl = <double>(i + 1)
                nr = n - nl
                a = 0.0
                b = 0.0
                for c in range(n_classes):
                    a += lcount[c] * lcount[c]
                    b += (total[c] - lcount[c]) * (total[c] - lcount[c])
                score = a / nl + b / nr
                if j < 0 or score > feat_best:
                    feat_best = score
                    j = i
        if j >= 0 and feat_best > best_score:
            best_score = feat_best
            best_f = f
            best_t = midpoint(sv[j], sv[j + 1])
    return int(best_f), float(best_t)


cdef inline int64_t route(const int64_t[::1] feature, const double[::1] threshold,
                          const int64_t[::1] left, const int64_t[::1] right,
                          int64_t n, const double* x) noexcept nogil:
    while feature[n] >= 0:
        if x[feature[n]] < threshold[n]:
            n = left[n]
        else:
            n = right[n]
    return n


def predict_batch(packed, X):
    cdef const int64_t[::1] feature = packed[0]
    cdef const double[::1] threshold = packed[1]
    cdef const int64_t[::1] left = packed[2]
    cdef const int64_t[::1] right = packed[3]
    cdef const double[:, ::1] value = packed[4]
    cdef const int64_t[::1] roots = packed[5]
    cdef const double[:, ::1] xs = np.ascontiguousarray(X, dtype=np.float64)
    cdef Py_ssize_t n_rows = xs.shape[0]
    cdef Py_ssize_t n_classes = value.shape[1]
    cdef Py_ssize_t n_trees = roots.shape[0]
    out_arr = np.zeros((n_rows, n_classes))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, t, c
    cdef int64_t leaf
    cdef double nt = <double>n_trees
    with nogil:
        for i in range(n_rows):
            for t in range(n_trees):
                leaf = route(feature, threshold, left, right, roots[t], &xs[i, 0])
                for c in range(n_classes):
                    out[i, c] += value[leaf, c] / nt
    return out_arr


cdef inline void init_into(double* x, Py_ssize_t n_features, const double[::1] f_min,
                           const double[::1] f_max, const double[::1] f_mean,
                           const double[::1] f_std, double c_std, double p_zero,
                           uint64_t* s) noexcept nogil:
    cdef Py_ssize_t f
    cdef double v
    for f in range(n_features):
        v = f_mean[f] + c_std * f_std[f] * normal(s)
        if v < f_min[f]:
            v = f_min[f]
        if v > f_max[f]:
            v = f_max[f]
        if uniform(s) < p_zero:
            v = 0.0
        x[f] = v


def init_batch(stats, double c_std, double p_zero, seed, start, Py_ssize_t count):
    cdef const double[::1] f_min = np.ascontiguousarray(stats[0], dtype=np.float64)
    cdef const double[::1] f_max = np.ascontiguousarray(stats[1], dtype=np.float64)
    cdef const double[::1] f_mean = np.ascontiguousarray(stats[2], dtype=np.float64)
    cdef const double[::1] f_std = np.ascontiguousarray(stats[3], dtype=np.float64)
    cdef Py_ssize_t n_features = f_min.shape[0]
    out_arr = np.empty((count, n_features))
    cdef double[:, ::1] out = out_arr
    cdef uint64_t s
    cdef uint64_t useed = as_u64(seed)
    cdef uint64_t ustart = as_u64(start)
    cdef Py_ssize_t i
    if n_features == 0 or count == 0:
        return out_arr
    with nogil:
        for i in range(count):
            s = stream_state(useed, ustart + <uint64_t>i)
            init_into(&out[i, 0], n_features, f_min, f_max, f_mean, f_std, c_std, p_zero, &s)
    return out_arr


cdef inline double resample_below(double theta, double lo, double hi, double u) noexcept nogil:
    cdef double v, eps
    if theta > lo:
        v = lo + u * (theta - lo)
        if v >= theta:
            v = nextafter(theta, -INFINITY)
        return v
    eps = 1e-9 * (hi - lo if hi - lo > 1.0 else 1.0)
    v = nextafter(theta, -INFINITY)
    if theta - eps < v:
        return theta - eps
    return v


cdef inline double resample_above(double theta, double lo, double hi, double u) noexcept nogil:
    if theta < hi:
        return theta + u * (hi - theta)
    return theta


def generate_batch(packed, weights, stats, params, seed, start, Py_ssize_t count):
    cdef const int64_t[::1] feature = packed[0]
    cdef const double[::1] threshold = packed[1]
    cdef const int64_t[::1] left = packed[2]
    cdef const int64_t[::1] right = packed[3]
    cdef const double[:, ::1] value = packed[4]
    cdef const int64_t[::1] roots = packed[5]
    cdef const double[:, ::1] W = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[::1] f_min = np.ascontiguousarray(stats[0], dtype=np.float64)
    cdef const double[::1] f_max = np.ascontiguousarray(stats[1], dtype=np.float64)
    cdef const double[::1] f_mean = np.ascontiguousarray(stats[2], dtype=np.float64)
    cdef const double[::1] f_std = np.ascontiguousarray(stats[3], dtype=np.float64)
    cdef double c_std = params[0]
    cdef double p_zero = params[1]
    cdef double w_path_sigma = params[2]
    cdef double p_forest_fixed = params[3]
    cdef bint use_pw = params[4]
    cdef bint use_dts = params[5]
    cdef Py_ssize_t n_features = f_min.shape[0]
    cdef Py_ssize_t n_classes = value.shape[1]
    cdef Py_ssize_t n_trees = roots.shape[0]
    cdef uint64_t useed = as_u64(seed)
    cdef uint64_t ustart = as_u64(start)
    cdef uint64_t ustart_mod = <uint64_t>(int(start) % n_classes)

    X_arr = np.empty((count, n_features))
    Y_arr = np.zeros((count, n_classes))
    T_arr = np.empty(count, dtype=np.int64)
    cdef double[:, ::1] Xo = X_arr
    cdef double[:, ::1] Yo = Y_arr
    cdef int64_t[::1] To = T_arr
    cdef int64_t[::1] order = np.empty(n_trees, dtype=np.int64)
    cdef unsigned char[::1] used = np.empty(max(n_features, 1), dtype=np.uint8)

    cdef Py_ssize_t i, f, c, ti, n_sub, jj
    cdef int64_t t, n, nxt, leaf, tmp
    cdef uint64_t s
    cdef double w_path, p_forest, u, z, th, w_left, w_right, norm, p_left, p_right
    cdef double nt = <double>n_trees
    cdef double* x
    cdef bint seen

    with nogil:
        for i in range(count):
            x = &Xo[i, 0]
            t = <int64_t>((ustart_mod + <uint64_t>i) % <uint64_t>n_classes)
            s = stream_state(useed, ustart + <uint64_t>i)
            w_path = 1.0 + fabs(w_path_sigma * normal(&s))
            u = uniform(&s)
            p_forest = u if isnan(p_forest_fixed) else p_forest_fixed
            init_into(x, n_features, f_min, f_max, f_mean, f_std, c_std, p_zero, &s)
            for f in range(n_features):
                used[f] = 0
            if use_dts:
                n_sub = <Py_ssize_t>ceil(nt * p_forest)
                if n_sub < 1:
                    n_sub = 1
                if n_sub > n_trees:
                    n_sub = n_trees
            else:
                n_sub = n_trees
            for ti in range(n_trees):
                order[ti] = ti
            for ti in range(n_sub):
                jj = ti + <Py_ssize_t>(uniform(&s) * (n_trees - ti))
                tmp = order[ti]
                order[ti] = order[jj]
                order[jj] = tmp
            for ti in range(n_sub):
                n = roots[order[ti]]
                while feature[n] >= 0:
                    f = feature[n]
                    th = threshold[n]
                    seen = used[f]
                    if not seen:
                        z = normal(&s)
                        if z > 4.0:
                            z = 4.0
                        elif z < -4.0:
                            z = -4.0
                        x[f] = th + f_std[f] * z
                    w_left = W[left[n], t]
                    w_right = W[right[n], t]
                    if seen and use_pw:
                        if x[f] < th:
                            w_left = w_left * w_path
                        else:
                            w_right = w_right * w_path
                    norm = sqrt(w_left * w_left + w_right * w_right)
                    if norm > 0.0:
                        p_left = w_left / norm
                        p_right = w_right / norm
                        p_left = p_left / (p_left + p_right)
                    else:
                        p_left = 0.5
                    if uniform(&s) < p_left:
                        if x[f] >= th:
                            x[f] = resample_below(th, f_min[f], f_max[f], uniform(&s))
                        nxt = left[n]
                    else:
                        if x[f] < th:
                            x[f] = resample_above(th, f_min[f], f_max[f], uniform(&s))
                        nxt = right[n]
                    used[f] = 1
                    n = nxt
            for ti in range(n_trees):
                leaf = route(feature, threshold, left, right, roots[ti], x)
                for c in range(n_classes):
                    Yo[i, c] += value[leaf, c] / nt
            To[i] = t
    return X_arr, Y_arr, T_arr
