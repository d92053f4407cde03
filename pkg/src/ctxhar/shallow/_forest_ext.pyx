# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled forest kernels; same contract and random stream as ``_forest_py``."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport int32_t, int64_t, uint64_t

cnp.import_array()

BACKEND = "cython"


cdef inline uint64_t _next(uint64_t* s) noexcept nogil:
    cdef uint64_t z
    s[0] += <uint64_t>0x9E3779B97F4A7C15ULL
    z = s[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


def mix64(uint64_t value):
    return _next(&value)


cdef inline void _sift(double* v, int32_t* lab, Py_ssize_t root, Py_ssize_t end) noexcept nogil:
    cdef Py_ssize_t child, big
    cdef double tv
    cdef int32_t tl
    while True:
        child = 2 * root + 1
        if child >= end:
            return
        big = root
        if v[big] < v[child]:
            big = child
        if child + 1 < end and v[big] < v[child + 1]:
            big = child + 1
        if big == root:
            return
        tv = v[root]; v[root] = v[big]; v[big] = tv
        tl = lab[root]; lab[root] = lab[big]; lab[big] = tl
        root = big


cdef void _heapsort(double* v, int32_t* lab, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t start, end
    cdef double tv
    cdef int32_t tl
    if n < 2:
        return
    start = (n - 2) // 2
    while start >= 0:
        _sift(v, lab, start, n)
        start -= 1
    end = n - 1
    while end > 0:
        tv = v[0]; v[0] = v[end]; v[end] = tv
        tl = lab[0]; lab[0] = lab[end]; lab[end] = tl
        _sift(v, lab, 0, end)
        end -= 1


cdef Py_ssize_t _grow(
    const double[:, ::1] X,
    const int32_t[::1] y,
    int n_classes,
    int mtry,
    uint64_t seed,
    Py_ssize_t[::1] samples,
    Py_ssize_t[::1] scratch,
    double[::1] vals,
    int32_t[::1] labs,
    int32_t[::1] feats,
    int64_t[::1] cnt,
    int64_t[::1] lc,
    Py_ssize_t[:, ::1] stack,
    int32_t[::1] feature,
    double[::1] threshold,
    int32_t[::1] left,
    int32_t[::1] right,
    int32_t[:, ::1] counts,
) noexcept nogil:
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t p = X.shape[1]
    cdef uint64_t state = seed
    cdef Py_ssize_t i, j, k, c, m, start, end, parent, node, top, mid, nl, nr
    cdef Py_ssize_t n_nodes = 0
    cdef int32_t tf, f, best_f, lab, maxc
    cdef int is_left, visited
    cdef int64_t sl, sr
    cdef double score, best_score, thr, best_thr

    for i in range(n):
        samples[i] = <Py_ssize_t>(_next(&state) % <uint64_t>n)
    for i in range(p):
        feats[i] = <int32_t>i

    stack[0, 0] = 0
    stack[0, 1] = n
    stack[0, 2] = -1
    stack[0, 3] = 0
    top = 1
    while top > 0:
        top -= 1
        start = stack[top, 0]
        end = stack[top, 1]
        parent = stack[top, 2]
        is_left = <int>stack[top, 3]
        node = n_nodes
        n_nodes += 1
        if parent >= 0:
            if is_left:
                left[parent] = <int32_t>node
            else:
                right[parent] = <int32_t>node
        m = end - start
        for c in range(n_classes):
            cnt[c] = 0
        for i in range(start, end):
            cnt[y[samples[i]]] += 1
        maxc = 0
        for c in range(n_classes):
            counts[node, c] = <int32_t>cnt[c]
            if cnt[c] > maxc:
                maxc = <int32_t>cnt[c]
        if m < 2 or maxc == m:
            continue

        best_score = -1.0
        best_f = -1
        best_thr = 0.0
        i = 0
        visited = 0
        while i < p and (visited < mtry or best_f < 0):
            j = i + <Py_ssize_t>(_next(&state) % <uint64_t>(p - i))
            tf = feats[i]; feats[i] = feats[j]; feats[j] = tf
            f = feats[i]
            i += 1
            visited += 1
            for k in range(m):
                vals[k] = X[samples[start + k], f]
                labs[k] = y[samples[start + k]]
            _heapsort(&vals[0], &labs[0], m)
            if vals[0] == vals[m - 1]:
                continue
            for c in range(n_classes):
                lc[c] = 0
            sl = 0
            sr = 0
            for c in range(n_classes):
                sr += cnt[c] * cnt[c]
            for k in range(m - 1):
                lab = labs[k]
                sl += 2 * lc[lab] + 1
                sr -= 2 * (cnt[lab] - lc[lab]) - 1
                lc[lab] += 1
                if vals[k] < vals[k + 1]:
                    nl = k + 1
                    nr = m - nl
                    score = <double>sl / <double>nl + <double>sr / <double>nr
                    if score > best_score:
                        best_score = score
                        best_f = f
                        thr = (vals[k] + vals[k + 1]) / 2.0
                        if thr == vals[k + 1]:
                            thr = vals[k]
                        best_thr = thr
        if best_f < 0:
            continue

        feature[node] = best_f
        threshold[node] = best_thr
        mid = start
        j = 0
        for i in range(start, end):
            if X[samples[i], best_f] <= best_thr:
                samples[mid] = samples[i]
                mid += 1
            else:
                scratch[j] = samples[i]
                j += 1
        for i in range(j):
            samples[mid + i] = scratch[i]

        stack[top, 0] = mid
        stack[top, 1] = end
        stack[top, 2] = node
        stack[top, 3] = 0
        top += 1
        stack[top, 0] = start
        stack[top, 1] = mid
        stack[top, 2] = node
        stack[top, 3] = 1
        top += 1
    return n_nodes


def build_tree(X, y, int n_classes, int mtry, seed):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const int32_t[::1] yv = np.ascontiguousarray(y, dtype=np.int32)
    cdef Py_ssize_t n = Xv.shape[0]
    cdef Py_ssize_t p = Xv.shape[1]
    cdef Py_ssize_t max_nodes = 2 * n - 1
    cdef uint64_t useed = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef Py_ssize_t n_nodes

    samples = np.empty(n, dtype=np.intp)
    scratch = np.empty(n, dtype=np.intp)
    vals = np.empty(n, dtype=np.float64)
    labs = np.empty(n, dtype=np.int32)
    feats = np.empty(p, dtype=np.int32)
    cnt = np.empty(n_classes, dtype=np.int64)
    lc = np.empty(n_classes, dtype=np.int64)
    stack = np.empty((max_nodes + 1, 4), dtype=np.intp)
    feature = np.full(max_nodes, -1, dtype=np.int32)
    threshold = np.zeros(max_nodes, dtype=np.float64)
    left = np.full(max_nodes, -1, dtype=np.int32)
    right = np.full(max_nodes, -1, dtype=np.int32)
    counts = np.zeros((max_nodes, n_classes), dtype=np.int32)

    cdef Py_ssize_t[::1] samples_v = samples
    cdef Py_ssize_t[::1] scratch_v = scratch
    cdef double[::1] vals_v = vals
    cdef int32_t[::1] labs_v = labs
    cdef int32_t[::1] feats_v = feats
    cdef int64_t[::1] cnt_v = cnt
    cdef int64_t[::1] lc_v = lc
    cdef Py_ssize_t[:, ::1] stack_v = stack
    cdef int32_t[::1] feature_v = feature
    cdef double[::1] threshold_v = threshold
    cdef int32_t[::1] left_v = left
    cdef int32_t[::1] right_v = right
    cdef int32_t[:, ::1] counts_v = counts

    with nogil:
        n_nodes = _grow(Xv, yv, n_classes, mtry, useed, samples_v, scratch_v, vals_v,
                        labs_v, feats_v, cnt_v, lc_v, stack_v, feature_v, threshold_v,
                        left_v, right_v, counts_v)
    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        counts[:n_nodes].copy(),
    )


def predict_votes(X, feature, threshold, left, right, leaf_class, offsets, int n_classes):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const int32_t[::1] fv = np.ascontiguousarray(feature, dtype=np.int32)
    cdef const double[::1] tv = np.ascontiguousarray(threshold, dtype=np.float64)
    cdef const int32_t[::1] lv = np.ascontiguousarray(left, dtype=np.int32)
    cdef const int32_t[::1] rv = np.ascontiguousarray(right, dtype=np.int32)
    cdef const int32_t[::1] cv = np.ascontiguousarray(leaf_class, dtype=np.int32)
    cdef const int64_t[::1] ov = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef Py_ssize_t n = Xv.shape[0]
    cdef Py_ssize_t n_trees = ov.shape[0] - 1
    cdef Py_ssize_t r, t, base, node
    votes = np.zeros((n, n_classes), dtype=np.int64)
    cdef int64_t[:, ::1] vv = votes
    with nogil:
        for r in range(n):
            for t in range(n_trees):
                base = ov[t]
                node = base
                while fv[node] >= 0:
                    if Xv[r, fv[node]] <= tv[node]:
                        node = base + lv[node]
                    else:
                        node = base + rv[node]
                vv[r, cv[node]] += 1
    return votes
